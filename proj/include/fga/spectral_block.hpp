#ifndef FGA_SPECTRAL_BLOCK_HPP
#define FGA_SPECTRAL_BLOCK_HPP

// Frequency-domain unit: real FFT, real/imaginary parts stacked as 2C
// channels, 1x1 conv -> batch-norm -> ReLU on the frequency grid, unstack,
// inverse FFT back to the input width.

#include <random>

#include "fga/attention.hpp"
#include "fga/fft.hpp"
#include "fga/ops.hpp"

namespace fga {

struct SpectralBlockParams {
    ConvParams freq_conv;     // [2C, 2C, 1, 1]
    BatchNormParams freq_bn;  // [2C]

    static SpectralBlockParams zeros(std::size_t c) {
        return {ConvParams::zeros(2 * c, 2 * c, 1), BatchNormParams::zeros(2 * c)};
    }

    template <typename Rng>
    static SpectralBlockParams init(std::size_t c, Rng& rng) {
        return {ConvParams::init(2 * c, 2 * c, 1, rng), BatchNormParams::identity(2 * c)};
    }

    std::size_t channels() const { return freq_conv.weight.dim(1) / 2; }
};

/// Stack re into channels [0, C) and im into [C, 2C).
inline Tensor stack_spectrum(const ComplexSpectrum& s) { return concat_channels(s.re, s.im); }

inline ComplexSpectrum unstack_spectrum(const Tensor& y, std::size_t width) {
    const std::size_t c = y.dim(1) / 2;
    return {slice_channels(y, 0, c), slice_channels(y, c, c), width};
}

struct SpectralBlockCache {
    Tensor stacked;     // conv input
    Tensor conv_out;    // BN input
    BatchNormCache bn;
    Tensor bn_out;      // ReLU input
    std::size_t width = 0;
};

/// `fixed_bn_stats` replaces the batch statistics of the frequency-domain BN.
inline Tensor spectral_block(const Tensor& x, const SpectralBlockParams& p, SpectralBlockCache* cache = nullptr,
                             const BatchStats* fixed_bn_stats = nullptr) {
    x.require_rank(4, "spectral_block");
    const std::size_t c = x.dim(1);
    if (p.freq_conv.weight.shape() != Shape{2 * c, 2 * c, 1, 1}) {
        throw std::invalid_argument("spectral_block: parameters are for " +
                                    shape_str(p.freq_conv.weight.shape()) + " but input " + shape_str(x.shape()) +
                                    " needs 2C = " + std::to_string(2 * c) + " channels");
    }
    Tensor stacked = stack_spectrum(rfft2d(x));
    Tensor conv_out = conv2d(stacked, p.freq_conv.weight, p.freq_conv.bias);
    BatchNormCache bn_cache;
    Tensor bn_out = batchnorm2d(conv_out, p.freq_bn.gamma, p.freq_bn.beta, kBatchNormEps, &bn_cache, fixed_bn_stats);
    Tensor out = irfft2d(unstack_spectrum(relu(bn_out), x.dim(3)));
    if (cache) {
        cache->stacked = std::move(stacked);
        cache->conv_out = std::move(conv_out);
        cache->bn = std::move(bn_cache);
        cache->bn_out = std::move(bn_out);
        cache->width = x.dim(3);
    }
    return out;
}

struct SpectralBlockGrads {
    Tensor input;
    SpectralBlockParams params;
};

inline SpectralBlockGrads spectral_block_backward(const SpectralBlockCache& cache, const SpectralBlockParams& p,
                                                  const Tensor& grad_out) {
    const ComplexSpectrum d_spec = irfft2d_backward(grad_out);
    const Tensor d_relu_out = stack_spectrum(d_spec);
    const Tensor d_bn_out = relu_backward(cache.bn_out, d_relu_out);
    BatchNormGrads bn = batchnorm2d_backward(cache.bn, p.freq_bn.gamma, d_bn_out);
    Conv2dGrads conv = conv2d_backward(cache.stacked, p.freq_conv.weight, bn.input);
    SpectralBlockGrads g;
    g.input = rfft2d_backward(unstack_spectrum(conv.input, cache.width));
    g.params.freq_conv = {std::move(conv.weight), std::move(conv.bias)};
    g.params.freq_bn = {std::move(bn.gamma), std::move(bn.beta)};
    return g;
}

/// |f(background + delta) - f(background)|: how far the perturbation of one
/// input pixel reaches through `block`. With the default zero background this
/// is the response to an isolated delta.
template <typename Block>
Tensor influence_map(const Tensor& delta, Block&& block, const Tensor* background = nullptr) {
    const Tensor base = background ? *background : Tensor::zeros_like(delta);
    const Tensor response = block(base + delta);
    const Tensor reference = block(base);
    Tensor out(response.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(response[i] - reference[i]);
    return out;
}

/// Influence of a delta image through one spectral block.
///
/// On a zero background the response is degenerate: a delta in row 0 has a
/// spectrum constant along the row frequency, every stage keeps it so, and
/// the response stays in row 0; a delta at the origin has a flat spectrum that
/// batch-norm removes entirely. A generic background avoids this.
inline Tensor receptive_field_probe(const Tensor& delta, const SpectralBlockParams& p,
                                    const Tensor* background = nullptr) {
    return influence_map(delta, [&](const Tensor& x) { return spectral_block(x, p); }, background);
}

inline double fraction_above(const Tensor& t, double threshold) {
    std::size_t hits = 0;
    for (double v : t.data()) hits += v > threshold ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(t.size());
}

}  // namespace fga

#endif
