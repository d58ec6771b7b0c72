#ifndef FGA_FGA_LAYER_HPP
#define FGA_FGA_LAYER_HPP

// Dual-path Fourier-guided attention layer.
//
//   x_g = first Cg channels, x_l = remaining Cl channels
//   Y1 = conv3x3_gl(x_g) + conv3x3_ll(x_l)          (Cl channels)
//   Y2 = conv3x3_lg(x_l) + spectral_block(x_g)      (Cg channels)
//   Y_l = channel_attention(relu(bn1(Y1)))
//   Y_g = spatial_attention(relu(bn2(Y2)))
//   out = concat(Y_g, Y_l)

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "fga/attention.hpp"
#include "fga/ops.hpp"
#include "fga/spectral_block.hpp"

namespace fga {

class FgaConfig {
public:
    FgaConfig(std::size_t channels, double alpha_in) : channels_(channels), alpha_in_(alpha_in) {
        if (!(alpha_in >= 0.0 && alpha_in <= 1.0)) {
            throw std::invalid_argument("FgaConfig: alpha_in must lie in [0, 1], got " + std::to_string(alpha_in));
        }
        if (channels < 2) {
            throw std::invalid_argument("FgaConfig: need at least 2 channels to split, got " +
                                        std::to_string(channels));
        }
        // Round half up, then keep both paths non-empty.
        const auto raw = static_cast<std::size_t>(std::floor(alpha_in * static_cast<double>(channels) + 0.5));
        global_ = std::clamp<std::size_t>(raw, 1, channels - 1);
    }

    static FgaConfig from_split(std::size_t channels, std::size_t global_channels) {
        FgaConfig cfg(channels, static_cast<double>(global_channels) / static_cast<double>(channels));
        if (cfg.global_channels() != global_channels) {
            throw std::invalid_argument("FgaConfig: global split " + std::to_string(global_channels) + " of " +
                                        std::to_string(channels) + " is not admissible");
        }
        return cfg;
    }

    std::size_t channels() const { return channels_; }
    double alpha_in() const { return alpha_in_; }
    std::size_t global_channels() const { return global_; }
    std::size_t local_channels() const { return channels_ - global_; }

private:
    std::size_t channels_;
    double alpha_in_;
    std::size_t global_ = 1;
};

inline constexpr double kDefaultAlphaIn = 0.5;

struct FgaParams {
    ConvParams conv_ll;  // Cl -> Cl
    ConvParams conv_lg;  // Cl -> Cg
    ConvParams conv_gl;  // Cg -> Cl
    SpectralBlockParams spectral;
    BatchNormParams bn1;  // Cl
    BatchNormParams bn2;  // Cg
    ChannelAttentionParams ch_attn;
    SpatialAttentionParams sp_attn;

    static FgaParams zeros(const FgaConfig& cfg) {
        const std::size_t cg = cfg.global_channels(), cl = cfg.local_channels();
        return {ConvParams::zeros(cl, cl, 3), ConvParams::zeros(cg, cl, 3), ConvParams::zeros(cl, cg, 3),
                SpectralBlockParams::zeros(cg), BatchNormParams::zeros(cl), BatchNormParams::zeros(cg),
                ChannelAttentionParams::zeros(), SpatialAttentionParams::zeros(cg)};
    }

    /// Gates start at zero, BN at identity affine.
    template <typename Rng>
    static FgaParams init(const FgaConfig& cfg, Rng& rng) {
        const std::size_t cg = cfg.global_channels(), cl = cfg.local_channels();
        FgaParams p;
        p.conv_ll = ConvParams::init(cl, cl, 3, rng);
        p.conv_lg = ConvParams::init(cg, cl, 3, rng);
        p.conv_gl = ConvParams::init(cl, cg, 3, rng);
        p.spectral = SpectralBlockParams::init(cg, rng);
        p.bn1 = BatchNormParams::identity(cl);
        p.bn2 = BatchNormParams::identity(cg);
        p.ch_attn = ChannelAttentionParams::zeros();
        p.sp_attn = SpatialAttentionParams::init(cg, rng);
        return p;
    }

    /// Visits every tensor with a stable dotted name.
    template <typename Self, typename Fn>
    static void visit(Self& self, const std::string& prefix, Fn&& fn) {
        fn(prefix + "conv_ll.weight", self.conv_ll.weight);
        fn(prefix + "conv_ll.bias", self.conv_ll.bias);
        fn(prefix + "conv_lg.weight", self.conv_lg.weight);
        fn(prefix + "conv_lg.bias", self.conv_lg.bias);
        fn(prefix + "conv_gl.weight", self.conv_gl.weight);
        fn(prefix + "conv_gl.bias", self.conv_gl.bias);
        fn(prefix + "spectral.conv.weight", self.spectral.freq_conv.weight);
        fn(prefix + "spectral.conv.bias", self.spectral.freq_conv.bias);
        fn(prefix + "spectral.bn.gamma", self.spectral.freq_bn.gamma);
        fn(prefix + "spectral.bn.beta", self.spectral.freq_bn.beta);
        fn(prefix + "bn1.gamma", self.bn1.gamma);
        fn(prefix + "bn1.beta", self.bn1.beta);
        fn(prefix + "bn2.gamma", self.bn2.gamma);
        fn(prefix + "bn2.beta", self.bn2.beta);
        fn(prefix + "ch_attn.mu", self.ch_attn.mu_gate);
        fn(prefix + "sp_attn.s1.weight", self.sp_attn.s1.weight);
        fn(prefix + "sp_attn.s1.bias", self.sp_attn.s1.bias);
        fn(prefix + "sp_attn.s2.weight", self.sp_attn.s2.weight);
        fn(prefix + "sp_attn.s2.bias", self.sp_attn.s2.bias);
        fn(prefix + "sp_attn.s3.weight", self.sp_attn.s3.weight);
        fn(prefix + "sp_attn.s3.bias", self.sp_attn.s3.bias);
        fn(prefix + "sp_attn.lambda", self.sp_attn.lambda_gate);
    }
};

struct FgaCache {
    Tensor x_g, x_l;
    SpectralBlockCache spectral;
    Tensor y1, y2;  // pre-BN sums
    BatchNormCache bn1, bn2;
    Tensor bn1_out, bn2_out;  // ReLU inputs
    ChannelAttentionCache ch_attn;
    SpatialAttentionCache sp_attn;
};

inline Tensor fga_forward(const Tensor& x, const FgaParams& p, const FgaConfig& cfg, FgaCache* cache = nullptr) {
    x.require_rank(4, "fga_forward");
    if (x.dim(1) != cfg.channels()) {
        throw std::invalid_argument("fga_forward: input " + shape_str(x.shape()) + " does not have " +
                                    std::to_string(cfg.channels()) + " channels");
    }
    const std::size_t cg = cfg.global_channels(), cl = cfg.local_channels();
    Tensor x_g = slice_channels(x, 0, cg);
    Tensor x_l = slice_channels(x, cg, cl);

    Tensor y1 = conv2d(x_g, p.conv_gl.weight, p.conv_gl.bias);
    y1 += conv2d(x_l, p.conv_ll.weight, p.conv_ll.bias);
    Tensor y2 = conv2d(x_l, p.conv_lg.weight, p.conv_lg.bias);
    SpectralBlockCache spectral_cache;
    y2 += spectral_block(x_g, p.spectral, cache ? &spectral_cache : nullptr);

    BatchNormCache bn1_cache, bn2_cache;
    Tensor bn1_out = batchnorm2d(y1, p.bn1.gamma, p.bn1.beta, kBatchNormEps, &bn1_cache);
    Tensor bn2_out = batchnorm2d(y2, p.bn2.gamma, p.bn2.beta, kBatchNormEps, &bn2_cache);

    ChannelAttentionCache ch_cache;
    SpatialAttentionCache sp_cache;
    const Tensor y_l = channel_attention(relu(bn1_out), p.ch_attn, cache ? &ch_cache : nullptr);
    const Tensor y_g = spatial_attention(relu(bn2_out), p.sp_attn, cache ? &sp_cache : nullptr);
    Tensor out = concat_channels(y_g, y_l);

    if (cache) {
        cache->x_g = std::move(x_g);
        cache->x_l = std::move(x_l);
        cache->spectral = std::move(spectral_cache);
        cache->y1 = std::move(y1);
        cache->y2 = std::move(y2);
        cache->bn1 = std::move(bn1_cache);
        cache->bn2 = std::move(bn2_cache);
        cache->bn1_out = std::move(bn1_out);
        cache->bn2_out = std::move(bn2_out);
        cache->ch_attn = std::move(ch_cache);
        cache->sp_attn = std::move(sp_cache);
    }
    return out;
}

struct FgaGrads {
    Tensor input;
    FgaParams params;
};

inline FgaGrads fga_backward(const FgaCache& cache, const FgaParams& p, const FgaConfig& cfg,
                             const Tensor& grad_out) {
    const std::size_t cg = cfg.global_channels(), cl = cfg.local_channels();
    const Tensor d_yg = slice_channels(grad_out, 0, cg);
    const Tensor d_yl = slice_channels(grad_out, cg, cl);

    SpatialAttentionGrads sp = spatial_attention_backward(cache.sp_attn, p.sp_attn, d_yg);
    ChannelAttentionGrads ch = channel_attention_backward(cache.ch_attn, p.ch_attn, d_yl);
    BatchNormGrads bn2 = batchnorm2d_backward(cache.bn2, p.bn2.gamma, relu_backward(cache.bn2_out, sp.input));
    BatchNormGrads bn1 = batchnorm2d_backward(cache.bn1, p.bn1.gamma, relu_backward(cache.bn1_out, ch.input));

    // Y1 = gl(x_g) + ll(x_l); Y2 = lg(x_l) + spectral(x_g)
    Conv2dGrads gl = conv2d_backward(cache.x_g, p.conv_gl.weight, bn1.input);
    Conv2dGrads ll = conv2d_backward(cache.x_l, p.conv_ll.weight, bn1.input);
    Conv2dGrads lg = conv2d_backward(cache.x_l, p.conv_lg.weight, bn2.input);
    SpectralBlockGrads sb = spectral_block_backward(cache.spectral, p.spectral, bn2.input);

    Tensor d_xg = std::move(gl.input);
    d_xg += sb.input;
    Tensor d_xl = std::move(ll.input);
    d_xl += lg.input;

    FgaGrads g;
    g.input = concat_channels(d_xg, d_xl);
    g.params.conv_ll = {std::move(ll.weight), std::move(ll.bias)};
    g.params.conv_lg = {std::move(lg.weight), std::move(lg.bias)};
    g.params.conv_gl = {std::move(gl.weight), std::move(gl.bias)};
    g.params.spectral = std::move(sb.params);
    g.params.bn1 = {std::move(bn1.gamma), std::move(bn1.beta)};
    g.params.bn2 = {std::move(bn2.gamma), std::move(bn2.beta)};
    g.params.ch_attn = std::move(ch.params);
    g.params.sp_attn = std::move(sp.params);
    return g;
}

}  // namespace fga

#endif
