#ifndef FGA_ATTENTION_HPP
#define FGA_ATTENTION_HPP

// Spatial (pixel-to-pixel) and channel (channel-to-channel) attention with
// learnable residual gates. Both compute, per sample, an attention matrix A
// whose entry A[m][n] is the weight with which source m contributes to target
// n, normalized over m (every column of A sums to one):
//
//   spatial:  out[:, n] = lambda * sum_m A[m][n] * s3[:, m] + x[:, n]
//   channel:  out[n, :] = mu     * sum_m A[m][n] * F[m, :]  + F[n, :]
//
// Internally the transposed matrix P = A^T is kept, since it is a plain row
// softmax.

#include <algorithm>
#include <random>
#include <vector>

#include "fga/ops.hpp"

namespace fga {

struct ConvParams {
    Tensor weight;  // [Cout, Cin, k, k]
    Tensor bias;    // [Cout]

    static ConvParams zeros(std::size_t cout, std::size_t cin, std::size_t k) {
        return {Tensor({cout, cin, k, k}), Tensor({cout})};
    }

    /// He-normal weights, zero bias.
    template <typename Rng>
    static ConvParams init(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng, double gain = 1.0) {
        ConvParams p = zeros(cout, cin, k);
        std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / static_cast<double>(cin * k * k)));
        for (double& v : p.weight.data()) v = dist(rng);
        return p;
    }
};

struct BatchNormParams {
    Tensor gamma;
    Tensor beta;

    static BatchNormParams identity(std::size_t c) { return {Tensor({c}, 1.0), Tensor({c}, 0.0)}; }
    static BatchNormParams zeros(std::size_t c) { return {Tensor({c}), Tensor({c})}; }
};

/// Output width of the S1/S2 projections: floor(C / r), at least 1.
inline constexpr std::size_t kAttentionReduction = 8;

inline std::size_t reduced_channels(std::size_t c, std::size_t r = kAttentionReduction) {
    return std::max<std::size_t>(1, c / r);
}

struct SpatialAttentionParams {
    ConvParams s1;  // C -> C/r, 1x1
    ConvParams s2;  // C -> C/r, 1x1
    ConvParams s3;  // C -> C, 1x1
    Tensor lambda_gate{Shape{1}};

    static SpatialAttentionParams zeros(std::size_t c) {
        const std::size_t cr = reduced_channels(c);
        return {ConvParams::zeros(cr, c, 1), ConvParams::zeros(cr, c, 1), ConvParams::zeros(c, c, 1), Tensor({1})};
    }

    /// Gate starts at 0 so the op is an exact pass-through at initialization.
    template <typename Rng>
    static SpatialAttentionParams init(std::size_t c, Rng& rng) {
        const std::size_t cr = reduced_channels(c);
        return {ConvParams::init(cr, c, 1, rng), ConvParams::init(cr, c, 1, rng), ConvParams::init(c, c, 1, rng),
                Tensor({1}, 0.0)};
    }
};

struct ChannelAttentionParams {
    Tensor mu_gate{Shape{1}};

    static ChannelAttentionParams zeros() { return {Tensor({1})}; }
};

// ---------------------------------------------------------------------------

namespace detail {

inline Tensor sample_matrix(const Tensor& x, std::size_t n) {
    const std::size_t c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<double> buf(x.data().begin() + static_cast<std::ptrdiff_t>(n * c * hw),
                            x.data().begin() + static_cast<std::ptrdiff_t>((n + 1) * c * hw));
    return Tensor({c, hw}, std::move(buf));
}

inline void store_sample(Tensor& x, std::size_t n, const Tensor& m) {
    std::copy(m.data().begin(), m.data().end(), x.data().begin() + static_cast<std::ptrdiff_t>(n * m.size()));
}

}  // namespace detail

struct SpatialAttentionCache {
    Tensor input;
    Tensor s1, s2, s3;            // [N, C', H, W]
    std::vector<Tensor> weights;  // per sample P = A^T, [HW, HW]
    Tensor attended;              // s3 * A, [N, C, H, W]
};

/// Attention matrix A[m][n] of sample `n_sample` (columns sum to one).
inline Tensor spatial_attention_map(const Tensor& x, const SpatialAttentionParams& p, std::size_t n_sample) {
    const Tensor s1 = conv2d(x, p.s1.weight, p.s1.bias);
    const Tensor s2 = conv2d(x, p.s2.weight, p.s2.bias);
    const Tensor m1 = detail::sample_matrix(s1, n_sample), m2 = detail::sample_matrix(s2, n_sample);
    return transpose(softmax_rows(matmul(transpose(m2), m1)));
}

inline Tensor spatial_attention(const Tensor& x, const SpatialAttentionParams& p,
                                SpatialAttentionCache* cache = nullptr) {
    x.require_rank(4, "spatial_attention");
    const std::size_t n_batch = x.dim(0), c = x.dim(1);
    Tensor s1 = conv2d(x, p.s1.weight, p.s1.bias);
    Tensor s2 = conv2d(x, p.s2.weight, p.s2.bias);
    Tensor s3 = conv2d(x, p.s3.weight, p.s3.bias);
    if (s3.dim(1) != c) throw std::invalid_argument("spatial_attention: S3 must map C -> C");
    Tensor attended(x.shape());
    std::vector<Tensor> weights;
    for (std::size_t n = 0; n < n_batch; ++n) {
        const Tensor m1 = detail::sample_matrix(s1, n), m2 = detail::sample_matrix(s2, n);
        const Tensor m3 = detail::sample_matrix(s3, n);
        // logits[n][m] = <s2[:, n], s1[:, m]>, softmax over m.
        Tensor weight = softmax_rows(matmul(transpose(m2), m1));
        detail::store_sample(attended, n, matmul(m3, transpose(weight)));
        if (cache) weights.push_back(std::move(weight));
    }
    const double lambda = p.lambda_gate[0];
    Tensor out = x;
    if (lambda != 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda * attended[i];
    }
    if (cache) {
        cache->input = x;
        cache->s1 = std::move(s1);
        cache->s2 = std::move(s2);
        cache->s3 = std::move(s3);
        cache->weights = std::move(weights);
        cache->attended = std::move(attended);
    }
    return out;
}

struct SpatialAttentionGrads {
    Tensor input;
    SpatialAttentionParams params;
};

inline SpatialAttentionGrads spatial_attention_backward(const SpatialAttentionCache& cache,
                                                        const SpatialAttentionParams& p, const Tensor& grad_out) {
    const Tensor& x = cache.input;
    x.require_same_shape(grad_out, "spatial_attention_backward");
    const std::size_t n_batch = x.dim(0);
    const double lambda = p.lambda_gate[0];
    SpatialAttentionGrads g;
    g.params.lambda_gate = Tensor({1}, dot(grad_out, cache.attended));
    Tensor ds1 = Tensor::zeros_like(cache.s1), ds2 = Tensor::zeros_like(cache.s2),
           ds3 = Tensor::zeros_like(cache.s3);
    for (std::size_t n = 0; n < n_batch; ++n) {
        Tensor d_att = detail::sample_matrix(grad_out, n);
        d_att *= lambda;
        const Tensor& weight = cache.weights[n];
        const Tensor m1 = detail::sample_matrix(cache.s1, n), m2 = detail::sample_matrix(cache.s2, n);
        const Tensor m3 = detail::sample_matrix(cache.s3, n);
        // attended = m3 * W^T
        detail::store_sample(ds3, n, matmul(d_att, weight));
        const Tensor d_weight = matmul(transpose(d_att), m3);
        const Tensor d_logits = softmax_rows_backward(weight, d_weight);
        // logits = m2^T * m1
        detail::store_sample(ds1, n, matmul(m2, d_logits));
        detail::store_sample(ds2, n, matmul(m1, transpose(d_logits)));
    }
    Conv2dGrads g1 = conv2d_backward(x, p.s1.weight, ds1);
    Conv2dGrads g2 = conv2d_backward(x, p.s2.weight, ds2);
    Conv2dGrads g3 = conv2d_backward(x, p.s3.weight, ds3);
    g.input = grad_out;
    g.input += g1.input;
    g.input += g2.input;
    g.input += g3.input;
    g.params.s1 = {std::move(g1.weight), std::move(g1.bias)};
    g.params.s2 = {std::move(g2.weight), std::move(g2.bias)};
    g.params.s3 = {std::move(g3.weight), std::move(g3.bias)};
    return g;
}

// ---------------------------------------------------------------------------

struct ChannelAttentionCache {
    Tensor input;
    std::vector<Tensor> weights;  // per sample P = A^T, [C, C]
    Tensor attended;              // A^T F, [N, C, H, W]
};

/// Attention matrix A[m][n] of sample `n_sample` (columns sum to one).
inline Tensor channel_attention_map(const Tensor& x, std::size_t n_sample) {
    const Tensor f = detail::sample_matrix(x, n_sample);
    return transpose(softmax_rows(transpose(matmul(f, transpose(f)))));
}

inline Tensor channel_attention(const Tensor& x, const ChannelAttentionParams& p,
                                ChannelAttentionCache* cache = nullptr) {
    x.require_rank(4, "channel_attention");
    const std::size_t n_batch = x.dim(0);
    Tensor attended(x.shape());
    std::vector<Tensor> weights;
    for (std::size_t n = 0; n < n_batch; ++n) {
        const Tensor f = detail::sample_matrix(x, n);
        // gram[m][n] = <F[m], F[n]>; P[n][m] = softmax over m of gram[m][n].
        Tensor weight = softmax_rows(transpose(matmul(f, transpose(f))));
        detail::store_sample(attended, n, matmul(weight, f));
        if (cache) weights.push_back(std::move(weight));
    }
    const double mu = p.mu_gate[0];
    Tensor out = x;
    if (mu != 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += mu * attended[i];
    }
    if (cache) {
        cache->input = x;
        cache->weights = std::move(weights);
        cache->attended = std::move(attended);
    }
    return out;
}

struct ChannelAttentionGrads {
    Tensor input;
    ChannelAttentionParams params;
};

inline ChannelAttentionGrads channel_attention_backward(const ChannelAttentionCache& cache,
                                                        const ChannelAttentionParams& p, const Tensor& grad_out) {
    const Tensor& x = cache.input;
    x.require_same_shape(grad_out, "channel_attention_backward");
    const double mu = p.mu_gate[0];
    ChannelAttentionGrads g{grad_out, {Tensor({1}, dot(grad_out, cache.attended))}};
    for (std::size_t n = 0; n < x.dim(0); ++n) {
        const Tensor f = detail::sample_matrix(x, n);
        Tensor d_att = detail::sample_matrix(grad_out, n);
        d_att *= mu;
        const Tensor& weight = cache.weights[n];
        Tensor df = matmul(transpose(weight), d_att);
        const Tensor d_weight = matmul(d_att, transpose(f));
        const Tensor d_gram = transpose(softmax_rows_backward(weight, d_weight));
        df += matmul(d_gram + transpose(d_gram), f);
        df += detail::sample_matrix(grad_out, n);
        detail::store_sample(g.input, n, df);
    }
    return g;
}

}  // namespace fga

#endif
