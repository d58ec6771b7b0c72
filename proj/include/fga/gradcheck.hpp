#ifndef FGA_GRADCHECK_HPP
#define FGA_GRADCHECK_HPP

// Central finite differences against hand-written backward passes. Every
// check reduces the op output to the scalar L = <out, R> for a fixed random
// probe R, so the analytic input to backward() is R itself.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fga/fga_layer.hpp"
#include "fga/network.hpp"
#include "fga/ops.hpp"
#include "fga/train.hpp"

namespace fga {

inline constexpr double kFdStep = 1e-6;
/// Denominator floor of the relative error: gradients below this are
/// compared in absolute terms.
inline constexpr double kRelErrFloor = 1e-4;

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kRelErrFloor});
}

/// Max relative error between `analytic` and the central difference of
/// `loss` w.r.t. every entry of `param`. Entries for which `skip` returns
/// true are left out.
inline double check_tensor_gradient(Tensor& param, const Tensor& analytic, const std::function<double()>& loss,
                                    double h = kFdStep,
                                    const std::function<bool(std::size_t)>& skip = {}) {
    param.require_same_shape(analytic, "check_tensor_gradient");
    double worst = 0.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        if (skip && skip(i)) continue;
        const double saved = param[i];
        param[i] = saved + h;
        const double up = loss();
        param[i] = saved - h;
        const double down = loss();
        param[i] = saved;
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    return worst;
}

template <typename Rng>
Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

struct GradCheckRow {
    std::string op;
    double max_rel_error = 0.0;
    double threshold = 1e-4;

    bool passed() const { return max_rel_error < threshold; }
};

namespace detail {

/// Moves x away from the ReLU kink so FD never straddles it.
inline void push_off_zero(Tensor& t, double margin) {
    for (double& v : t.data()) {
        if (std::abs(v) < margin) v = v < 0.0 ? -margin : margin;
    }
}

}  // namespace detail

/// Finite-difference suite over every differentiable op. Deterministic in `seed`.
inline std::vector<GradCheckRow> run_gradient_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GradCheckRow> rows;

    {  // conv2d
        Tensor x = random_tensor({2, 3, 5, 5}, rng), w = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
        const Tensor probe = random_tensor({2, 4, 5, 5}, rng);
        auto loss = [&] { return dot(conv2d(x, w, b), probe); };
        const Conv2dGrads g = conv2d_backward(x, w, probe);
        double e = check_tensor_gradient(x, g.input, loss);
        e = std::max(e, check_tensor_gradient(w, g.weight, loss));
        e = std::max(e, check_tensor_gradient(b, g.bias, loss));
        rows.push_back({"conv2d", e});
    }
    {  // batchnorm2d
        Tensor x = random_tensor({2, 3, 4, 4}, rng), gamma = random_tensor({3}, rng, 0.5, 1.5),
               beta = random_tensor({3}, rng);
        const Tensor probe = random_tensor({2, 3, 4, 4}, rng);
        auto loss = [&] { return dot(batchnorm2d(x, gamma, beta), probe); };
        BatchNormCache cache;
        batchnorm2d(x, gamma, beta, kBatchNormEps, &cache);
        const BatchNormGrads g = batchnorm2d_backward(cache, gamma, probe);
        double e = check_tensor_gradient(x, g.input, loss);
        e = std::max(e, check_tensor_gradient(gamma, g.gamma, loss));
        e = std::max(e, check_tensor_gradient(beta, g.beta, loss));
        rows.push_back({"batchnorm2d", e});
    }
    {  // relu, away from the kink
        Tensor x = random_tensor({2, 3, 4, 4}, rng);
        detail::push_off_zero(x, 1e-2);
        const Tensor probe = random_tensor({2, 3, 4, 4}, rng);
        auto loss = [&] { return dot(relu(x), probe); };
        rows.push_back({"relu", check_tensor_gradient(x, relu_backward(x, probe), loss)});
    }
    {  // softmax_rows
        Tensor x = random_tensor({4, 6}, rng, -3.0, 3.0);
        const Tensor probe = random_tensor({4, 6}, rng);
        auto loss = [&] { return dot(softmax_rows(x), probe); };
        rows.push_back({"softmax_rows", check_tensor_gradient(x, softmax_rows_backward(softmax_rows(x), probe), loss)});
    }
    {  // matmul
        Tensor a = random_tensor({7, 5}, rng), b = random_tensor({5, 3}, rng);
        const Tensor probe = random_tensor({7, 3}, rng);
        auto loss = [&] { return dot(matmul(a, b), probe); };
        const MatmulGrads g = matmul_backward(a, b, probe);
        rows.push_back({"matmul", std::max(check_tensor_gradient(a, g.a, loss), check_tensor_gradient(b, g.b, loss))});
    }
    {  // rfft2d / irfft2d
        Tensor x = random_tensor({1, 2, 4, 6}, rng);
        const ComplexSpectrum probe{random_tensor({1, 2, 4, 4}, rng), random_tensor({1, 2, 4, 4}, rng), 6};
        auto loss = [&] {
            const ComplexSpectrum s = rfft2d(x);
            return dot(s.re, probe.re) + dot(s.im, probe.im);
        };
        double e = check_tensor_gradient(x, rfft2d_backward(probe), loss);
        ComplexSpectrum s{random_tensor({1, 2, 5, 3}, rng), random_tensor({1, 2, 5, 3}, rng), 5};
        const Tensor xprobe = random_tensor({1, 2, 5, 5}, rng);
        auto iloss = [&] { return dot(irfft2d(s), xprobe); };
        const ComplexSpectrum g = irfft2d_backward(xprobe);
        e = std::max(e, check_tensor_gradient(s.re, g.re, iloss));
        e = std::max(e, check_tensor_gradient(s.im, g.im, iloss));
        rows.push_back({"rfft2d/irfft2d", e, 1e-6});
    }
    {  // spatial attention
        const std::size_t c = 3;
        Tensor x = random_tensor({2, c, 3, 3}, rng);
        SpatialAttentionParams p = SpatialAttentionParams::init(c, rng);
        p.lambda_gate[0] = 0.7;
        const Tensor probe = random_tensor({2, c, 3, 3}, rng);
        auto loss = [&] { return dot(spatial_attention(x, p), probe); };
        SpatialAttentionCache cache;
        spatial_attention(x, p, &cache);
        const SpatialAttentionGrads g = spatial_attention_backward(cache, p, probe);
        double e = check_tensor_gradient(x, g.input, loss);
        e = std::max(e, check_tensor_gradient(p.s1.weight, g.params.s1.weight, loss));
        e = std::max(e, check_tensor_gradient(p.s1.bias, g.params.s1.bias, loss));
        e = std::max(e, check_tensor_gradient(p.s2.weight, g.params.s2.weight, loss));
        e = std::max(e, check_tensor_gradient(p.s2.bias, g.params.s2.bias, loss));
        e = std::max(e, check_tensor_gradient(p.s3.weight, g.params.s3.weight, loss));
        e = std::max(e, check_tensor_gradient(p.s3.bias, g.params.s3.bias, loss));
        e = std::max(e, check_tensor_gradient(p.lambda_gate, g.params.lambda_gate, loss));
        rows.push_back({"spatial_attention", e});
    }
    {  // channel attention
        Tensor x = random_tensor({2, 3, 2, 3}, rng, -0.7, 0.7);
        ChannelAttentionParams p{Tensor({1}, 0.8)};
        const Tensor probe = random_tensor({2, 3, 2, 3}, rng);
        auto loss = [&] { return dot(channel_attention(x, p), probe); };
        ChannelAttentionCache cache;
        channel_attention(x, p, &cache);
        const ChannelAttentionGrads g = channel_attention_backward(cache, p, probe);
        double e = check_tensor_gradient(x, g.input, loss);
        e = std::max(e, check_tensor_gradient(p.mu_gate, g.params.mu_gate, loss));
        rows.push_back({"channel_attention", e});
    }
    {  // spectral block
        Tensor x = random_tensor({1, 2, 4, 4}, rng);
        SpectralBlockParams p = SpectralBlockParams::init(2, rng);
        p.freq_conv.bias = random_tensor({4}, rng, -0.3, 0.3);
        p.freq_bn.gamma = random_tensor({4}, rng, 0.5, 1.5);
        p.freq_bn.beta = random_tensor({4}, rng, -0.5, 0.5);
        const Tensor probe = random_tensor({1, 2, 4, 4}, rng);
        auto loss = [&] { return dot(spectral_block(x, p), probe); };
        SpectralBlockCache cache;
        spectral_block(x, p, &cache);
        const SpectralBlockGrads g = spectral_block_backward(cache, p, probe);
        double e = check_tensor_gradient(x, g.input, loss);
        e = std::max(e, check_tensor_gradient(p.freq_conv.weight, g.params.freq_conv.weight, loss));
        e = std::max(e, check_tensor_gradient(p.freq_conv.bias, g.params.freq_conv.bias, loss));
        e = std::max(e, check_tensor_gradient(p.freq_bn.gamma, g.params.freq_bn.gamma, loss));
        e = std::max(e, check_tensor_gradient(p.freq_bn.beta, g.params.freq_bn.beta, loss));
        rows.push_back({"spectral_block", e});
    }
    {  // full FGA layer
        const FgaConfig cfg(4, 0.5);
        Tensor x = random_tensor({1, 4, 6, 6}, rng);
        FgaParams p = FgaParams::init(cfg, rng);
        p.ch_attn.mu_gate[0] = 0.3;
        p.sp_attn.lambda_gate[0] = 0.6;
        const Tensor probe = random_tensor({1, 4, 6, 6}, rng);
        auto loss = [&] { return dot(fga_forward(x, p, cfg), probe); };
        FgaCache cache;
        fga_forward(x, p, cfg, &cache);
        FgaGrads g = fga_backward(cache, p, cfg, probe);
        double e = check_tensor_gradient(x, g.input, loss);
        std::vector<Tensor*> grads;
        FgaParams::visit(g.params, "", [&](const std::string&, Tensor& t) { grads.push_back(&t); });
        std::size_t i = 0;
        FgaParams::visit(p, "", [&](const std::string&, Tensor& t) {
            e = std::max(e, check_tensor_gradient(t, *grads[i++], loss));
        });
        rows.push_back({"fga_layer", e});
    }
    {  // toy network end to end under the Euclidean loss
        Network net = build_toy_network(1, 4, 1, kDefaultAlphaIn, rng());
        for (auto& fp : net.weights().fga) {
            fp.ch_attn.mu_gate[0] = 0.4;
            fp.sp_attn.lambda_gate[0] = 0.5;
        }
        net.weights().head.bias[0] = 0.5;
        const Tensor x = random_tensor({1, 1, 6, 6}, rng, 0.0, 1.0);
        const Tensor gt = random_tensor({1, 1, 6, 6}, rng, 0.0, 0.2);
        auto loss = [&] { return euclidean_loss({net.forward(x)}, {gt}).value; };
        NetworkCache cache;
        const Tensor pred = net.forward(x, &cache);
        net.zero_grad();
        net.backward(cache, euclidean_loss({pred}, {gt}).grads[0]);
        double e = 0.0;
        for (const auto& slot : net.parameters()) e = std::max(e, check_tensor_gradient(*slot.value, *slot.grad, loss));
        rows.push_back({"toy_network_loss", e, 1e-3});
    }
    return rows;
}

}  // namespace fga

#endif
