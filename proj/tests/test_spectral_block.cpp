#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "fga/gradcheck.hpp"
#include "fga/spectral_block.hpp"

using namespace fga;

namespace {

SpectralBlockParams random_block(std::size_t c, std::mt19937_64& rng) {
    SpectralBlockParams p = SpectralBlockParams::init(c, rng);
    p.freq_conv.bias = random_tensor({2 * c}, rng, -0.3, 0.3);
    p.freq_bn.gamma = random_tensor({2 * c}, rng, 0.5, 1.5);
    p.freq_bn.beta = random_tensor({2 * c}, rng, -0.5, 0.5);
    return p;
}

Tensor delta_at(std::size_t c, std::size_t h, std::size_t w, std::size_t row, std::size_t col) {
    Tensor d({1, c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch) d.at(0, ch, row, col) = 1.0;
    return d;
}

std::size_t chebyshev(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    const auto dy = static_cast<long>(a) - static_cast<long>(c), dx = static_cast<long>(b) - static_cast<long>(d);
    return static_cast<std::size_t>(std::max(std::labs(dy), std::labs(dx)));
}

}  // namespace

TEST(SpectralBlock, ZeroInputGivesZeroOutput) {
    std::mt19937_64 rng(1);
    const SpectralBlockParams p = SpectralBlockParams::init(3, rng);
    const Tensor out = spectral_block(Tensor({1, 3, 4, 6}), p);
    EXPECT_EQ(out, Tensor({1, 3, 4, 6}));
}

TEST(SpectralBlock, PreservesShapeAcrossGrid) {
    std::mt19937_64 rng(2);
    for (std::size_t c : {1u, 2u, 5u})
        for (std::size_t h : {2u, 3u, 8u})
            for (std::size_t w : {2u, 5u, 8u}) {
                const SpectralBlockParams p = random_block(c, rng);
                const Tensor x = random_tensor({2, c, h, w}, rng);
                const Tensor out = spectral_block(x, p);
                EXPECT_EQ(out.shape(), x.shape());
                EXPECT_TRUE(out.all_finite());
            }
}

TEST(SpectralBlock, StageLockedWithIdentityConvAndInjectedStats) {
    // Identity 1x1 conv plus stats that make BN the identity leaves
    // irfft2d(relu(rfft2d(x))) applied separately to the real and imaginary parts.
    std::mt19937_64 rng(3);
    const std::size_t c = 2;
    SpectralBlockParams p = SpectralBlockParams::zeros(c);
    for (std::size_t i = 0; i < 2 * c; ++i) p.freq_conv.weight.at(i, i, 0, 0) = 1.0;
    p.freq_bn = BatchNormParams::identity(2 * c);
    const BatchStats stats{std::vector<double>(2 * c, 0.0), std::vector<double>(2 * c, 1.0 - kBatchNormEps)};

    const Tensor x = random_tensor({1, c, 4, 6}, rng);
    ComplexSpectrum s = rfft2d(x);
    s.re = relu(s.re);
    s.im = relu(s.im);
    EXPECT_LT(max_abs_diff(spectral_block(x, p, nullptr, &stats), irfft2d(s)), 1e-13);
}

TEST(SpectralBlock, RejectsChannelMismatch) {
    std::mt19937_64 rng(4);
    const SpectralBlockParams p = SpectralBlockParams::init(2, rng);
    EXPECT_THROW(spectral_block(Tensor({1, 3, 4, 4}), p), std::invalid_argument);
}

TEST(SpectralBlock, GradientsPassFiniteDifferences) {
    for (const auto& row : run_gradient_suite(31)) {
        if (row.op == "spectral_block" || row.op == "rfft2d/irfft2d") {
            EXPECT_TRUE(row.passed()) << row.op << " rel err " << row.max_rel_error;
        }
    }
}

TEST(ReceptiveField, DeltaOnGenericBackgroundReachesEveryPixel) {
    std::mt19937_64 rng(5);
    for (std::size_t size : {8u, 16u}) {
        const SpectralBlockParams p = random_block(2, rng);
        const Tensor background = random_tensor({1, 2, size, size}, rng);
        const Tensor infl = receptive_field_probe(delta_at(2, size, size, 3, 5), p, &background);
        EXPECT_GT(fraction_above(infl, 1e-9), 0.95) << size;
    }
}

TEST(ReceptiveField, ZeroPerturbationGivesZeroInfluence) {
    std::mt19937_64 rng(9);
    const SpectralBlockParams p = random_block(2, rng);
    const Tensor background = random_tensor({1, 2, 8, 8}, rng);
    EXPECT_EQ(receptive_field_probe(Tensor({1, 2, 8, 8}), p, &background), Tensor({1, 2, 8, 8}));
    EXPECT_EQ(receptive_field_probe(Tensor({1, 2, 8, 8}), p), Tensor({1, 2, 8, 8}));
}

TEST(ReceptiveField, ZeroBackgroundDeltaInRowZeroStaysInRowZero) {
    // Its spectrum is constant along u and every stage keeps it so.
    std::mt19937_64 rng(6);
    const SpectralBlockParams p = random_block(1, rng);
    const Tensor infl = receptive_field_probe(delta_at(1, 8, 8, 0, 2), p);
    std::size_t hits = 0;
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            if (y > 0) {
                EXPECT_LT(infl.at(0, 0, y, x), 1e-12) << y << "," << x;
            }
            hits += infl.at(0, 0, y, x) > 1e-9;
        }
    EXPECT_GT(hits, 0u);
    EXPECT_LT(fraction_above(infl, 1e-9), 0.9);
}

TEST(ReceptiveField, SingleImageBatchIgnoresAConstantShiftOfTheOriginPixel) {
    // A delta at the origin adds the same value to every frequency bin, which
    // the frequency-domain batch-norm subtracts again when N = 1.
    std::mt19937_64 rng(7);
    const SpectralBlockParams p = random_block(2, rng);
    const Tensor background = random_tensor({1, 2, 8, 8}, rng);
    const Tensor infl = receptive_field_probe(delta_at(2, 8, 8, 0, 0), p, &background);
    EXPECT_LT(infl.max_abs(), 1e-10);
}

TEST(ReceptiveField, ConvStackSupportStaysInsideItsRadius) {
    std::mt19937_64 rng(8);
    const std::size_t size = 12, row = 5, col = 6;
    for (std::size_t depth : {1u, 2u, 3u}) {
        std::vector<ConvParams> stack;
        for (std::size_t i = 0; i < depth; ++i) stack.push_back(ConvParams::init(2, 2, 3, rng));
        const auto apply = [&](const Tensor& x) {
            Tensor h = x;
            for (const auto& c : stack) h = conv2d(h, c.weight, c.bias);
            return h;
        };
        const Tensor background = random_tensor({1, 2, size, size}, rng);
        const Tensor infl = influence_map(delta_at(2, size, size, row, col), apply, &background);
        std::size_t inside = 0;
        for (std::size_t ch = 0; ch < 2; ++ch)
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x) {
                    const bool hit = infl.at(0, ch, y, x) > 1e-9;
                    if (chebyshev(y, x, row, col) > depth) {
                        EXPECT_FALSE(hit) << depth << ": " << y << "," << x;
                    }
                    inside += hit;
                }
        EXPECT_GT(inside, 0u);
    }
}
