#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fga/fft.hpp"
#include "fga/gradcheck.hpp"

using namespace fga;
using cd = std::complex<double>;

namespace {

std::vector<cd> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<cd> out(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t t = 0; t < n; ++t)
            out[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / n);
    return out;
}

Tensor plane_6x8() {
    Tensor x({1, 1, 6, 8});
    for (std::size_t h = 0; h < 6; ++h)
        for (std::size_t w = 0; w < 8; ++w)
            x.at(0, 0, h, w) = std::sin(0.3 * h + 0.7 * w) + 0.1 * h * w - 0.05 * w;
    return x;
}

// Circular 2-D convolution by direct summation.
Tensor circular_conv(const Tensor& a, const Tensor& b) {
    const std::size_t h = a.dim(2), w = a.dim(3);
    Tensor out(a.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    out.at(0, 0, y, x) += a.at(0, 0, i, j) * b.at(0, 0, (y + h - i) % h, (x + w - j) % w);
    return out;
}

}  // namespace

TEST(Fft1d, DcAndDelta) {
    auto [re, im] = fft1d(std::vector<double>(8, 1.0), std::vector<double>(8, 0.0), false);
    EXPECT_DOUBLE_EQ(re[0], 8.0);
    for (std::size_t k = 1; k < 8; ++k) EXPECT_NEAR(std::hypot(re[k], im[k]), 0.0, 1e-14);

    std::vector<double> delta(6, 0.0);
    delta[0] = 1.0;
    auto [dre, dim] = fft1d(delta, std::vector<double>(6, 0.0), false);
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_NEAR(dre[k], 1.0, 1e-15);
        EXPECT_NEAR(dim[k], 0.0, 1e-15);
    }
}

TEST(Fft1d, MatchesNaiveDftRadix2AndDirect) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t n : {16u, 12u, 7u, 1u}) {
        std::vector<double> x(n);
        for (double& v : x) v = u(rng);
        const auto ref = naive_dft(x);
        auto [re, im] = fft1d(x, std::vector<double>(n, 0.0), false);
        for (std::size_t k = 0; k < n; ++k) {
            EXPECT_NEAR(re[k], ref[k].real(), 1e-12) << "n=" << n << " k=" << k;
            EXPECT_NEAR(im[k], ref[k].imag(), 1e-12) << "n=" << n << " k=" << k;
        }
    }
}

TEST(Fft1d, FrozenLength12Values) {
    std::vector<double> x(12);
    for (std::size_t t = 0; t < 12; ++t) x[t] = std::cos(0.9 * t) + 0.2 * t;
    auto [re, im] = fft1d(x, std::vector<double>(12, 0.0), false);
    EXPECT_NEAR(re[1], -2.1747360685396657, 1e-12);
    EXPECT_NEAR(im[1], 5.7000797100848235, 1e-12);
    EXPECT_NEAR(re[5], -0.34457493812147566, 1e-12);
    EXPECT_NEAR(im[5], 0.12082958139588668, 1e-12);
    EXPECT_NEAR(re[6], -0.3659119392821082, 1e-12);
    EXPECT_NEAR(im[6], 0.0, 1e-12);
}

TEST(Fft1d, InverseScalesByOneOverN) {
    std::vector<double> re{1.0, 2.0, -3.0, 0.5, 4.0, -1.0}, im{0.0, 1.0, 0.0, -2.0, 0.0, 0.5};
    auto [fr, fi] = fft1d(re, im, false);
    auto [br, bi] = fft1d(fr, fi, true);
    for (std::size_t i = 0; i < re.size(); ++i) {
        EXPECT_NEAR(br[i], re[i], 1e-14);
        EXPECT_NEAR(bi[i], im[i], 1e-14);
    }
}

TEST(Fft1d, RejectsBadInput) {
    EXPECT_THROW(fft1d({1.0, 2.0}, {0.0}, false), std::invalid_argument);
    EXPECT_THROW(fft1d({}, {}, false), std::invalid_argument);
}

TEST(Rfft2d, HalfWidth) {
    EXPECT_EQ(half_width(8), 5u);
    EXPECT_EQ(half_width(7), 4u);
    EXPECT_EQ(half_width(1), 1u);
    const ComplexSpectrum s = rfft2d(Tensor({2, 3, 4, 6}));
    EXPECT_EQ(s.re.shape(), (Shape{2, 3, 4, 4}));
    EXPECT_EQ(s.orig_width, 6u);
}

TEST(Rfft2d, FrozenFullSpectrumValues6x8) {
    const ComplexSpectrum s = rfft2d(plane_6x8());
    struct Bin {
        std::size_t u, v;
        double re, im;
    };
    const Bin bins[] = {{0, 0, 33.30107181043769, 0.0},
                        {1, 2, -1.4930480889029567, -3.1793109793196725},
                        {5, 4, 1.0804226960813093, 2.18838619240519},
                        {3, 1, -1.4122537270080717, -4.187895268719539},
                        {2, 3, 0.8573658111891275, -1.259730726838143}};
    for (const auto& b : bins) {
        EXPECT_NEAR(s.re.at(0, 0, b.u, b.v), b.re, 1e-12) << b.u << "," << b.v;
        EXPECT_NEAR(s.im.at(0, 0, b.u, b.v), b.im, 1e-12) << b.u << "," << b.v;
    }
}

TEST(Rfft2d, RoundTripOddAndEvenWidths) {
    std::mt19937_64 rng(6);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {5, 7}, {6, 8}, {3, 1}, {1, 5}}) {
        const Tensor x = random_tensor({2, 2, h, w}, rng);
        EXPECT_LT(max_abs_diff(irfft2d(rfft2d(x)), x), 1e-13) << h << "x" << w;
    }
}

TEST(Rfft2d, Parseval) {
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor({1, 1, 6, 8}, rng);
    const ComplexSpectrum s = rfft2d(x);
    double spec = 0.0;
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t v = 0; v < 5; ++v) {
            const double m = (v == 0 || v == 4) ? 1.0 : 2.0;
            spec += m * (std::pow(s.re.at(0, 0, u, v), 2) + std::pow(s.im.at(0, 0, u, v), 2));
        }
    EXPECT_NEAR(spec / 48.0, dot(x, x), 1e-12 * dot(x, x));
}

TEST(Rfft2d, Linearity) {
    std::mt19937_64 rng(8);
    const Tensor a = random_tensor({1, 1, 5, 6}, rng), b = random_tensor({1, 1, 5, 6}, rng);
    const ComplexSpectrum sa = rfft2d(a), sb = rfft2d(b), sab = rfft2d(3.0 * a + b);
    EXPECT_LT(max_abs_diff(sab.re, 3.0 * sa.re + sb.re), 1e-12);
    EXPECT_LT(max_abs_diff(sab.im, 3.0 * sa.im + sb.im), 1e-12);
}

TEST(Rfft2d, ConvolutionTheorem) {
    std::mt19937_64 rng(9);
    const Tensor a = random_tensor({1, 1, 4, 6}, rng), b = random_tensor({1, 1, 4, 6}, rng);
    const ComplexSpectrum sa = rfft2d(a), sb = rfft2d(b);
    ComplexSpectrum prod{Tensor(sa.re.shape()), Tensor(sa.re.shape()), 6};
    for (std::size_t i = 0; i < sa.re.size(); ++i) {
        const cd z = cd(sa.re[i], sa.im[i]) * cd(sb.re[i], sb.im[i]);
        prod.re[i] = z.real();
        prod.im[i] = z.imag();
    }
    EXPECT_LT(max_abs_diff(irfft2d(prod), circular_conv(a, b)), 1e-12);
}

TEST(Irfft2d, DcOnlySpectrumIsConstant) {
    ComplexSpectrum s{Tensor({1, 1, 4, 5}), Tensor({1, 1, 4, 5}), 8};
    s.re.at(0, 0, 0, 0) = 64.0;
    const Tensor x = irfft2d(s);
    for (double v : x.data()) EXPECT_NEAR(v, 2.0, 1e-15);
}

TEST(Irfft2d, RejectsInconsistentWidth) {
    const ComplexSpectrum s{Tensor({1, 1, 4, 5}), Tensor({1, 1, 4, 5}), 7};
    EXPECT_THROW(irfft2d(s), std::invalid_argument);
}

TEST(FftBackward, AdjointIdentities) {
    // <rfft2d(x), g> == <x, rfft2d_backward(g)> and likewise for irfft2d.
    std::mt19937_64 rng(10);
    for (std::size_t w : {5u, 6u}) {
        const Tensor x = random_tensor({1, 2, 4, w}, rng);
        const std::size_t wf = half_width(w);
        const ComplexSpectrum g{random_tensor({1, 2, 4, wf}, rng), random_tensor({1, 2, 4, wf}, rng), w};
        const ComplexSpectrum fx = rfft2d(x);
        EXPECT_NEAR(dot(fx.re, g.re) + dot(fx.im, g.im), dot(x, rfft2d_backward(g)), 1e-11);
        const Tensor y = random_tensor({1, 2, 4, w}, rng);
        const ComplexSpectrum gi = irfft2d_backward(y);
        EXPECT_NEAR(dot(irfft2d(g), y), dot(g.re, gi.re) + dot(g.im, gi.im), 1e-11);
    }
}
