#ifndef FGA_FFT_HPP
#define FGA_FFT_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fga/tensor.hpp"

namespace fga {

/// Half-spectrum of a real [N, C, H, W] tensor: last axis holds W/2 + 1 bins.
struct ComplexSpectrum {
    Tensor re;
    Tensor im;
    std::size_t orig_width = 0;
};

inline std::size_t half_width(std::size_t width) { return width / 2 + 1; }

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

// In place. Power-of-two lengths only.
inline void fft_radix2(std::vector<double>& re, std::vector<double>& im, bool inverse) {
    const std::size_t n = re.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            // Twiddles are evaluated directly rather than by recurrence to keep
            // the round-off at O(eps log n).
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const double wr = std::cos(ang), wi = std::sin(ang);
            for (std::size_t start = 0; start < n; start += len) {
                const std::size_t a = start + k, b = a + half;
                const double tr = re[b] * wr - im[b] * wi;
                const double ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
    }
}

inline void dft_direct(std::vector<double>& re, std::vector<double>& im, bool inverse) {
    const std::size_t n = re.size();
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<double> cs(n), sn(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n);
        cs[t] = std::cos(ang);
        sn[t] = std::sin(ang);
    }
    std::vector<double> out_re(n, 0.0), out_im(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double sr = 0.0, si = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t t = (k * j) % n;
            sr += re[j] * cs[t] - im[j] * sn[t];
            si += re[j] * sn[t] + im[j] * cs[t];
        }
        out_re[k] = sr;
        out_im[k] = si;
    }
    re = std::move(out_re);
    im = std::move(out_im);
}

inline void transform_inplace(std::vector<double>& re, std::vector<double>& im, bool inverse) {
    if (is_power_of_two(re.size())) {
        fft_radix2(re, im, inverse);
    } else {
        dft_direct(re, im, inverse);
    }
    if (inverse) {
        const double s = 1.0 / static_cast<double>(re.size());
        for (std::size_t i = 0; i < re.size(); ++i) {
            re[i] *= s;
            im[i] *= s;
        }
    }
}

}  // namespace detail

/// DFT (inverse = false) or IDFT with 1/n scaling (inverse = true).
/// Radix-2 Cooley-Tukey for power-of-two lengths, direct O(n^2) sum otherwise.
inline std::pair<std::vector<double>, std::vector<double>> fft1d(std::vector<double> re, std::vector<double> im,
                                                                 bool inverse) {
    if (re.size() != im.size()) {
        throw std::invalid_argument("fft1d: real length " + std::to_string(re.size()) + " != imaginary length " +
                                    std::to_string(im.size()));
    }
    if (re.empty()) throw std::invalid_argument("fft1d: empty input");
    detail::transform_inplace(re, im, inverse);
    return {std::move(re), std::move(im)};
}

/// Unscaled forward 2-D DFT of every (n, c) plane, truncated to W/2 + 1 columns.
inline ComplexSpectrum rfft2d(const Tensor& x) {
    x.require_rank(4, "rfft2d");
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3), wf = half_width(w);
    ComplexSpectrum s{Tensor({x.dim(0), x.dim(1), h, wf}), Tensor({x.dim(0), x.dim(1), h, wf}), w};
    std::vector<double> row_re(w), row_im(w), col_re(h), col_im(h);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = x.data().data() + p * h * w;
        double* dre = s.re.data().data() + p * h * wf;
        double* dim = s.im.data().data() + p * h * wf;
        for (std::size_t y = 0; y < h; ++y) {
            std::copy_n(src + y * w, w, row_re.begin());
            std::fill(row_im.begin(), row_im.end(), 0.0);
            detail::transform_inplace(row_re, row_im, false);
            std::copy_n(row_re.begin(), wf, dre + y * wf);
            std::copy_n(row_im.begin(), wf, dim + y * wf);
        }
        for (std::size_t v = 0; v < wf; ++v) {
            for (std::size_t y = 0; y < h; ++y) {
                col_re[y] = dre[y * wf + v];
                col_im[y] = dim[y * wf + v];
            }
            detail::transform_inplace(col_re, col_im, false);
            for (std::size_t u = 0; u < h; ++u) {
                dre[u * wf + v] = col_re[u];
                dim[u * wf + v] = col_im[u];
            }
        }
    }
    return s;
}

/// Inverse of rfft2d with 1/(HW) scaling. Missing columns are taken as the
/// conjugates of the stored ones; imaginary residue on self-conjugate columns
/// is dropped.
inline Tensor irfft2d(const ComplexSpectrum& s) {
    s.re.require_rank(4, "irfft2d");
    s.re.require_same_shape(s.im, "irfft2d");
    const std::size_t h = s.re.dim(2), wf = s.re.dim(3), w = s.orig_width;
    if (w == 0 || half_width(w) != wf) {
        throw std::invalid_argument("irfft2d: width " + std::to_string(w) + " is inconsistent with " +
                                    std::to_string(wf) + " stored bins");
    }
    const std::size_t planes = s.re.dim(0) * s.re.dim(1);
    Tensor out({s.re.dim(0), s.re.dim(1), h, w});
    std::vector<double> tre(h * wf), tim(h * wf), col_re(h), col_im(h), row_re(w), row_im(w);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* sre = s.re.data().data() + p * h * wf;
        const double* sim = s.im.data().data() + p * h * wf;
        for (std::size_t v = 0; v < wf; ++v) {
            for (std::size_t u = 0; u < h; ++u) {
                col_re[u] = sre[u * wf + v];
                col_im[u] = sim[u * wf + v];
            }
            detail::transform_inplace(col_re, col_im, true);
            for (std::size_t y = 0; y < h; ++y) {
                tre[y * wf + v] = col_re[y];
                tim[y * wf + v] = col_im[y];
            }
        }
        double* dst = out.data().data() + p * h * w;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t v = 0; v < w; ++v) {
                if (v < wf) {
                    row_re[v] = tre[y * wf + v];
                    row_im[v] = tim[y * wf + v];
                } else {
                    row_re[v] = tre[y * wf + (w - v)];
                    row_im[v] = -tim[y * wf + (w - v)];
                }
            }
            detail::transform_inplace(row_re, row_im, true);
            std::copy_n(row_re.begin(), w, dst + y * w);
        }
    }
    return out;
}

namespace detail {

// Multiplicity of a stored column in the full spectrum: 1 for the DC column
// and (even W) the Nyquist column, 2 for the rest.
inline double column_multiplicity(std::size_t v, std::size_t w) {
    if (v == 0) return 1.0;
    if (w % 2 == 0 && v == w / 2) return 1.0;
    return 2.0;
}

}  // namespace detail

/// Adjoint of rfft2d: maps dL/d(re, im) of the half-spectrum to dL/dx.
inline Tensor rfft2d_backward(const ComplexSpectrum& grad) {
    const std::size_t h = grad.re.dim(2), wf = grad.re.dim(3), w = grad.orig_width;
    const double hw = static_cast<double>(h * w);
    ComplexSpectrum scaled = grad;
    const std::size_t rows = scaled.re.size() / wf;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t v = 0; v < wf; ++v) {
            const double f = hw / detail::column_multiplicity(v, w);
            scaled.re[r * wf + v] *= f;
            scaled.im[r * wf + v] *= f;
        }
    }
    return irfft2d(scaled);
}

/// Adjoint of irfft2d: maps dL/dx to dL/d(re, im) of the half-spectrum.
inline ComplexSpectrum irfft2d_backward(const Tensor& grad) {
    ComplexSpectrum g = rfft2d(grad);
    const std::size_t h = grad.dim(2), w = grad.dim(3), wf = half_width(w);
    const double hw = static_cast<double>(h * w);
    const std::size_t rows = g.re.size() / wf;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t v = 0; v < wf; ++v) {
            const double f = detail::column_multiplicity(v, w) / hw;
            g.re[r * wf + v] *= f;
            g.im[r * wf + v] *= f;
        }
    }
    return g;
}

}  // namespace fga

#endif
