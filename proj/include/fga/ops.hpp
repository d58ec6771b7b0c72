#ifndef FGA_OPS_HPP
#define FGA_OPS_HPP

// Differentiable primitives over [N, C, H, W] and [R, K] tensors. Every forward
// op has a matching *_backward that maps the upstream gradient to gradients of
// its inputs. Backward passes are composed by hand; there is no tape.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fga/tensor.hpp"

namespace fga {

// ---------------------------------------------------------------------------
// conv2d: stride 1, zero padding, cross-correlation (no kernel flip).

struct Conv2dGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

namespace detail {

inline void check_conv_shapes(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    input.require_rank(4, "conv2d input");
    weight.require_rank(4, "conv2d weight");
    if (input.dim(1) != weight.dim(1)) {
        throw std::invalid_argument("conv2d: input " + shape_str(input.shape()) + " has " +
                                    std::to_string(input.dim(1)) + " channels but weight " +
                                    shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
    }
    if (weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0) {
        throw std::invalid_argument("conv2d: kernel must be square with odd size, got " + shape_str(weight.shape()));
    }
    if (bias.shape() != Shape{weight.dim(0)}) {
        throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                                    shape_str(weight.shape()));
    }
}

}  // namespace detail

/// Same-size convolution; padding is always kernel/2.
inline Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    detail::check_conv_shapes(input, weight, bias);
    const std::size_t n_batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    const long pad = static_cast<long>(k / 2);
    Tensor out({n_batch, cout, h, w});
    const double* in = input.data().data();
    const double* wt = weight.data().data();
    double* o = out.data().data();
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t oc = 0; oc < cout; ++oc) {
            double* oplane = o + (n * cout + oc) * h * w;
            std::fill(oplane, oplane + h * w, bias[oc]);
            for (std::size_t ic = 0; ic < cin; ++ic) {
                const double* iplane = in + (n * cin + ic) * h * w;
                const double* kern = wt + (oc * cin + ic) * k * k;
                for (std::size_t ki = 0; ki < k; ++ki) {
                    const long dy = static_cast<long>(ki) - pad;
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    for (std::size_t kj = 0; kj < k; ++kj) {
                        const long dx = static_cast<long>(kj) - pad;
                        const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                        const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                        const double kv = kern[ki * k + kj];
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* irow = iplane + (y + dy) * w + dx;
                            double* orow = oplane + y * w;
                            for (std::size_t x = x0; x < x1; ++x) orow[x] += kv * irow[x];
                        }
                    }
                }
            }
        }
    }
    return out;
}

inline Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    const std::size_t n_batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    if (grad_out.shape() != Shape{n_batch, cout, h, w}) {
        throw std::invalid_argument("conv2d_backward: grad " + shape_str(grad_out.shape()) + " does not match output");
    }
    const long pad = static_cast<long>(k / 2);
    Conv2dGrads g{Tensor::zeros_like(input), Tensor::zeros_like(weight), Tensor({cout})};
    const double* in = input.data().data();
    const double* wt = weight.data().data();
    const double* go = grad_out.data().data();
    double* gi = g.input.data().data();
    double* gw = g.weight.data().data();
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t oc = 0; oc < cout; ++oc) {
            const double* gplane = go + (n * cout + oc) * h * w;
            double bsum = 0.0;
            for (std::size_t i = 0; i < h * w; ++i) bsum += gplane[i];
            g.bias[oc] += bsum;
            for (std::size_t ic = 0; ic < cin; ++ic) {
                const double* iplane = in + (n * cin + ic) * h * w;
                double* giplane = gi + (n * cin + ic) * h * w;
                const double* kern = wt + (oc * cin + ic) * k * k;
                double* gkern = gw + (oc * cin + ic) * k * k;
                for (std::size_t ki = 0; ki < k; ++ki) {
                    const long dy = static_cast<long>(ki) - pad;
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    for (std::size_t kj = 0; kj < k; ++kj) {
                        const long dx = static_cast<long>(kj) - pad;
                        const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                        const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                        const double kv = kern[ki * k + kj];
                        double acc = 0.0;
                        for (std::size_t y = y0; y < y1; ++y) {
                            const double* irow = iplane + (y + dy) * w + dx;
                            double* girow = giplane + (y + dy) * w + dx;
                            const double* grow = gplane + y * w;
                            for (std::size_t x = x0; x < x1; ++x) {
                                acc += grow[x] * irow[x];
                                girow[x] += kv * grow[x];
                            }
                        }
                        gkern[ki * k + kj] += acc;
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// batchnorm2d in training mode: per-channel statistics over N, H, W with the
// biased variance.

inline constexpr double kBatchNormEps = 1e-5;

struct BatchStats {
    std::vector<double> mean;
    std::vector<double> var;
};

struct BatchNormCache {
    Tensor normalized;            // x_hat
    std::vector<double> inv_std;  // 1 / sqrt(var + eps) per channel
    bool fixed_stats = false;
};

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

/// If `stats` is given the normalization uses it instead of the batch
/// statistics and the backward pass treats it as constant.
inline Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps = kBatchNormEps,
                          BatchNormCache* cache = nullptr, const BatchStats* stats = nullptr) {
    input.require_rank(4, "batchnorm2d");
    const std::size_t n_batch = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
        throw std::invalid_argument("batchnorm2d: gamma/beta must be [" + std::to_string(c) + "], got " +
                                    shape_str(gamma.shape()) + " / " + shape_str(beta.shape()));
    }
    if (!(eps > 0.0)) throw std::invalid_argument("batchnorm2d: eps must be positive");
    const std::size_t count = n_batch * hw;
    if (!stats && count < 2) {
        throw std::invalid_argument("batchnorm2d: need at least 2 elements per channel, input is " +
                                    shape_str(input.shape()));
    }
    if (stats && (stats->mean.size() != c || stats->var.size() != c)) {
        throw std::invalid_argument("batchnorm2d: injected statistics do not match channel count");
    }
    Tensor out(input.shape());
    Tensor xhat(input.shape());
    std::vector<double> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0, var = 0.0;
        if (stats) {
            mean = stats->mean[ch];
            var = stats->var[ch];
        } else {
            for (std::size_t n = 0; n < n_batch; ++n) {
                const double* p = input.data().data() + (n * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) mean += p[i];
            }
            mean /= static_cast<double>(count);
            for (std::size_t n = 0; n < n_batch; ++n) {
                const double* p = input.data().data() + (n * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
            }
            var /= static_cast<double>(count);
        }
        inv_std[ch] = 1.0 / std::sqrt(var + eps);
        for (std::size_t n = 0; n < n_batch; ++n) {
            const std::size_t off = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const double xh = (input[off + i] - mean) * inv_std[ch];
                xhat[off + i] = xh;
                out[off + i] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    if (cache) {
        cache->normalized = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->fixed_stats = stats != nullptr;
    }
    return out;
}

inline BatchNormGrads batchnorm2d_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& grad_out) {
    const Tensor& xhat = cache.normalized;
    xhat.require_same_shape(grad_out, "batchnorm2d_backward");
    const std::size_t n_batch = xhat.dim(0), c = xhat.dim(1), hw = xhat.dim(2) * xhat.dim(3);
    const double count = static_cast<double>(n_batch * hw);
    BatchNormGrads g{Tensor(xhat.shape()), Tensor({c}), Tensor({c})};
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t n = 0; n < n_batch; ++n) {
            const std::size_t off = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                sum_g += grad_out[off + i];
                sum_gx += grad_out[off + i] * xhat[off + i];
            }
        }
        g.beta[ch] = sum_g;
        g.gamma[ch] = sum_gx;
        const double scale = gamma[ch] * cache.inv_std[ch];
        for (std::size_t n = 0; n < n_batch; ++n) {
            const std::size_t off = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                if (cache.fixed_stats) {
                    g.input[off + i] = scale * grad_out[off + i];
                } else {
                    g.input[off + i] =
                        scale * (grad_out[off + i] - sum_g / count - xhat[off + i] * (sum_gx / count));
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Elementwise ReLU. The subgradient at exactly 0 is 0.

inline Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

inline Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    input.require_same_shape(grad_out, "relu_backward");
    Tensor g(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return g;
}

// ---------------------------------------------------------------------------
// Row softmax over a [R, K] matrix, max-subtracted.

inline Tensor softmax_rows(const Tensor& input) {
    input.require_rank(2, "softmax_rows");
    const std::size_t rows = input.dim(0), cols = input.dim(1);
    Tensor out(input.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = input.data().data() + r * cols;
        double* o = out.data().data() + r * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, in[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            s += o[j];
        }
        const double inv = 1.0 / s;
        for (std::size_t j = 0; j < cols; ++j) o[j] *= inv;
    }
    return out;
}

/// Takes the softmax *output*.
inline Tensor softmax_rows_backward(const Tensor& output, const Tensor& grad_out) {
    output.require_same_shape(grad_out, "softmax_rows_backward");
    const std::size_t rows = output.dim(0), cols = output.dim(1);
    Tensor g(output.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* y = output.data().data() + r * cols;
        const double* gy = grad_out.data().data() + r * cols;
        double inner = 0.0;
        for (std::size_t j = 0; j < cols; ++j) inner += y[j] * gy[j];
        double* gx = g.data().data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) gx[j] = y[j] * (gy[j] - inner);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Dense matrix algebra.

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    a.require_rank(2, "matmul lhs");
    b.require_rank(2, "matmul rhs");
    if (a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), kk = a.dim(1), p = b.dim(1);
    Tensor out({m, p});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = po + i * p;
        for (std::size_t k = 0; k < kk; ++k) {
            const double av = pa[i * kk + k];
            const double* brow = pb + k * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

/// General axis permutation. `axes[i]` names the input axis that becomes output axis i.
inline Tensor transpose(const Tensor& t, const std::vector<std::size_t>& axes) {
    const std::size_t r = t.rank();
    if (axes.size() != r) throw std::invalid_argument("transpose: axes do not match rank of " + shape_str(t.shape()));
    std::vector<bool> seen(r, false);
    for (std::size_t a : axes) {
        if (a >= r || seen[a]) throw std::invalid_argument("transpose: axes are not a permutation");
        seen[a] = true;
    }
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = t.dim(axes[i]);
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * t.dim(i);
    Tensor out(out_shape);
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_stride[axes[i]];
        out[flat] = t[src];
        for (std::size_t i = r; i-- > 0;) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& t) {
    t.require_rank(2, "transpose");
    const std::size_t rows = t.dim(0), cols = t.dim(1);
    Tensor out({cols, rows});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = t[i * cols + j];
    return out;
}

inline Tensor reshape(const Tensor& t, Shape shape) { return t.reshaped(std::move(shape)); }

struct MatmulGrads {
    Tensor a;
    Tensor b;
};

/// dL/da = up * b^T, dL/db = a^T * up.
inline MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out) {
    return {matmul(grad_out, transpose(b)), matmul(transpose(a), grad_out)};
}

// ---------------------------------------------------------------------------
// Channel slicing for the [N, C, H, W] layout.

inline Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
    x.require_rank(4, "slice_channels");
    if (count == 0 || begin + count > x.dim(1)) {
        throw std::invalid_argument("slice_channels: range [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
    }
    const std::size_t n_batch = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor out({n_batch, count, x.dim(2), x.dim(3)});
    for (std::size_t n = 0; n < n_batch; ++n) {
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>((n * c + begin) * hw), count * hw,
                    out.data().begin() + static_cast<std::ptrdiff_t>(n * count * hw));
    }
    return out;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    a.require_rank(4, "concat_channels");
    b.require_rank(4, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
        throw std::invalid_argument("concat_channels: incompatible " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    }
    const std::size_t n_batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    Tensor out({n_batch, ca + cb, a.dim(2), a.dim(3)});
    for (std::size_t n = 0; n < n_batch; ++n) {
        auto dst = out.data().begin() + static_cast<std::ptrdiff_t>(n * (ca + cb) * hw);
        dst = std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(n * ca * hw), ca * hw, dst);
        std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(n * cb * hw), cb * hw, dst);
    }
    return out;
}

}  // namespace fga

#endif
