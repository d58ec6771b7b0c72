#ifndef FGA_TRAIN_HPP
#define FGA_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fga/density.hpp"
#include "fga/network.hpp"

namespace fga {

// ---------------------------------------------------------------------------
// Loss and metrics

struct LossResult {
    double value = 0.0;
    std::vector<Tensor> grads;  // dL/dpred_i
};

/// L = 1/(2N) * sum_i ||pred_i - gt_i||^2; dL/dpred_i = (pred_i - gt_i) / N.
inline LossResult euclidean_loss(const std::vector<Tensor>& pred, const std::vector<Tensor>& gt) {
    if (pred.empty()) throw std::invalid_argument("euclidean_loss: empty batch");
    if (pred.size() != gt.size()) {
        throw std::invalid_argument("euclidean_loss: " + std::to_string(pred.size()) + " predictions vs " +
                                    std::to_string(gt.size()) + " targets");
    }
    const double n = static_cast<double>(pred.size());
    LossResult r;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].shape() != gt[i].shape()) {
            throw std::invalid_argument("euclidean_loss: shape mismatch at index " + std::to_string(i) + ": " +
                                        shape_str(pred[i].shape()) + " vs " + shape_str(gt[i].shape()));
        }
        Tensor g(pred[i].shape());
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double d = pred[i][j] - gt[i][j];
            r.value += d * d;
            g[j] = d / n;
        }
        r.grads.push_back(std::move(g));
    }
    r.value /= 2.0 * n;
    return r;
}

struct CountErrors {
    double mae = 0.0;
    double rmse = 0.0;  // reported as "MSE" in the crowd-counting literature
};

inline CountErrors mae_rmse(const std::vector<double>& pred_counts, const std::vector<double>& gt_counts) {
    if (pred_counts.size() != gt_counts.size()) {
        throw std::invalid_argument("mae_rmse: " + std::to_string(pred_counts.size()) + " predictions vs " +
                                    std::to_string(gt_counts.size()) + " ground-truth counts");
    }
    if (pred_counts.empty()) throw std::invalid_argument("mae_rmse: no counts");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < pred_counts.size(); ++i) {
        const double d = gt_counts[i] - pred_counts[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double n = static_cast<double>(pred_counts.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

// ---------------------------------------------------------------------------
// Adam with decoupled weight decay

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.93;
    double beta2 = 0.99;
    double eps = 1e-8;
    double weight_decay = 1e-3;

    void validate() const {
        if (!(lr > 0.0)) throw std::invalid_argument("AdamConfig: lr must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw std::invalid_argument("AdamConfig: betas must lie in [0, 1)");
        }
        if (!(eps > 0.0)) throw std::invalid_argument("AdamConfig: eps must be positive");
        if (!(weight_decay >= 0.0)) throw std::invalid_argument("AdamConfig: weight_decay must be non-negative");
    }
};

struct AdamState {
    struct Moments {
        Tensor m;
        Tensor v;
    };
    std::map<std::string, Moments> moments;
    std::uint64_t t = 0;
};

/// One update of every slot: p <- p * (1 - lr * wd), then the bias-corrected
/// Adam step. Nothing is modified if any gradient is non-finite.
inline void adam_step(const std::vector<ParamSlot>& params, AdamState& state, const AdamConfig& cfg) {
    cfg.validate();
    for (const auto& slot : params) {
        slot.value->require_same_shape(*slot.grad, "adam_step");
        if (!slot.grad->all_finite()) throw std::runtime_error("adam_step: non-finite gradient in " + slot.name);
    }
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (const auto& slot : params) {
        auto [it, inserted] = state.moments.try_emplace(slot.name);
        if (inserted) it->second = {Tensor::zeros_like(*slot.value), Tensor::zeros_like(*slot.value)};
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        Tensor& p = *slot.value;
        const Tensor& g = *slot.grad;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            if (cfg.weight_decay != 0.0) p[i] *= decay;
            p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic crowd scenes: Gaussian background noise plus one bright radial
// blob per head.

struct SynthSceneConfig {
    std::uint64_t seed = 0;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t min_heads = 1;
    std::size_t max_heads = 20;
    double min_amplitude = 0.6;
    double max_amplitude = 1.0;
    double min_radius = 0.8;
    double max_radius = 1.6;
    double noise = 0.05;
    double margin = 1.0;  // keeps heads away from the border, in pixels

    void validate() const {
        if (height == 0 || width == 0) throw std::invalid_argument("SynthSceneConfig: empty image");
        if (min_heads > max_heads) throw std::invalid_argument("SynthSceneConfig: min_heads > max_heads");
        if (min_amplitude > max_amplitude || min_radius > max_radius || !(min_radius > 0.0)) {
            throw std::invalid_argument("SynthSceneConfig: invalid amplitude or radius range");
        }
        if (noise < 0.0) throw std::invalid_argument("SynthSceneConfig: noise must be non-negative");
        if (2.0 * margin >= static_cast<double>(std::min(height, width))) {
            throw std::invalid_argument("SynthSceneConfig: margin leaves no room for heads");
        }
    }
};

struct Scene {
    Tensor image;  // [1, 1, H, W]
    HeadAnnotations heads;
};

inline std::vector<Scene> synth_dataset(const SynthSceneConfig& cfg, std::size_t n) {
    cfg.validate();
    if (n == 0) throw std::invalid_argument("synth_dataset: n must be at least 1");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> count_dist(cfg.min_heads, cfg.max_heads);
    std::uniform_real_distribution<double> xs(cfg.margin, static_cast<double>(cfg.width) - cfg.margin);
    std::uniform_real_distribution<double> ys(cfg.margin, static_cast<double>(cfg.height) - cfg.margin);
    std::uniform_real_distribution<double> amp(cfg.min_amplitude, cfg.max_amplitude);
    std::uniform_real_distribution<double> rad(cfg.min_radius, cfg.max_radius);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Scene> scenes;
    scenes.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        Scene scene{Tensor({1, 1, cfg.height, cfg.width}), HeadAnnotations{{}, cfg.width, cfg.height}};
        for (double& v : scene.image.data()) v = cfg.noise * noise(rng);
        const std::size_t heads = count_dist(rng);
        for (std::size_t i = 0; i < heads; ++i) {
            const Point p{xs(rng), ys(rng)};
            const double a = amp(rng), r = rad(rng);
            scene.heads.points.push_back(p);
            for (std::size_t y = 0; y < cfg.height; ++y) {
                for (std::size_t x = 0; x < cfg.width; ++x) {
                    const double dx = static_cast<double>(x) + 0.5 - p.x;
                    const double dy = static_cast<double>(y) + 0.5 - p.y;
                    scene.image.at(0, 0, y, x) += a * std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
                }
            }
        }
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

struct Sample {
    Tensor image;    // [1, C, H, W]
    Tensor density;  // [1, 1, H, W]
    double count = 0.0;
};

inline std::vector<Sample> make_samples(const std::vector<Scene>& scenes, const GtConfig& gt = {}) {
    std::vector<Sample> out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) {
        const DensityMap map = generate_density_map(s.heads, gt);
        out.push_back({s.image, map.grid.reshaped({1, 1, map.height(), map.width()}),
                       static_cast<double>(s.heads.points.size())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 1;  // 0: the whole dataset is one batch
    std::uint64_t shuffle_seed = 0;
    AdamConfig adam;
};

struct EpochReport {
    std::size_t epoch = 0;
    double loss = 0.0;
};

namespace detail {

inline Tensor stack_batch(const std::vector<Sample>& data, const std::vector<std::size_t>& order, std::size_t begin,
                          std::size_t end, bool density) {
    const Tensor& first = density ? data[order[begin]].density : data[order[begin]].image;
    Shape shape = first.shape();
    shape[0] = end - begin;
    Tensor out(shape);
    auto dst = out.data().begin();
    for (std::size_t i = begin; i < end; ++i) {
        const Tensor& t = density ? data[order[i]].density : data[order[i]].image;
        if (t.size() != first.size()) throw std::invalid_argument("training batch mixes image sizes");
        dst = std::copy(t.data().begin(), t.data().end(), dst);
    }
    return out;
}

}  // namespace detail

/// Mean per-sample loss over the dataset, each sample run on its own.
inline double dataset_loss(const Network& net, const std::vector<Sample>& data) {
    if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
    double total = 0.0;
    for (const auto& s : data) total += euclidean_loss({net.forward(s.image)}, {s.density}).value;
    return total / static_cast<double>(data.size());
}

/// Returns losses indexed by epoch: entry 0 is the loss at initialization,
/// entry e the mean minibatch loss seen during epoch e.
inline std::vector<double> train(Network& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                                 const std::function<void(const EpochReport&)>& on_epoch = {}) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    cfg.adam.validate();
    std::vector<double> history{dataset_loss(net, data)};
    if (!std::isfinite(history[0])) throw std::runtime_error("train: loss is not finite at initialization");
    AdamState state;
    const auto params = net.parameters();
    std::vector<std::size_t> order(data.size());
    const std::size_t batch = cfg.batch_size == 0 ? data.size() : cfg.batch_size;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(cfg.shuffle_seed * 1000003ULL + epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += batch) {
            const std::size_t e = std::min(order.size(), b + batch);
            const Tensor x = detail::stack_batch(data, order, b, e, false);
            const Tensor y = detail::stack_batch(data, order, b, e, true);
            NetworkCache cache;
            const Tensor pred = net.forward(x, &cache);
            // The flattened minibatch is one pair, so rescale to 1/(2N).
            LossResult loss = euclidean_loss({pred.reshaped({1, pred.size()})}, {y.reshaped({1, y.size()})});
            const double n = static_cast<double>(e - b);
            loss.value /= n;
            Tensor grad = loss.grads[0].reshaped(pred.shape());
            grad *= 1.0 / n;
            if (!std::isfinite(loss.value)) {
                throw std::runtime_error("train: loss diverged in epoch " + std::to_string(epoch));
            }
            net.zero_grad();
            net.backward(cache, grad);
            adam_step(params, state, cfg.adam);
            sum += loss.value;
            ++batches;
        }
        history.push_back(sum / static_cast<double>(batches));
        if (on_epoch) on_epoch({epoch, history.back()});
    }
    return history;
}

struct EvalResult {
    std::vector<double> pred_counts;
    std::vector<double> gt_counts;
    CountErrors errors;
};

/// Count = sum of the predicted density map; each image is run on its own.
inline EvalResult evaluate(const Network& net, const std::vector<Sample>& data) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalResult r;
    for (const auto& s : data) {
        r.pred_counts.push_back(net.forward(s.image).sum());
        r.gt_counts.push_back(s.count);
    }
    r.errors = mae_rmse(r.pred_counts, r.gt_counts);
    return r;
}

}  // namespace fga

#endif
