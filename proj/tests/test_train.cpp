#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fga/gradcheck.hpp"
#include "fga/train.hpp"

using namespace fga;

namespace {

std::vector<Sample> tiny_dataset(std::uint64_t seed, std::size_t n) {
    SynthSceneConfig cfg;
    cfg.seed = seed;
    cfg.height = cfg.width = 8;
    cfg.max_heads = 4;
    return make_samples(synth_dataset(cfg, n));
}

}  // namespace

TEST(EuclideanLoss, HandValues) {
    const std::vector<Tensor> pred{Tensor({2}, std::vector<double>{1.0, 2.0}), Tensor({1}, 3.0)};
    const std::vector<Tensor> gt{Tensor({2}), Tensor({1}, 1.0)};
    const LossResult r = euclidean_loss(pred, gt);
    EXPECT_DOUBLE_EQ(r.value, (5.0 + 4.0) / 4.0);
    EXPECT_DOUBLE_EQ(r.grads[0][0], 0.5);
    EXPECT_DOUBLE_EQ(r.grads[0][1], 1.0);
    EXPECT_DOUBLE_EQ(r.grads[1][0], 1.0);
}

TEST(EuclideanLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(1);
    std::vector<Tensor> pred{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    const std::vector<Tensor> gt{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    const LossResult r = euclidean_loss(pred, gt);
    for (std::size_t i = 0; i < 2; ++i) {
        const double e = check_tensor_gradient(pred[i], r.grads[i], [&] { return euclidean_loss(pred, gt).value; });
        EXPECT_LT(e, 1e-7);
    }
}

TEST(EuclideanLoss, RejectsMismatch) {
    EXPECT_THROW(euclidean_loss({Tensor({2})}, {Tensor({3})}), std::invalid_argument);
    EXPECT_THROW(euclidean_loss({Tensor({2})}, {}), std::invalid_argument);
    EXPECT_THROW(euclidean_loss({}, {}), std::invalid_argument);
}

TEST(Metrics, MaeAndRootMeanSquare) {
    const CountErrors e = mae_rmse({0.0, 4.0}, {2.0, 0.0});
    EXPECT_DOUBLE_EQ(e.mae, 3.0);
    EXPECT_DOUBLE_EQ(e.rmse, std::sqrt(10.0));
    const CountErrors single = mae_rmse({5.0}, {5.0 - std::sqrt(8.0)});
    EXPECT_NEAR(single.rmse, std::sqrt(8.0), 1e-15);
    EXPECT_THROW(mae_rmse({1.0}, {}), std::invalid_argument);
}

TEST(Adam, FirstStepHandTrace) {
    Tensor p({1}, 1.0), g({1}, 1.0);
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    AdamState state;
    adam_step({{"p", &p, &g}}, state, cfg);
    // m_hat = v_hat = 1 after bias correction.
    EXPECT_NEAR(p[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-12);
    EXPECT_EQ(state.t, 1u);
}

TEST(Adam, SecondStepHandTrace) {
    Tensor p({1}, 1.0), g({1}, 1.0);
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    AdamState state;
    adam_step({{"p", &p, &g}}, state, cfg);
    g[0] = -2.0;
    adam_step({{"p", &p, &g}}, state, cfg);
    const double m = 0.93 * 0.07 + 0.07 * -2.0, v = 0.99 * 0.01 + 0.01 * 4.0;
    const double m_hat = m / (1.0 - 0.93 * 0.93), v_hat = v / (1.0 - 0.99 * 0.99);
    EXPECT_NEAR(p[0], 1.0 - 0.1 / (1.0 + 1e-8) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
}

TEST(Adam, DecayOnlyPath) {
    Tensor p({3}, std::vector<double>{1.0, -2.0, 4.0}), g({3});
    AdamState state;
    adam_step({{"p", &p, &g}}, state, AdamConfig{});
    EXPECT_DOUBLE_EQ(p[0], 1.0 * (1.0 - 1e-8));
    EXPECT_DOUBLE_EQ(p[1], -2.0 * (1.0 - 1e-8));
    EXPECT_DOUBLE_EQ(p[2], 4.0 * (1.0 - 1e-8));
}

TEST(Adam, FirstStepDependsOnlyOnGradientSign) {
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Tensor a({2}, 0.0), b({2}, 0.0);
    Tensor ga({2}, std::vector<double>{0.3, -5.0}), gb({2}, std::vector<double>{30.0, -0.05});
    AdamState sa, sb;
    adam_step({{"a", &a, &ga}}, sa, cfg);
    adam_step({{"b", &b, &gb}}, sb, cfg);
    EXPECT_NEAR(a[0], -cfg.lr, 1e-12);
    EXPECT_NEAR(a[1], cfg.lr, 1e-12);
    EXPECT_LT(max_abs_diff(a, b), 1e-10);  // eps / |g| residue
}

TEST(Adam, NonFiniteGradientLeavesEverythingUntouched) {
    Tensor p({2}, 1.0), q({1}, 2.0);
    Tensor gp({2}, 0.5), gq({1}, std::numeric_limits<double>::quiet_NaN());
    AdamState state;
    EXPECT_THROW(adam_step({{"p", &p, &gp}, {"q", &q, &gq}}, state, AdamConfig{}), std::runtime_error);
    EXPECT_EQ(p, Tensor({2}, 1.0));
    EXPECT_EQ(q, Tensor({1}, 2.0));
    EXPECT_EQ(state.t, 0u);
    EXPECT_TRUE(state.moments.empty());
}

TEST(Adam, RejectsBadConfig) {
    AdamConfig cfg;
    cfg.beta2 = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.lr = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Synthetic, DeterministicInSeed) {
    SynthSceneConfig cfg;
    cfg.seed = 5;
    const auto a = synth_dataset(cfg, 4), b = synth_dataset(cfg, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(a[i].image, b[i].image);
        EXPECT_EQ(a[i].heads.points.size(), b[i].heads.points.size());
    }
    cfg.seed = 6;
    EXPECT_NE(synth_dataset(cfg, 1)[0].image, a[0].image);
}

TEST(Synthetic, CountsMatchHeadsAndDensityMass) {
    SynthSceneConfig cfg;
    cfg.seed = 2;
    const auto scenes = synth_dataset(cfg, 20);
    const auto samples = make_samples(scenes);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::size_t heads = scenes[i].heads.points.size();
        EXPECT_GE(heads, cfg.min_heads);
        EXPECT_LE(heads, cfg.max_heads);
        EXPECT_EQ(samples[i].count, static_cast<double>(heads));
        EXPECT_NEAR(samples[i].density.sum(), samples[i].count, 1e-9);
        EXPECT_EQ(samples[i].density.shape(), (Shape{1, 1, 32, 32}));
    }
}

TEST(Synthetic, BrightnessGrowsWithCrowdSize) {
    SynthSceneConfig cfg;
    cfg.seed = 3;
    double sparse = 0.0, dense = 0.0;
    std::size_t n_sparse = 0, n_dense = 0;
    for (const auto& s : synth_dataset(cfg, 200)) {
        if (s.heads.points.size() <= 5) sparse += s.image.sum(), ++n_sparse;
        if (s.heads.points.size() >= 15) dense += s.image.sum(), ++n_dense;
    }
    ASSERT_GT(n_sparse, 0u);
    ASSERT_GT(n_dense, 0u);
    EXPECT_GT(dense / n_dense, 2.0 * sparse / n_sparse);
}

TEST(Training, ZeroEpochsLeaveTheNetworkAtInitialization) {
    const auto data = tiny_dataset(1, 4);
    Network net = build_toy_network(1, 4, 1, kDefaultAlphaIn, 9);
    const Network fresh = build_toy_network(1, 4, 1, kDefaultAlphaIn, 9);
    const auto history = train(net, data, TrainConfig{0, 1, 0, {}});
    ASSERT_EQ(history.size(), 1u);
    EXPECT_DOUBLE_EQ(history[0], dataset_loss(fresh, data));
    EXPECT_EQ(evaluate(net, data).pred_counts, evaluate(fresh, data).pred_counts);
}

TEST(Training, RepeatedRunsAreIdentical) {
    const auto data = tiny_dataset(2, 6);
    AdamConfig adam;
    adam.lr = 1e-3;
    const TrainConfig cfg{3, 2, 7, adam};
    Network a = build_toy_network(1, 4, 1, kDefaultAlphaIn, 3), b = build_toy_network(1, 4, 1, kDefaultAlphaIn, 3);
    EXPECT_EQ(train(a, data, cfg), train(b, data, cfg));
    const Tensor& x = data[0].image;
    EXPECT_EQ(a.forward(x), b.forward(x));
}

TEST(Training, LossDecreases) {
    const auto data = tiny_dataset(3, 8);
    AdamConfig adam;
    adam.lr = 1e-3;
    Network net = build_toy_network(1, 4, 1, kDefaultAlphaIn, 5);
    const auto history = train(net, data, TrainConfig{5, 1, 1, adam});
    ASSERT_EQ(history.size(), 6u);
    EXPECT_LT(dataset_loss(net, data), history.front());
}

TEST(Training, FullBatchMode) {
    const auto data = tiny_dataset(4, 3);
    AdamConfig adam;
    adam.lr = 1e-3;
    Network net = build_toy_network(1, 4, 1, kDefaultAlphaIn, 5);
    const auto history = train(net, data, TrainConfig{2, 0, 1, adam});
    EXPECT_EQ(history.size(), 3u);
    for (double v : history) EXPECT_TRUE(std::isfinite(v));
}

TEST(Training, RejectsEmptyData) {
    Network net = build_toy_network(1, 4, 1);
    EXPECT_THROW(train(net, {}, TrainConfig{}), std::invalid_argument);
    EXPECT_THROW(evaluate(net, {}), std::invalid_argument);
}
