#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "fga/gradcheck.hpp"
#include "fga/network.hpp"

using namespace fga;

TEST(Network, BaselineParameterCountIsStemAndHead) {
    for (std::size_t w : {2u, 8u, 16u}) {
        // stem1 (9w + w) + stem2 (9w^2 + w) + head (w + 1)
        EXPECT_EQ(build_toy_network(1, w, 0).parameter_count(), 9 * w * w + 12 * w + 1) << w;
    }
}

TEST(Network, FgaLayersAddTheirParameters) {
    const Network net = build_toy_network(1, 8, 3);
    EXPECT_EQ(net.parameter_count(), 2413u);
}

TEST(Network, ForwardShapeAndNonNegative) {
    std::mt19937_64 rng(1);
    const Network net = build_toy_network(1, 8, 3, kDefaultAlphaIn, 4);
    const Tensor out = net.forward(random_tensor({1, 1, 32, 32}, rng, 0.0, 1.0));
    EXPECT_EQ(out.shape(), (Shape{1, 1, 32, 32}));
    for (double v : out.data()) EXPECT_GE(v, 0.0);
}

TEST(Network, SameSeedSameOutput) {
    std::mt19937_64 rng(2);
    const Tensor x = random_tensor({1, 1, 8, 8}, rng);
    const Network a = build_toy_network(1, 6, 2, 0.5, 99), b = build_toy_network(1, 6, 2, 0.5, 99);
    EXPECT_EQ(a.forward(x), b.forward(x));
    const Network c = build_toy_network(1, 6, 2, 0.5, 100);
    EXPECT_NE(a.forward(x), c.forward(x));
}

TEST(Network, RejectsTooNarrow) {
    EXPECT_THROW(build_toy_network(1, 1, 1), std::invalid_argument);
}

TEST(Network, CheckpointRoundTrip) {
    std::mt19937_64 rng(3);
    Network net = build_toy_network(1, 6, 2, 0.4, 17);
    for (auto& slot : net.parameters()) *slot.value = random_tensor(slot.value->shape(), rng);
    const auto path = std::filesystem::temp_directory_path() / "fga_network_roundtrip.fgac";
    save_network(net, path.string());
    const Network back = load_network(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(back.config().width, 6u);
    EXPECT_EQ(back.config().n_fga, 2u);
    EXPECT_EQ(back.layer_configs()[0].global_channels(), net.layer_configs()[0].global_channels());
    const Tensor x = random_tensor({1, 1, 7, 7}, rng);
    EXPECT_EQ(back.forward(x), net.forward(x));
}

TEST(Network, EndToEndGradientUnderEuclideanLoss) {
    for (const auto& row : run_gradient_suite(41)) {
        if (row.op == "toy_network_loss") {
            EXPECT_TRUE(row.passed()) << "rel err " << row.max_rel_error;
        }
    }
}
