#ifndef FGA_NETWORK_HPP
#define FGA_NETWORK_HPP

// Toy density-estimation network: a two-layer conv stem standing in for a
// pretrained backbone, a stack of FGA layers, and a 1x1 head whose ReLU output
// is the density map.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fga/fga_layer.hpp"

namespace fga {

struct NetworkConfig {
    std::size_t in_channels = 1;
    std::size_t width = 8;
    std::size_t n_fga = 3;
    double alpha_in = kDefaultAlphaIn;
    std::uint64_t seed = 0;
};

/// Named view of one trainable tensor and its gradient buffer.
struct ParamSlot {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct NetworkWeights {
    ConvParams stem1;
    ConvParams stem2;
    std::vector<FgaParams> fga;
    ConvParams head;

    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        fn(std::string("stem1.weight"), self.stem1.weight);
        fn(std::string("stem1.bias"), self.stem1.bias);
        fn(std::string("stem2.weight"), self.stem2.weight);
        fn(std::string("stem2.bias"), self.stem2.bias);
        for (std::size_t i = 0; i < self.fga.size(); ++i) {
            FgaParams::visit(self.fga[i], "fga" + std::to_string(i) + ".", fn);
        }
        fn(std::string("head.weight"), self.head.weight);
        fn(std::string("head.bias"), self.head.bias);
    }
};

struct NetworkCache {
    Tensor input;
    Tensor stem1_pre, stem2_in, stem2_pre;
    std::vector<Tensor> fga_in;
    std::vector<FgaCache> fga;
    Tensor head_in, head_pre;
};

class Network {
public:
    explicit Network(const NetworkConfig& cfg) : cfg_(cfg) {
        if (cfg.width < 2) {
            throw std::invalid_argument("build_toy_network: width must be at least 2, got " +
                                        std::to_string(cfg.width));
        }
        if (cfg.in_channels < 1) throw std::invalid_argument("build_toy_network: need at least one input channel");
        for (std::size_t i = 0; i < cfg.n_fga; ++i) layer_cfgs_.emplace_back(cfg.width, cfg.alpha_in);
        std::mt19937_64 rng(cfg.seed);
        weights_.stem1 = ConvParams::init(cfg.width, cfg.in_channels, 3, rng);
        weights_.stem2 = ConvParams::init(cfg.width, cfg.width, 3, rng);
        for (const auto& lc : layer_cfgs_) weights_.fga.push_back(FgaParams::init(lc, rng));
        weights_.head = ConvParams::init(1, cfg.width, 1, rng);
        grads_ = weights_;
        zero_grad();
    }

    const NetworkConfig& config() const { return cfg_; }
    const std::vector<FgaConfig>& layer_configs() const { return layer_cfgs_; }
    NetworkWeights& weights() { return weights_; }
    const NetworkWeights& weights() const { return weights_; }
    NetworkWeights& grads() { return grads_; }

    /// Parameter store in registration order.
    std::vector<ParamSlot> parameters() {
        std::vector<ParamSlot> slots;
        NetworkWeights::visit(weights_, [&](const std::string& name, Tensor& t) {
            slots.push_back({name, &t, nullptr});
        });
        std::size_t i = 0;
        NetworkWeights::visit(grads_, [&](const std::string&, Tensor& t) { slots[i++].grad = &t; });
        return slots;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        NetworkWeights::visit(weights_, [&](const std::string&, const Tensor& t) { n += t.size(); });
        return n;
    }

    void zero_grad() {
        NetworkWeights::visit(grads_, [](const std::string&, Tensor& t) { t.fill(0.0); });
    }

    /// [N, in_channels, H, W] -> [N, 1, H, W] non-negative density.
    Tensor forward(const Tensor& x, NetworkCache* cache = nullptr) const {
        x.require_rank(4, "network forward");
        Tensor stem1_pre = conv2d(x, weights_.stem1.weight, weights_.stem1.bias);
        Tensor stem2_in = relu(stem1_pre);
        Tensor stem2_pre = conv2d(stem2_in, weights_.stem2.weight, weights_.stem2.bias);
        Tensor h = relu(stem2_pre);
        std::vector<Tensor> fga_in;
        std::vector<FgaCache> fga_caches(cache ? layer_cfgs_.size() : 0);
        for (std::size_t i = 0; i < layer_cfgs_.size(); ++i) {
            Tensor next = fga_forward(h, weights_.fga[i], layer_cfgs_[i], cache ? &fga_caches[i] : nullptr);
            if (cache) fga_in.push_back(std::move(h));
            h = std::move(next);
        }
        Tensor head_pre = conv2d(h, weights_.head.weight, weights_.head.bias);
        Tensor out = relu(head_pre);
        if (cache) {
            cache->input = x;
            cache->stem1_pre = std::move(stem1_pre);
            cache->stem2_in = std::move(stem2_in);
            cache->stem2_pre = std::move(stem2_pre);
            cache->fga_in = std::move(fga_in);
            cache->fga = std::move(fga_caches);
            cache->head_in = std::move(h);
            cache->head_pre = std::move(head_pre);
        }
        return out;
    }

    /// Accumulates parameter gradients into grads(); returns dL/dinput.
    Tensor backward(const NetworkCache& cache, const Tensor& grad_out) {
        Conv2dGrads head = conv2d_backward(cache.head_in, weights_.head.weight, relu_backward(cache.head_pre, grad_out));
        grads_.head.weight += head.weight;
        grads_.head.bias += head.bias;
        Tensor d = std::move(head.input);
        for (std::size_t i = layer_cfgs_.size(); i-- > 0;) {
            FgaGrads g = fga_backward(cache.fga[i], weights_.fga[i], layer_cfgs_[i], d);
            accumulate(grads_.fga[i], g.params);
            d = std::move(g.input);
        }
        Conv2dGrads s2 = conv2d_backward(cache.stem2_in, weights_.stem2.weight, relu_backward(cache.stem2_pre, d));
        grads_.stem2.weight += s2.weight;
        grads_.stem2.bias += s2.bias;
        Conv2dGrads s1 =
            conv2d_backward(cache.input, weights_.stem1.weight, relu_backward(cache.stem1_pre, s2.input));
        grads_.stem1.weight += s1.weight;
        grads_.stem1.bias += s1.bias;
        return std::move(s1.input);
    }

private:
    static void accumulate(FgaParams& into, FgaParams& delta) {
        std::vector<Tensor*> dst;
        FgaParams::visit(into, "", [&](const std::string&, Tensor& t) { dst.push_back(&t); });
        std::size_t i = 0;
        FgaParams::visit(delta, "", [&](const std::string&, Tensor& t) { *dst[i++] += t; });
    }

    NetworkConfig cfg_;
    std::vector<FgaConfig> layer_cfgs_;
    NetworkWeights weights_;
    NetworkWeights grads_;
};

inline Network build_toy_network(std::size_t in_channels, std::size_t width, std::size_t n_fga,
                                 double alpha_in = kDefaultAlphaIn, std::uint64_t seed = 0) {
    return Network(NetworkConfig{in_channels, width, n_fga, alpha_in, seed});
}

// ---------------------------------------------------------------------------
// FGAC checkpoints: "FGAC", u32 entry count, then per entry a u16 name
// length, the name bytes and an FGAT tensor record.

inline void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, const Tensor*>>& entries) {
    os.write("FGAC", 4);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) {
        if (name.size() > 0xFFFF) throw std::invalid_argument("checkpoint: name too long: " + name);
        io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(os, *tensor);
    }
}

inline std::vector<std::pair<std::string, Tensor>> read_checkpoint(std::istream& is) {
    io::expect_magic(is, "FGAC");
    const auto count = io::read_le<std::uint32_t>(is);
    std::vector<std::pair<std::string, Tensor>> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = io::read_le<std::uint16_t>(is);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw std::runtime_error("checkpoint: truncated name in entry " + std::to_string(i));
        entries.emplace_back(std::move(name), read_tensor(is));
    }
    return entries;
}

inline void save_network(const Network& net, const std::string& path) {
    std::vector<std::pair<std::string, const Tensor*>> entries;
    NetworkWeights::visit(net.weights(), [&](const std::string& name, const Tensor& t) { entries.emplace_back(name, &t); });
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_checkpoint(os, entries);
    if (!os) throw std::runtime_error("failed writing " + path);
}

/// Rebuilds the architecture from tensor shapes and loads the weights.
inline Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path);
    std::map<std::string, Tensor> table;
    for (auto& [name, t] : read_checkpoint(is)) table.emplace(name, std::move(t));
    const auto find = [&](const std::string& name) -> const Tensor& {
        auto it = table.find(name);
        if (it == table.end()) throw std::runtime_error("checkpoint " + path + " lacks " + name);
        return it->second;
    };
    NetworkConfig cfg;
    const Tensor& stem1 = find("stem1.weight");
    cfg.width = stem1.dim(0);
    cfg.in_channels = stem1.dim(1);
    cfg.n_fga = 0;
    while (table.count("fga" + std::to_string(cfg.n_fga) + ".conv_ll.weight")) ++cfg.n_fga;
    if (cfg.n_fga > 0) {
        const std::size_t cg = find("fga0.spectral.conv.weight").dim(0) / 2;
        cfg.alpha_in = FgaConfig::from_split(cfg.width, cg).alpha_in();
    }
    Network net(cfg);
    NetworkWeights::visit(net.weights(), [&](const std::string& name, Tensor& t) {
        const Tensor& src = find(name);
        if (src.shape() != t.shape()) {
            throw std::runtime_error("checkpoint entry " + name + " has shape " + shape_str(src.shape()) +
                                     ", expected " + shape_str(t.shape()));
        }
        t = src;
    });
    return net;
}

}  // namespace fga

#endif
