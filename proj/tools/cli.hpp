#ifndef FGA_TOOLS_CLI_HPP
#define FGA_TOOLS_CLI_HPP

// `fga` command-line front end. Every subcommand prints its resolved
// configuration first; reports are printed as tables and optionally written as
// CSV with --csv.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fga/density.hpp"
#include "fga/fft.hpp"
#include "fga/gradcheck.hpp"
#include "fga/network.hpp"
#include "fga/spectral_block.hpp"
#include "fga/train.hpp"

namespace fga::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline std::uint64_t env_seed() {
    if (const char* s = std::getenv("FGA_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::logic_error&) {
            throw std::invalid_argument(std::string("FGA_SEED is not an unsigned integer: ") + s);
        }
    }
    return 0;
}

inline std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) {
        if (path.empty()) return;
        os_.open(path);
        if (!os_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    void row(const std::vector<std::string>& cells) {
        if (!os_.is_open()) return;
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
        os_ << '\n';
    }

private:
    std::ofstream os_;
};

struct ResolvedConfig {
    std::vector<std::pair<std::string, std::string>> entries;
    void add(const std::string& k, const std::string& v) { entries.emplace_back(k, v); }
    void print(const std::string& cmd, std::ostream& os) const {
        os << "config: command=" << cmd;
        for (const auto& [k, v] : entries) os << ' ' << k << '=' << v;
        os << '\n';
    }
};

// ---------------------------------------------------------------------------

struct GtOptions {
    GtConfig cfg;
    bool no_renormalize = false;

    void attach(CLI::App* app) {
        app->add_option("--beta", cfg.beta, "sigma = beta * mean kNN distance")->capture_default_str();
        app->add_option("--k", cfg.k, "number of nearest neighbours")->capture_default_str();
        app->add_option("--fixed-sigma", cfg.fixed_sigma, "sigma for heads without neighbours")->capture_default_str();
        app->add_option("--truncation", cfg.truncation, "stamp radius in sigmas")->capture_default_str();
        app->add_flag("--no-renormalize", no_renormalize, "keep boundary truncation loss");
    }
    GtConfig resolved() const {
        GtConfig c = cfg;
        c.renormalize = !no_renormalize;
        c.validate();
        return c;
    }
    void describe(ResolvedConfig& rc) const {
        const GtConfig c = resolved();
        rc.add("beta", fmt(c.beta));
        rc.add("k", std::to_string(c.k));
        rc.add("fixed_sigma", fmt(c.fixed_sigma));
        rc.add("truncation", fmt(c.truncation));
        rc.add("renormalize", c.renormalize ? "on" : "off");
    }
};

struct AdamOptions {
    AdamConfig cfg;
    void attach(CLI::App* app) {
        app->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
        app->add_option("--beta1", cfg.beta1, "Adam first-moment decay")->capture_default_str();
        app->add_option("--beta2", cfg.beta2, "Adam second-moment decay")->capture_default_str();
        app->add_option("--adam-eps", cfg.eps, "Adam epsilon")->capture_default_str();
        app->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay")->capture_default_str();
    }
    void describe(ResolvedConfig& rc) const {
        rc.add("lr", fmt(cfg.lr));
        rc.add("beta1", fmt(cfg.beta1));
        rc.add("beta2", fmt(cfg.beta2));
        rc.add("adam_eps", fmt(cfg.eps));
        rc.add("weight_decay", fmt(cfg.weight_decay));
    }
};

struct SceneOptions {
    std::size_t size = 32;
    std::size_t min_heads = 1;
    std::size_t max_heads = 20;
    double noise = 0.05;

    void attach(CLI::App* app) {
        app->add_option("--size", size, "synthetic image side length")->capture_default_str();
        app->add_option("--min-heads", min_heads)->capture_default_str();
        app->add_option("--max-heads", max_heads)->capture_default_str();
        app->add_option("--noise", noise, "background noise std")->capture_default_str();
    }
    SynthSceneConfig make(std::uint64_t seed) const {
        SynthSceneConfig c;
        c.seed = seed;
        c.height = c.width = size;
        c.min_heads = min_heads;
        c.max_heads = max_heads;
        c.noise = noise;
        return c;
    }
    void describe(ResolvedConfig& rc) const {
        rc.add("size", std::to_string(size));
        rc.add("min_heads", std::to_string(min_heads));
        rc.add("max_heads", std::to_string(max_heads));
        rc.add("noise", fmt(noise));
    }
};

/// Training scenes use `seed`, test scenes `seed + 1`.
inline std::uint64_t test_seed(std::uint64_t seed) { return seed + 1; }

// ---------------------------------------------------------------------------

inline int cmd_gen_gt(const std::string& ann_path, const std::string& format, std::size_t w, std::size_t h,
                      const std::string& out, const std::string& pgm, const GtOptions& gt, const std::string& csv) {
    ResolvedConfig rc;
    rc.add("ann", ann_path);
    const AnnotationFormat f = format.empty() ? annotation_format_for(ann_path)
                               : format == "csv" ? AnnotationFormat::csv
                                                 : AnnotationFormat::json;
    rc.add("format", f == AnnotationFormat::csv ? "csv" : "json");
    rc.add("w", std::to_string(w));
    rc.add("h", std::to_string(h));
    rc.add("out", out);
    rc.add("pgm", pgm.empty() ? "-" : pgm);
    gt.describe(rc);
    rc.print("gen-gt", std::cout);

    const HeadAnnotations ann = ingest_annotations(ann_path, f, w, h);
    const DensityMap map = generate_density_map(ann, gt.resolved());
    write_density(out, map);
    if (!pgm.empty()) write_pgm(pgm, map.grid);
    std::cout << "heads: " << ann.points.size() << "\n"
              << "density sum: " << fmt(map.count(), 12) << "\n";
    CsvWriter csvw(csv);
    csvw.row({"heads", "density_sum", "height", "width"});
    csvw.row({std::to_string(ann.points.size()), fmt(map.count(), 17), std::to_string(map.height()),
              std::to_string(map.width())});
    return kExitOk;
}

inline int cmd_forward(const std::string& image_path, const std::string& ckpt, const std::string& out,
                       const std::string& pgm, const std::string& csv) {
    ResolvedConfig rc;
    rc.add("image", image_path);
    rc.add("checkpoint", ckpt);
    rc.add("out", out);
    rc.add("pgm", pgm.empty() ? "-" : pgm);
    rc.print("forward", std::cout);

    std::ifstream is(image_path, std::ios::binary);
    if (!is) throw std::invalid_argument("cannot open image " + image_path);
    Tensor image = read_tensor(is);
    if (image.rank() == 2) image = image.reshaped({1, 1, image.dim(0), image.dim(1)});
    if (image.rank() != 4 || image.dim(0) != 1) {
        throw std::invalid_argument("forward: image must be [H,W] or [1,C,H,W], got " + shape_str(image.shape()));
    }
    const Network net = load_network(ckpt);
    const Tensor pred = net.forward(image);
    const DensityMap map{pred.reshaped({pred.dim(2), pred.dim(3)})};
    write_density(out, map);
    if (!pgm.empty()) write_pgm(pgm, map.grid);
    std::cout << "predicted count: " << fmt(map.count(), 12) << "\n";
    CsvWriter csvw(csv);
    csvw.row({"predicted_count"});
    csvw.row({fmt(map.count(), 17)});
    return kExitOk;
}

inline int cmd_grad_check(std::uint64_t seed, const std::string& csv) {
    ResolvedConfig rc;
    rc.add("seed", std::to_string(seed));
    rc.add("fd_step", sci(kFdStep));
    rc.add("rel_err_floor", sci(kRelErrFloor));
    rc.print("grad-check", std::cout);

    const auto rows = run_gradient_suite(seed);
    CsvWriter csvw(csv);
    csvw.row({"op", "max_rel_error", "threshold", "status"});
    std::cout << std::left << std::setw(22) << "op" << std::setw(16) << "max rel err" << std::setw(12) << "threshold"
              << "status\n";
    bool ok = true;
    for (const auto& r : rows) {
        ok = ok && r.passed();
        std::cout << std::left << std::setw(22) << r.op << std::setw(16) << sci(r.max_rel_error) << std::setw(12)
                  << sci(r.threshold) << (r.passed() ? "PASS" : "FAIL") << "\n";
        csvw.row({r.op, sci(r.max_rel_error), sci(r.threshold), r.passed() ? "PASS" : "FAIL"});
    }
    return ok ? kExitOk : kExitFailure;
}

struct FftSelftestRow {
    std::size_t h = 0, w = 0;
    double forward_err = 0.0;
    double roundtrip_err = 0.0;
    double parseval_rel_err = 0.0;
};

/// Full 2-D DFT by the defining double sum, used as the reference.
inline void reference_dft2(const Tensor& plane, std::vector<double>& re, std::vector<double>& im) {
    const std::size_t h = plane.dim(0), w = plane.dim(1);
    re.assign(h * w, 0.0);
    im.assign(h * w, 0.0);
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
            double sr = 0.0, si = 0.0;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>((u * y) % h) / static_cast<double>(h) +
                                        static_cast<double>((v * x) % w) / static_cast<double>(w));
                    sr += plane.at(y, x) * std::cos(ang);
                    si += plane.at(y, x) * std::sin(ang);
                }
            }
            re[u * w + v] = sr;
            im[u * w + v] = si;
        }
    }
}

inline FftSelftestRow fft_selftest_case(std::size_t h, std::size_t w, std::mt19937_64& rng) {
    const Tensor x = random_tensor({1, 1, h, w}, rng);
    const ComplexSpectrum s = rfft2d(x);
    std::vector<double> ref_re, ref_im;
    reference_dft2(x.reshaped({h, w}), ref_re, ref_im);
    const std::size_t wf = half_width(w);
    FftSelftestRow row{h, w};
    double energy_x = 0.0, energy_f = 0.0;
    for (double v : x.data()) energy_x += v * v;
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
            double re = 0.0, im = 0.0;
            if (v < wf) {
                re = s.re[u * wf + v];
                im = s.im[u * wf + v];
            } else {
                re = s.re[((h - u) % h) * wf + (w - v)];
                im = -s.im[((h - u) % h) * wf + (w - v)];
            }
            row.forward_err = std::max({row.forward_err, std::abs(re - ref_re[u * w + v]),
                                        std::abs(im - ref_im[u * w + v])});
            energy_f += re * re + im * im;
        }
    }
    row.roundtrip_err = max_abs_diff(irfft2d(s), x);
    row.parseval_rel_err = std::abs(energy_x - energy_f / static_cast<double>(h * w)) / energy_x;
    return row;
}

inline constexpr double kFftTolerance = 1e-10;

inline std::vector<FftSelftestRow> run_fft_selftest(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<FftSelftestRow> rows;
    const std::size_t sizes[] = {4, 6, 8, 12, 16};
    for (std::size_t h : sizes)
        for (std::size_t w : sizes) rows.push_back(fft_selftest_case(h, w, rng));
    return rows;
}

inline int cmd_fft_selftest(std::uint64_t seed, const std::string& csv) {
    ResolvedConfig rc;
    rc.add("seed", std::to_string(seed));
    rc.add("tolerance", sci(kFftTolerance));
    rc.print("fft-selftest", std::cout);
    CsvWriter csvw(csv);
    csvw.row({"h", "w", "forward_err", "roundtrip_err", "parseval_rel_err", "status"});
    std::cout << std::left << std::setw(6) << "H" << std::setw(6) << "W" << std::setw(14) << "forward" << std::setw(14)
              << "roundtrip" << std::setw(14) << "parseval" << "status\n";
    bool ok = true;
    for (const auto& r : run_fft_selftest(seed)) {
        const bool pass =
            r.forward_err < kFftTolerance && r.roundtrip_err < kFftTolerance && r.parseval_rel_err < kFftTolerance;
        ok = ok && pass;
        std::cout << std::left << std::setw(6) << r.h << std::setw(6) << r.w << std::setw(14) << sci(r.forward_err)
                  << std::setw(14) << sci(r.roundtrip_err) << std::setw(14) << sci(r.parseval_rel_err)
                  << (pass ? "PASS" : "FAIL") << "\n";
        csvw.row({std::to_string(r.h), std::to_string(r.w), sci(r.forward_err), sci(r.roundtrip_err),
                  sci(r.parseval_rel_err), pass ? "PASS" : "FAIL"});
    }
    return ok ? kExitOk : kExitFailure;
}

struct TrainOptions {
    std::size_t epochs = 30;
    std::size_t train_scenes = 200;
    std::size_t test_scenes = 50;
    std::size_t width = 8;
    std::size_t n_fga = 3;
    double alpha = kDefaultAlphaIn;
    std::size_t batch_size = 1;
    std::string log;
    std::string checkpoint;
    std::size_t checkpoint_every = 0;
};

inline int cmd_train(std::uint64_t seed, const TrainOptions& opt, const SceneOptions& scenes,
                     const AdamOptions& adam, const GtOptions& gt) {
    ResolvedConfig rc;
    rc.add("seed", std::to_string(seed));
    rc.add("epochs", std::to_string(opt.epochs));
    rc.add("train_scenes", std::to_string(opt.train_scenes));
    rc.add("test_scenes", std::to_string(opt.test_scenes));
    rc.add("width", std::to_string(opt.width));
    rc.add("n_fga", std::to_string(opt.n_fga));
    rc.add("alpha_in", fmt(opt.alpha));
    rc.add("batch_size", std::to_string(opt.batch_size));
    scenes.describe(rc);
    adam.describe(rc);
    gt.describe(rc);
    rc.add("log", opt.log.empty() ? "-" : opt.log);
    rc.add("checkpoint", opt.checkpoint.empty() ? "-" : opt.checkpoint);
    rc.add("checkpoint_every", std::to_string(opt.checkpoint_every));
    rc.print("train", std::cout);

    const auto train_set = make_samples(synth_dataset(scenes.make(seed), opt.train_scenes), gt.resolved());
    const auto test_set = make_samples(synth_dataset(scenes.make(test_seed(seed)), opt.test_scenes), gt.resolved());
    Network net = build_toy_network(1, opt.width, opt.n_fga, opt.alpha, seed);
    std::cout << "parameters: " << net.parameter_count() << "\n";

    CsvWriter log(opt.log);
    log.row({"epoch", "loss", "mae", "rmse"});
    const auto report = [&](std::size_t epoch, double loss) {
        const EvalResult ev = evaluate(net, test_set);
        std::cout << "epoch " << epoch << " loss " << sci(loss) << " mae " << fmt(ev.errors.mae) << " rmse "
                  << fmt(ev.errors.rmse) << "\n";
        log.row({std::to_string(epoch), fmt(loss, 17), fmt(ev.errors.mae, 17), fmt(ev.errors.rmse, 17)});
        if (!opt.checkpoint.empty() && opt.checkpoint_every > 0 && epoch > 0 && epoch % opt.checkpoint_every == 0) {
            save_network(net, opt.checkpoint + ".epoch" + std::to_string(epoch));
        }
    };
    TrainConfig tc{opt.epochs, opt.batch_size, seed, adam.cfg};
    report(0, dataset_loss(net, train_set));
    const auto history = train(net, train_set, tc, [&](const EpochReport& r) { report(r.epoch, r.loss); });
    if (!opt.checkpoint.empty()) save_network(net, opt.checkpoint);
    const EvalResult ev = evaluate(net, test_set);
    std::cout << "initial loss: " << sci(history.front()) << "\nfinal loss: " << sci(history.back()) << "\n"
              << "test MAE: " << fmt(ev.errors.mae) << "\n"
              << "test RMSE (reported as MSE in crowd-counting tables): " << fmt(ev.errors.rmse) << "\n";
    return kExitOk;
}

inline int cmd_eval(std::uint64_t seed, const std::string& ckpt, std::size_t n_scenes, const SceneOptions& scenes,
                    const GtOptions& gt, const std::string& csv) {
    ResolvedConfig rc;
    rc.add("seed", std::to_string(seed));
    rc.add("checkpoint", ckpt);
    rc.add("test_scenes", std::to_string(n_scenes));
    scenes.describe(rc);
    gt.describe(rc);
    rc.print("eval", std::cout);
    const Network net = load_network(ckpt);
    const auto test_set = make_samples(synth_dataset(scenes.make(test_seed(seed)), n_scenes), gt.resolved());
    const EvalResult ev = evaluate(net, test_set);
    CsvWriter csvw(csv);
    csvw.row({"index", "gt_count", "pred_count"});
    for (std::size_t i = 0; i < ev.pred_counts.size(); ++i) {
        csvw.row({std::to_string(i), fmt(ev.gt_counts[i], 17), fmt(ev.pred_counts[i], 17)});
    }
    std::cout << "MAE: " << fmt(ev.errors.mae) << "\n"
              << "RMSE (reported as MSE in crowd-counting tables): " << fmt(ev.errors.rmse) << "\n";
    return kExitOk;
}

/// Influence of one pixel through a spectral block and through a single 3x3
/// convolution with the same input and output channels.
struct ProbeResult {
    Tensor spectral;  // [H, W], max over channels
    Tensor conv;
    double spectral_fraction = 0.0;
    double conv_fraction = 0.0;
    std::size_t conv_outside_radius = 0;
};

inline constexpr double kInfluenceThreshold = 1e-9;

inline Tensor channel_max(const Tensor& t) {
    Tensor out({t.dim(2), t.dim(3)});
    for (std::size_t c = 0; c < t.dim(1); ++c)
        for (std::size_t y = 0; y < t.dim(2); ++y)
            for (std::size_t x = 0; x < t.dim(3); ++x) out.at(y, x) = std::max(out.at(y, x), t.at(0, c, y, x));
    return out;
}

/// With `zero_background` the delta is probed in isolation; otherwise it is
/// added to a random background image.
inline ProbeResult run_probe(std::uint64_t seed, std::size_t size, std::size_t channels, std::size_t row,
                             std::size_t col, bool zero_background = false) {
    if (row >= size || col >= size) throw std::invalid_argument("probe: delta position outside the image");
    std::mt19937_64 rng(seed);
    SpectralBlockParams sp = SpectralBlockParams::init(channels, rng);
    sp.freq_conv.bias = random_tensor({2 * channels}, rng, -0.5, 0.5);
    sp.freq_bn.gamma = random_tensor({2 * channels}, rng, 0.5, 1.5);
    sp.freq_bn.beta = random_tensor({2 * channels}, rng, -0.5, 0.5);
    ConvParams conv = ConvParams::init(channels, channels, 3, rng);
    conv.bias = random_tensor({channels}, rng, -0.5, 0.5);

    const Tensor background =
        zero_background ? Tensor({1, channels, size, size}) : random_tensor({1, channels, size, size}, rng);
    Tensor delta({1, channels, size, size});
    for (std::size_t c = 0; c < channels; ++c) delta.at(0, c, row, col) = 1.0;
    ProbeResult r;
    r.spectral = channel_max(receptive_field_probe(delta, sp, &background));
    r.conv = channel_max(
        influence_map(delta, [&](const Tensor& x) { return conv2d(x, conv.weight, conv.bias); }, &background));
    r.spectral_fraction = fraction_above(r.spectral, kInfluenceThreshold);
    r.conv_fraction = fraction_above(r.conv, kInfluenceThreshold);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const bool inside = (y + 1 >= row && y <= row + 1) && (x + 1 >= col && x <= col + 1);
            if (!inside && r.conv.at(y, x) > kInfluenceThreshold) ++r.conv_outside_radius;
        }
    }
    return r;
}

inline int cmd_probe(std::uint64_t seed, std::size_t size, std::size_t channels, std::size_t row, std::size_t col,
                     bool zero_background, const std::string& prefix, const std::string& csv) {
    ResolvedConfig rc;
    rc.add("seed", std::to_string(seed));
    rc.add("size", std::to_string(size));
    rc.add("channels", std::to_string(channels));
    rc.add("row", std::to_string(row));
    rc.add("col", std::to_string(col));
    rc.add("background", zero_background ? "zero" : "random");
    rc.add("out_prefix", prefix);
    rc.add("threshold", sci(kInfluenceThreshold));
    rc.print("probe", std::cout);
    const ProbeResult r = run_probe(seed, size, channels, row, col, zero_background);
    write_pgm(prefix + "_spectral.pgm", r.spectral);
    write_pgm(prefix + "_conv.pgm", r.conv);
    std::cout << "spectral block: " << fmt(100.0 * r.spectral_fraction) << "% of pixels influenced\n"
              << "3x3 conv:       " << fmt(100.0 * r.conv_fraction) << "% of pixels influenced, "
              << r.conv_outside_radius << " outside the kernel radius\n";
    CsvWriter csvw(csv);
    csvw.row({"path", "influenced_fraction", "outside_kernel_radius"});
    csvw.row({"spectral", fmt(r.spectral_fraction, 17), "-"});
    csvw.row({"conv3x3", fmt(r.conv_fraction, 17), std::to_string(r.conv_outside_radius)});
    return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Fourier-guided attention toolkit"};
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed_opt;
    std::string csv;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_opt, "RNG seed (falls back to $FGA_SEED, then 0)");
        sub->add_option("--csv", csv, "also write the report as CSV");
    };

    auto* gen = app.add_subcommand("gen-gt", "annotations -> density map (FGAD, optional PGM)");
    std::string ann, format, out, pgm;
    std::size_t img_w = 0, img_h = 0;
    GtOptions gt;
    gen->add_option("--ann", ann, "annotation file (.csv or .json)")->required();
    gen->add_option("--format", format, "csv or json (default: from extension)")
        ->check(CLI::IsMember({"csv", "json"}));
    gen->add_option("--w", img_w, "image width (CSV input)");
    gen->add_option("--h", img_h, "image height (CSV input)");
    gen->add_option("--out", out, "output FGAD file")->required();
    gen->add_option("--pgm", pgm, "optional PGM preview");
    gt.attach(gen);
    add_common(gen);

    auto* fwd = app.add_subcommand("forward", "image + checkpoint -> predicted density and count");
    std::string image, ckpt;
    fwd->add_option("--image", image, "FGAT tensor, [H,W] or [1,C,H,W]")->required();
    fwd->add_option("--checkpoint", ckpt, "FGAC checkpoint")->required();
    fwd->add_option("--out", out, "output FGAD file")->required();
    fwd->add_option("--pgm", pgm, "optional PGM preview");
    add_common(fwd);

    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient suite");
    add_common(gc);

    auto* ft = app.add_subcommand("fft-selftest", "FFT against the direct DFT over a size sweep");
    add_common(ft);

    TrainOptions topt;
    SceneOptions scenes;
    AdamOptions adam;
    auto* tr = app.add_subcommand("train", "train the toy network on synthetic scenes");
    tr->add_option("--epochs", topt.epochs)->capture_default_str();
    tr->add_option("--train-scenes", topt.train_scenes)->capture_default_str();
    tr->add_option("--test-scenes", topt.test_scenes)->capture_default_str();
    tr->add_option("--width", topt.width)->capture_default_str();
    tr->add_option("--n-fga", topt.n_fga)->capture_default_str();
    tr->add_option("--alpha", topt.alpha, "fraction of channels on the global path")->capture_default_str();
    tr->add_option("--batch-size", topt.batch_size, "images per Adam step, 0 for the whole set")->capture_default_str();
    tr->add_option("--log", topt.log, "CSV log: epoch,loss,mae,rmse");
    tr->add_option("--checkpoint", topt.checkpoint, "final FGAC checkpoint");
    tr->add_option("--checkpoint-every", topt.checkpoint_every, "also checkpoint every k epochs");
    scenes.attach(tr);
    adam.attach(tr);
    GtOptions train_gt;
    train_gt.attach(tr);
    add_common(tr);

    auto* ev = app.add_subcommand("eval", "MAE/RMSE of a checkpoint on synthetic test scenes");
    std::size_t eval_scenes = 50;
    SceneOptions eval_scene_opts;
    GtOptions eval_gt;
    ev->add_option("--checkpoint", ckpt, "FGAC checkpoint")->required();
    ev->add_option("--test-scenes", eval_scenes)->capture_default_str();
    eval_scene_opts.attach(ev);
    eval_gt.attach(ev);
    add_common(ev);

    auto* pr = app.add_subcommand("probe", "receptive-field influence maps, spectral vs 3x3 conv");
    std::size_t probe_size = 8, probe_channels = 2, probe_row = 3, probe_col = 5;
    bool zero_background = false;
    std::string prefix = "probe";
    pr->add_option("--size", probe_size)->capture_default_str();
    pr->add_option("--channels", probe_channels)->capture_default_str();
    pr->add_option("--row", probe_row, "delta row")->capture_default_str();
    pr->add_option("--col", probe_col, "delta column")->capture_default_str();
    pr->add_flag("--zero-background", zero_background, "probe the delta alone instead of on a random image");
    pr->add_option("--out-prefix", prefix, "writes <prefix>_spectral.pgm and <prefix>_conv.pgm")
        ->capture_default_str();
    add_common(pr);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const std::uint64_t seed = seed_opt ? *seed_opt : env_seed();
        if (gen->parsed()) return cmd_gen_gt(ann, format, img_w, img_h, out, pgm, gt, csv);
        if (fwd->parsed()) return cmd_forward(image, ckpt, out, pgm, csv);
        if (gc->parsed()) return cmd_grad_check(seed, csv);
        if (ft->parsed()) return cmd_fft_selftest(seed, csv);
        if (tr->parsed()) return cmd_train(seed, topt, scenes, adam, train_gt);
        if (ev->parsed()) return cmd_eval(seed, ckpt, eval_scenes, eval_scene_opts, eval_gt, csv);
        if (pr->parsed()) return cmd_probe(seed, probe_size, probe_channels, probe_row, probe_col, zero_background, prefix, csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace fga::cli

#endif
