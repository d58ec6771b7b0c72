#ifndef FGA_DENSITY_HPP
#define FGA_DENSITY_HPP

// Ground-truth density maps from head annotations using geometry-adaptive
// Gaussian kernels (sigma_i = beta * mean distance to the k nearest heads),
// plus annotation and density-map file formats.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/tensor.hpp"

namespace fga {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct HeadAnnotations {
    std::vector<Point> points;
    std::size_t image_w = 0;
    std::size_t image_h = 0;

    /// Throws naming the first point outside [0, w) x [0, h).
    void validate() const {
        if (image_w == 0 || image_h == 0) throw std::invalid_argument("annotations: image size must be non-zero");
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Point& p = points[i];
            if (!(p.x >= 0.0 && p.x < static_cast<double>(image_w) && p.y >= 0.0 &&
                  p.y < static_cast<double>(image_h))) {
                std::ostringstream os;
                os << "annotations: point index " << i << " (" << p.x << ", " << p.y << ") lies outside the "
                   << image_w << "x" << image_h << " image";
                throw std::invalid_argument(os.str());
            }
        }
    }
};

struct GtConfig {
    double beta = 0.3;
    std::size_t k = 3;
    double fixed_sigma = 4.0;
    double truncation = 4.0;  // stamp radius in units of sigma
    bool renormalize = true;

    void validate() const {
        if (!(beta > 0.0)) throw std::invalid_argument("GtConfig: beta must be positive");
        if (k < 1) throw std::invalid_argument("GtConfig: k must be at least 1");
        if (!(fixed_sigma > 0.0)) throw std::invalid_argument("GtConfig: fixed_sigma must be positive");
        if (!(truncation > 0.0)) throw std::invalid_argument("GtConfig: truncation must be positive");
    }
};

struct DensityMap {
    Tensor grid;  // [H, W]

    double count() const { return grid.sum(); }
    std::size_t height() const { return grid.dim(0); }
    std::size_t width() const { return grid.dim(1); }
};

/// Mean distance from each point to its k nearest other points. Points with
/// fewer than k neighbours average over what exists; a lone point gets
/// std::nullopt, meaning "use the fixed sigma".
inline std::vector<std::optional<double>> knn_avg_distance(const std::vector<Point>& points, std::size_t k) {
    const std::size_t n = points.size();
    std::vector<std::optional<double>> out(n);
    std::vector<double> dist;
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dist.push_back(std::hypot(points[i].x - points[j].x, points[i].y - points[j].y));
        }
        if (dist.empty() || k == 0) continue;
        const std::size_t m = std::min(k, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += dist[j];
        out[i] = s / static_cast<double>(m);
    }
    return out;
}

/// Kernel widths for every head after applying the fixed-sigma fallback.
inline std::vector<double> adaptive_sigmas(const std::vector<Point>& points, const GtConfig& cfg) {
    const auto d = knn_avg_distance(points, cfg.k);
    std::vector<double> sigma(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        // Coincident heads give d = 0; treat them like a lone head.
        sigma[i] = (d[i] && *d[i] > 0.0) ? cfg.beta * *d[i] : cfg.fixed_sigma;
    }
    return sigma;
}

/// Adds one Gaussian sampled at pixel centres (j + 0.5, i + 0.5) inside a
/// circle of radius truncation * sigma, clipped to the image. With
/// `renormalize` the clipped stamp sums to one; otherwise it carries the
/// continuous normalization 1 / (2 pi sigma^2).
inline void stamp_gaussian(Tensor& grid, Point c, double sigma, double truncation, bool renormalize) {
    const auto h = static_cast<long>(grid.dim(0)), w = static_cast<long>(grid.dim(1));
    const double radius = truncation * sigma;
    const long y0 = std::max(0L, static_cast<long>(std::floor(c.y - radius - 0.5)));
    const long y1 = std::min(h - 1, static_cast<long>(std::ceil(c.y + radius - 0.5)));
    const long x0 = std::max(0L, static_cast<long>(std::floor(c.x - radius - 0.5)));
    const long x1 = std::min(w - 1, static_cast<long>(std::ceil(c.x + radius - 0.5)));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> weights;
    weights.reserve(static_cast<std::size_t>((y1 - y0 + 1) * (x1 - x0 + 1)));
    double total = 0.0;
    for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
            const double dx = static_cast<double>(x) + 0.5 - c.x;
            const double dy = static_cast<double>(y) + 0.5 - c.y;
            const double r2 = dx * dx + dy * dy;
            const double v = r2 <= radius * radius ? std::exp(-r2 * inv2s2) : 0.0;
            weights.push_back(v);
            total += v;
        }
    }
    const auto cx = std::clamp(static_cast<long>(std::floor(c.x)), 0L, w - 1);
    const auto cy = std::clamp(static_cast<long>(std::floor(c.y)), 0L, h - 1);
    if (!(total > 0.0)) {
        // Kernel narrower than a pixel: the whole unit lands on the host pixel.
        grid.at(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx)) += 1.0;
        return;
    }
    const double scale = renormalize ? 1.0 / total : inv2s2 / std::numbers::pi;
    std::size_t idx = 0;
    for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
            grid.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += weights[idx++] * scale;
        }
    }
}

inline DensityMap generate_density_map(const HeadAnnotations& ann, const GtConfig& cfg = {}) {
    if (ann.image_w == 0 || ann.image_h == 0) throw std::invalid_argument("generate_density_map: zero-size image");
    ann.validate();
    cfg.validate();
    DensityMap map{Tensor({ann.image_h, ann.image_w})};
    const auto sigma = adaptive_sigmas(ann.points, cfg);
    for (std::size_t i = 0; i < ann.points.size(); ++i) {
        stamp_gaussian(map.grid, ann.points[i], sigma[i], cfg.truncation, cfg.renormalize);
    }
    return map;
}

// ---------------------------------------------------------------------------
// Annotation files.

enum class AnnotationFormat { csv, json };

inline AnnotationFormat annotation_format_for(const std::string& path) {
    const auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == "csv") return AnnotationFormat::csv;
    if (ext == "json") return AnnotationFormat::json;
    throw std::invalid_argument("cannot infer annotation format from " + path + " (expected .csv or .json)");
}

/// "x,y" header followed by one "x,y" pair per line. Blank lines are skipped.
inline HeadAnnotations parse_annotations_csv(std::istream& is, std::size_t image_w, std::size_t image_h) {
    HeadAnnotations ann{{}, image_w, image_h};
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!header_seen) {
            std::string compact;
            for (char ch : line)
                if (ch != ' ' && ch != '\t') compact += ch;
            if (compact != "x,y") {
                throw std::invalid_argument("annotations csv line " + std::to_string(line_no) +
                                            ": expected header \"x,y\", got \"" + line + "\"");
            }
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        const auto bad = [&] {
            return std::invalid_argument("annotations csv line " + std::to_string(line_no) + ": malformed \"" +
                                         line + "\"");
        };
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) throw bad();
        Point p;
        try {
            std::size_t used = 0;
            const std::string xs = line.substr(0, comma), ys = line.substr(comma + 1);
            p.x = std::stod(xs, &used);
            if (xs.find_first_not_of(" \t", used) != std::string::npos) throw bad();
            p.y = std::stod(ys, &used);
            if (ys.find_first_not_of(" \t", used) != std::string::npos) throw bad();
        } catch (const std::logic_error&) {
            throw bad();
        }
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw bad();
        ann.points.push_back(p);
    }
    if (!header_seen) throw std::invalid_argument("annotations csv: missing \"x,y\" header");
    ann.validate();
    return ann;
}

/// {"image_w": int, "image_h": int, "points": [[x, y], ...]}
inline HeadAnnotations parse_annotations_json(std::istream& is) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("annotations json: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("image_w") || !doc.contains("image_h") || !doc.contains("points")) {
        throw std::invalid_argument("annotations json: expected object with image_w, image_h, points");
    }
    const auto& jw = doc["image_w"];
    const auto& jh = doc["image_h"];
    if (!jw.is_number_integer() || !jh.is_number_integer() || jw.get<long long>() <= 0 || jh.get<long long>() <= 0) {
        throw std::invalid_argument("annotations json: image_w and image_h must be positive integers");
    }
    HeadAnnotations ann{{}, jw.get<std::size_t>(), jh.get<std::size_t>()};
    const auto& pts = doc["points"];
    if (!pts.is_array()) throw std::invalid_argument("annotations json: points must be an array");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& e = pts[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
            throw std::invalid_argument("annotations json: point index " + std::to_string(i) +
                                        " must be a [x, y] number pair");
        }
        ann.points.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    ann.validate();
    return ann;
}

/// CSV needs the image size from the caller; JSON carries its own.
inline HeadAnnotations ingest_annotations(const std::string& path, AnnotationFormat format, std::size_t image_w = 0,
                                          std::size_t image_h = 0) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open annotations " + path);
    if (format == AnnotationFormat::json) return parse_annotations_json(is);
    if (image_w == 0 || image_h == 0) {
        throw std::invalid_argument("annotations csv: image width and height must be given");
    }
    return parse_annotations_csv(is, image_w, image_h);
}

// ---------------------------------------------------------------------------
// FGAD: "FGAD", u32 H, u32 W (little-endian), H*W float64 little-endian.

inline void write_density(std::ostream& os, const DensityMap& map) {
    os.write("FGAD", 4);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.height()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.width()));
    for (double v : map.grid.data()) io::write_f64(os, v);
}

inline DensityMap read_density(std::istream& is) {
    io::expect_magic(is, "FGAD");
    const std::size_t h = io::read_le<std::uint32_t>(is);
    const std::size_t w = io::read_le<std::uint32_t>(is);
    std::vector<double> data(h * w);
    for (double& v : data) v = io::read_f64(is);
    return {Tensor({h, w}, std::move(data))};
}

inline void write_density(const std::string& path, const DensityMap& map) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_density(os, map);
}

inline DensityMap read_density(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open density map " + path);
    return read_density(is);
}

/// Binary PGM (P5, maxval 255); the maximum maps to 255, all-zero stays black.
inline void write_pgm(const std::string& path, const Tensor& grid) {
    grid.require_rank(2, "write_pgm");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "P5\n" << grid.dim(1) << ' ' << grid.dim(0) << "\n255\n";
    const double mx = grid.max_abs();
    for (double v : grid.data()) {
        const double s = mx > 0.0 ? std::clamp(v / mx, 0.0, 1.0) : 0.0;
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255.0))));
    }
}

}  // namespace fga

#endif
