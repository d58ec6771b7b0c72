#ifndef FGA_TENSOR_HPP
#define FGA_TENSOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fga {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major float64 array. Extents are all >= 1.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        check_extents();
        data_.assign(shape_numel(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (shape_numel(shape_) != data_.size()) {
            throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " holds " +
                                        std::to_string(shape_numel(shape_)) + " elements, got " +
                                        std::to_string(data_.size()));
        }
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != data_.size()) {
            throw std::invalid_argument("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    Tensor& operator+=(const Tensor& other) {
        require_same_shape(other, "add");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Tensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    double sum() const {
        double s = 0.0;
        for (double v : data_) s += v;
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    void require_same_shape(const Tensor& other, const char* op) const {
        if (shape_ != other.shape_) {
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(shape_) + " vs " +
                                        shape_str(other.shape_));
        }
    }

    void require_rank(std::size_t r, const char* op) const {
        if (shape_.size() != r) {
            throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                                        shape_str(shape_));
        }
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_extents() const {
        for (std::size_t e : shape_) {
            if (e == 0) throw std::invalid_argument("tensor: zero extent in shape " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<double> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) {
    a += b;
    return a;
}

inline Tensor operator*(double s, Tensor a) {
    a *= s;
    return a;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Sum of elementwise products.
inline double dot(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Value and its accumulated gradient.
struct GradPair {
    Tensor value;
    Tensor grad;

    GradPair() = default;
    explicit GradPair(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}
};

// ---------------------------------------------------------------------------
// Little-endian binary helpers shared by the FGAT/FGAC/FGAD formats.

namespace io {

template <typename UInt>
void write_le(std::ostream& os, UInt v) {
    std::array<char, sizeof(UInt)> buf{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(buf.data(), buf.size());
}

template <typename UInt>
UInt read_le(std::istream& is) {
    std::array<unsigned char, sizeof(UInt)> buf{};
    if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        throw std::runtime_error("unexpected end of stream");
    }
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(v));
    write_le<std::uint64_t>(os, bits);
}

inline double read_f64(std::istream& is) {
    const auto bits = read_le<std::uint64_t>(is);
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
        throw std::runtime_error("bad magic: expected \"" + std::string(magic) + "\"");
    }
}

}  // namespace io

/// FGAT record: "FGAT", u8 rank, rank x u32 extents, float64 payload (all little-endian).
inline void write_tensor(std::ostream& os, const Tensor& t) {
    if (t.rank() > 255) throw std::invalid_argument("write_tensor: rank exceeds 255");
    os.write("FGAT", 4);
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) {
        if (e > 0xFFFFFFFFu) throw std::invalid_argument("write_tensor: extent exceeds u32");
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    }
    for (double v : t.data()) io::write_f64(os, v);
}

inline Tensor read_tensor(std::istream& is) {
    io::expect_magic(is, "FGAT");
    const auto rank = io::read_le<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& e : shape) e = io::read_le<std::uint32_t>(is);
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = io::read_f64(is);
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace fga

#endif
