#include "radscan/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace radscan {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
    if (shape_.size() > 4) throw ShapeError("tensor rank above 4: " + shape_to_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_.size() > 4) throw ShapeError("tensor rank above 4: " + shape_to_string(shape_));
    if (shape_product(shape_) != data_.size()) {
        throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not hold " +
                         std::to_string(data_.size()) + " values");
    }
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape_));
    }
    return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_product(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "tensor -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw std::runtime_error(std::string(what) + ": non-finite value produced");
}

Dims4 dims4(const Tensor& t, const char* what) {
    const auto& s = t.shape();
    if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
    if (s.size() == 3) return {1, s[0], s[1], s[2]};
    throw ShapeError(std::string(what) + ": expected (C,H,W) or (N,C,H,W), got " +
                     shape_to_string(s));
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = std::bit_cast<U>(v);
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename T>
T get_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char buf[sizeof(U)];
    in.read(reinterpret_cast<char*>(buf), sizeof(U));
    if (!in) throw std::runtime_error("DAT1: truncated payload");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

}  // namespace

void write_dat1(std::ostream& out, const Tensor& t, Precision p) {
    out << "DAT1 " << t.rank();
    for (std::size_t e : t.shape()) out << ' ' << e;
    out << (p == Precision::f32 ? " f32\n" : " f64\n");
    for (double v : t.data()) {
        if (p == Precision::f32) {
            put_le<float>(out, static_cast<float>(v));
        } else {
            put_le<double>(out, v);
        }
    }
}

Tensor read_dat1(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("DAT1: missing header");
    std::istringstream hs(line);
    std::string magic, prec;
    std::size_t ndim = 0;
    hs >> magic >> ndim;
    if (magic != "DAT1" || !hs || ndim > 4) throw std::runtime_error("DAT1: bad header '" + line + "'");
    Shape shape(ndim);
    for (auto& e : shape) hs >> e;
    hs >> prec;
    if (!hs || (prec != "f32" && prec != "f64")) {
        throw std::runtime_error("DAT1: bad header '" + line + "'");
    }
    std::vector<double> values(shape_product(shape));
    for (double& v : values) {
        v = prec == "f32" ? static_cast<double>(get_le<float>(in)) : get_le<double>(in);
    }
    return Tensor(std::move(shape), std::move(values));
}

void save_dat1(const std::string& path, const Tensor& t, Precision p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_dat1(out, t, p);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Tensor load_dat1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return read_dat1(in);
}

}  // namespace radscan
