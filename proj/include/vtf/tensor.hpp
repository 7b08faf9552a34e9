#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vtf/errors.hpp"

namespace vtf {

using Shape = std::vector<std::size_t>;

// Entry coordinates, 1-based on every axis.
struct MultiIndex {
    std::vector<std::size_t> coords;

    MultiIndex() = default;
    explicit MultiIndex(std::vector<std::size_t> c) : coords(std::move(c)) {}
    MultiIndex(std::initializer_list<std::size_t> c) : coords(c) {}

    std::size_t size() const { return coords.size(); }
    std::size_t operator[](std::size_t i) const { return coords[i]; }
    std::size_t& operator[](std::size_t i) { return coords[i]; }
    auto operator<=>(const MultiIndex&) const = default;
};

inline std::string shape_to_string(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

inline void check_shape(const Shape& s) {
    if (s.empty()) throw ShapeError("tensor must have at least one axis");
    for (auto e : s)
        if (e == 0) throw ShapeError("zero extent in shape " + shape_to_string(s));
}

inline std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

inline std::size_t multi_to_flat(const Shape& s, const MultiIndex& idx) {
    if (idx.size() != s.size())
        throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match shape " + shape_to_string(s));
    std::size_t flat = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (idx[i] < 1 || idx[i] > s[i])
            throw ShapeError("index out of range on axis " + std::to_string(i));
        flat = flat * s[i] + (idx[i] - 1);
    }
    return flat;
}

inline MultiIndex flat_to_multi(const Shape& s, std::size_t flat) {
    if (flat >= shape_size(s)) throw ShapeError("flat offset out of range");
    MultiIndex idx;
    idx.coords.resize(s.size());
    for (std::size_t i = s.size(); i-- > 0;) {
        idx[i] = flat % s[i] + 1;
        flat /= s[i];
    }
    return idx;
}

// Advance a 1-based multi-index in row-major order; returns false after the last entry.
inline bool next_index(const Shape& s, MultiIndex& idx) {
    for (std::size_t i = s.size(); i-- > 0;) {
        if (idx[i] < s[i]) {
            ++idx[i];
            return true;
        }
        idx[i] = 1;
    }
    return false;
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        check_shape(shape_);
        if (!std::isfinite(fill)) throw DomainError("non-finite fill value");
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_);
        if (data_.size() != shape_size(shape_))
            throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_to_string(shape_));
        for (double v : data_)
            if (!std::isfinite(v)) throw DomainError("tensor data contains NaN or Inf");
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double& operator()(const MultiIndex& idx) { return data_[multi_to_flat(shape_, idx)]; }
    double operator()(const MultiIndex& idx) const { return data_[multi_to_flat(shape_, idx)]; }

    double at(std::initializer_list<std::size_t> idx) const { return (*this)(MultiIndex(idx)); }
    double& at(std::initializer_list<std::size_t> idx) { return (*this)(MultiIndex(idx)); }

    Tensor& operator+=(const Tensor& o) {
        same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double a) {
        for (double& v : data_) v *= a;
        return *this;
    }
    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(double s, Tensor a) { return a *= s; }
    friend Tensor operator*(Tensor a, double s) { return a *= s; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    void same_shape(const Tensor& o) const {
        if (o.shape_ != shape_)
            throw ShapeError("shape mismatch " + shape_to_string(shape_) + " vs " + shape_to_string(o.shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

inline Tensor outer_product(const std::vector<std::vector<double>>& factors) {
    if (factors.empty()) throw ShapeError("outer product needs at least one factor");
    Shape s;
    for (const auto& f : factors) s.push_back(f.size());
    check_shape(s);
    std::vector<double> data(1, 1.0);
    for (const auto& f : factors) {
        std::vector<double> next;
        next.reserve(data.size() * f.size());
        for (double a : data)
            for (double b : f) next.push_back(a * b);
        data = std::move(next);
    }
    return Tensor(s, std::move(data));
}

// Checks the factor lengths against an expected shape before forming the product.
inline Tensor outer_product(const std::vector<std::vector<double>>& factors, const Shape& expected) {
    if (factors.size() != expected.size()) throw ShapeError("factor count does not match tensor rank");
    for (std::size_t i = 0; i < factors.size(); ++i)
        if (factors[i].size() != expected[i])
            throw ShapeError("factor " + std::to_string(i) + " has length " + std::to_string(factors[i].size()) +
                             ", axis extent is " + std::to_string(expected[i]));
    return outer_product(factors);
}

inline double inner_product(const Tensor& f, const Tensor& g) {
    if (f.shape() != g.shape())
        throw ShapeError("inner product of " + shape_to_string(f.shape()) + " and " + shape_to_string(g.shape()));
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
    return s;
}

inline double frobenius_sq(const Tensor& f) {
    double s = 0.0;
    for (double v : f.data()) s += v * v;
    return s;
}

inline double l1_norm(const Tensor& f) {
    double s = 0.0;
    for (double v : f.data()) s += std::abs(v);
    return s;
}

inline double max_abs(const Tensor& f) {
    double m = 0.0;
    for (double v : f.data()) m = std::max(m, std::abs(v));
    return m;
}

namespace detail {

// Calls fn(in_fiber, out_fiber) for every 1-D fiber along `axis`. Fibers are copied into
// contiguous buffers, so fn sees plain arrays of length in.extent(axis) and out_len.
template <class Fn>
Tensor map_fibers(const Tensor& in, std::size_t axis, std::size_t out_len, Fn&& fn) {
    const Shape& s = in.shape();
    if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range");
    Shape os = s;
    os[axis] = out_len;
    Tensor out(os);
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    const std::size_t n = s[axis];
    std::vector<double> a(n), b(out_len);
    auto src = in.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t r = 0; r < inner; ++r) {
            const std::size_t base_in = o * n * inner + r;
            for (std::size_t j = 0; j < n; ++j) a[j] = src[base_in + j * inner];
            std::fill(b.begin(), b.end(), 0.0);
            fn(a.data(), b.data());
            const std::size_t base_out = o * out_len * inner + r;
            for (std::size_t j = 0; j < out_len; ++j) dst[base_out + j * inner] = b[j];
        }
    }
    return out;
}

}  // namespace detail

// Multiplies every fiber along `axis` by the row-major m x n matrix `mat`.
inline Tensor mode_product(const Tensor& in, std::size_t axis, const std::vector<double>& mat, std::size_t m) {
    const std::size_t n = in.extent(axis);
    if (mat.size() != m * n) throw ShapeError("mode product matrix has wrong size");
    return detail::map_fibers(in, axis, m, [&](const double* a, double* b) {
        for (std::size_t r = 0; r < m; ++r) {
            double s = 0.0;
            const double* row = mat.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * a[j];
            b[r] = s;
        }
    });
}

// result axis i holds input axis perm[i].
inline Tensor permute_axes(const Tensor& f, const std::vector<std::size_t>& perm) {
    const Shape& s = f.shape();
    if (perm.size() != s.size()) throw ShapeError("permutation rank mismatch");
    std::vector<bool> seen(s.size(), false);
    for (auto p : perm) {
        if (p >= s.size() || seen[p]) throw ShapeError("invalid axis permutation");
        seen[p] = true;
    }
    Shape ns(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ns[i] = s[perm[i]];
    Tensor out(ns);
    MultiIndex src(std::vector<std::size_t>(s.size(), 1));
    MultiIndex dst(std::vector<std::size_t>(s.size(), 1));
    do {
        for (std::size_t i = 0; i < s.size(); ++i) dst[i] = src[perm[i]];
        out(dst) = f(src);
    } while (next_index(s, src));
    return out;
}

}  // namespace vtf
