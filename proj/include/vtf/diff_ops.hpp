#pragma once

#include <cmath>
#include <vector>

#include "vtf/tensor.hpp"

namespace vtf {

inline double binomial(int n, int r) {
    if (r < 0 || r > n) return 0.0;
    double c = 1.0;
    for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
    return std::round(c);
}

// literal: D_M^k carries the extra n_M^{k-1} factor whenever |M| < d.
// consistent: the extra factor is dropped so every margin scales like D^k.
enum class MarginScaling { literal, consistent };

struct DiffSpec {
    int k = 1;
    std::vector<std::size_t> axes;  // 0-based, sorted, nonempty
    Shape shape;
    MarginScaling scaling = MarginScaling::literal;

    static DiffSpec total(const Shape& shape, int k) {
        DiffSpec s;
        s.k = k;
        s.shape = shape;
        for (std::size_t i = 0; i < shape.size(); ++i) s.axes.push_back(i);
        return s;
    }

    static DiffSpec margin(const Shape& shape, int k, std::vector<std::size_t> axes,
                           MarginScaling scaling = MarginScaling::literal) {
        DiffSpec s;
        s.k = k;
        s.shape = shape;
        s.axes = std::move(axes);
        s.scaling = scaling;
        return s;
    }

    void validate() const {
        check_shape(shape);
        if (axes.empty()) throw ShapeError("difference operator needs a nonempty axis set");
        if (k < 1) throw OrderError("order k must be at least 1");
        for (std::size_t a = 0; a < axes.size(); ++a) {
            if (axes[a] >= shape.size()) throw ShapeError("axis " + std::to_string(axes[a]) + " out of range");
            if (a > 0 && axes[a] <= axes[a - 1]) throw ShapeError("axes must be strictly increasing");
            if (static_cast<std::size_t>(k) >= shape[axes[a]])
                throw OrderError("order k=" + std::to_string(k) + " needs extent > k on axis " +
                                 std::to_string(axes[a]));
        }
    }

    // n_M^{k-1} when |M| < d under literal scaling, otherwise 1.
    double prefactor() const {
        if (scaling == MarginScaling::consistent || axes.size() == shape.size()) return 1.0;
        double nm = 1.0;
        for (auto a : axes) nm *= static_cast<double>(shape[a]);
        return std::pow(nm, k - 1);
    }

    Shape reduced_shape() const {
        Shape r = shape;
        for (auto a : axes) r[a] -= k;
        return r;
    }
};

namespace detail {

inline std::vector<double> diff_stencil(int k, std::size_t n) {
    std::vector<double> c(k + 1);
    const double scale = std::pow(static_cast<double>(n), k - 1);
    for (int l = 0; l <= k; ++l) c[l] = (l % 2 ? -1.0 : 1.0) * binomial(k, l) * scale;
    return c;
}

}  // namespace detail

// Output position p (0-based) corresponds to paper index j_i = p + k + 1.
inline Tensor apply_axis_diff(const Tensor& f, std::size_t axis, int k) {
    if (axis >= f.rank()) throw ShapeError("axis out of range");
    const std::size_t n = f.extent(axis);
    if (k < 1 || static_cast<std::size_t>(k) >= n)
        throw OrderError("order k=" + std::to_string(k) + " invalid for extent " + std::to_string(n));
    const auto c = detail::diff_stencil(k, n);
    const std::size_t m = n - k;
    return detail::map_fibers(f, axis, m, [&](const double* a, double* b) {
        for (std::size_t p = 0; p < m; ++p) {
            double s = 0.0;
            for (int l = 0; l <= k; ++l) s += c[l] * a[p + k - l];
            b[p] = s;
        }
    });
}

// Transpose stencil: scatters each reduced entry back onto its k+1 sources.
inline Tensor apply_axis_diff_adjoint(const Tensor& b, std::size_t axis, int k, std::size_t n) {
    if (axis >= b.rank()) throw ShapeError("axis out of range");
    if (k < 1 || static_cast<std::size_t>(k) >= n) throw OrderError("order k invalid for extent");
    if (b.extent(axis) != n - k) throw ShapeError("adjoint input has wrong reduced extent");
    const auto c = detail::diff_stencil(k, n);
    const std::size_t m = n - k;
    return detail::map_fibers(b, axis, n, [&](const double* in, double* out) {
        for (std::size_t p = 0; p < m; ++p)
            for (int l = 0; l <= k; ++l) out[p + k - l] += c[l] * in[p];
    });
}

inline Tensor apply_total_diff(const Tensor& f, const DiffSpec& spec) {
    if (f.shape() != spec.shape) throw ShapeError("tensor shape does not match DiffSpec");
    spec.validate();
    Tensor out = f;
    for (auto a : spec.axes) out = apply_axis_diff(out, a, spec.k);
    const double pf = spec.prefactor();
    if (pf != 1.0) out *= pf;
    return out;
}

inline Tensor apply_total_diff_adjoint(const Tensor& b, const DiffSpec& spec) {
    spec.validate();
    if (b.shape() != spec.reduced_shape()) throw ShapeError("adjoint input does not have the reduced shape");
    Tensor out = b;
    for (auto a : spec.axes) out = apply_axis_diff_adjoint(out, a, spec.k, spec.shape[a]);
    const double pf = spec.prefactor();
    if (pf != 1.0) out *= pf;
    return out;
}

inline Tensor apply_total_diff(const Tensor& f, int k) { return apply_total_diff(f, DiffSpec::total(f.shape(), k)); }

inline double vitali_tv(const Tensor& f, int k) { return l1_norm(apply_total_diff(f, k)); }

}  // namespace vtf
