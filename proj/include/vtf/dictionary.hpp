#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "vtf/diff_ops.hpp"
#include "vtf/tensor.hpp"

namespace vtf {

inline void check_order(std::size_t n, int k) {
    if (k < 1 || static_cast<std::size_t>(k) >= n)
        throw OrderError("order k=" + std::to_string(k) + " requires 1 <= k <= n-1 (n=" + std::to_string(n) + ")");
}

// Original dictionary, built by the defining recursion. Column j-1 holds phi^k_j.
inline Eigen::MatrixXd build_phi(std::size_t n, int k) {
    check_order(n, k);
    const Eigen::Index N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index j = 0; j < N; ++j) prev.col(j).tail(N - j).setOnes();
    for (int order = 2; order <= k; ++order) {
        Eigen::MatrixXd cur = prev;
        // columns j >= order (1-based) take the scaled suffix sum of the previous order's columns
        Eigen::VectorXd suffix = Eigen::VectorXd::Zero(N);
        for (Eigen::Index j = N - 1; j >= order - 1; --j) {
            suffix += prev.col(j);
            cur.col(j) = suffix / static_cast<double>(n);
        }
        prev = std::move(cur);
    }
    return prev;
}

// phi^k_j(j') = C(j'-j+k-1, k-1) / n^{k-1} for j' >= j, valid for j >= k.
inline Eigen::VectorXd phi_closed_form(std::size_t n, int k, std::size_t j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const double scale = std::pow(static_cast<double>(n), k - 1);
    for (std::size_t jp = j; jp <= n; ++jp) v(jp - 1) = binomial(static_cast<int>(jp - j) + k - 1, k - 1) / scale;
    return v;
}

// The truncated-power form n^{-k+1} (j'-j+1)^{k-1} 1{j' >= j}.
inline Eigen::VectorXd phi_power_form(std::size_t n, int k, std::size_t j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const double scale = std::pow(static_cast<double>(n), k - 1);
    for (std::size_t jp = j; jp <= n; ++jp) v(jp - 1) = std::pow(static_cast<double>(jp - j + 1), k - 1) / scale;
    return v;
}

class Dictionary1D {
public:
    Dictionary1D(std::size_t n, int k) : n_(n), k_(k) {
        check_order(n, k);
        const Eigen::Index N = static_cast<Eigen::Index>(n);
        q_.resize(N, k);
        for (int j = 1; j <= k; ++j) {
            // phi^j_j is a degree j-1 polynomial on [j:n]
            Eigen::VectorXd c = phi_closed_form(n, j, static_cast<std::size_t>(j));
            for (int pass = 0; pass < 2; ++pass)
                for (int l = 0; l < j - 1; ++l) c -= q_.col(l) * (q_.col(l).dot(c) / static_cast<double>(n));
            const double nrm = c.norm();
            if (!(nrm > 1e-300)) throw OrderError("rank deficient nullspace basis");
            q_.col(j - 1) = c * (std::sqrt(static_cast<double>(n)) / nrm);
        }
        scale_ = std::pow(static_cast<double>(n), -(k - 1));
    }

    std::size_t n() const { return n_; }
    int k() const { return k_; }
    // n x k, columns are the first k partially orthonormalized atoms (squared norm n).
    const Eigen::MatrixXd& nullspace_basis() const { return q_; }

    void project_out(double* x) const {
        Eigen::Map<Eigen::VectorXd> v(x, static_cast<Eigen::Index>(n_));
        for (int pass = 0; pass < 2; ++pass) {
            Eigen::VectorXd c = q_.transpose() * v / static_cast<double>(n_);
            v -= q_ * c;
        }
    }

    // out (length n) = sum_{j>k} coef[j-k-1] * tilde_phi_j
    void synthesize(const double* coef, double* out) const {
        const std::size_t n = n_;
        for (std::size_t p = 0; p < n; ++p) out[p] = p < static_cast<std::size_t>(k_) ? 0.0 : coef[p - k_];
        for (int r = 0; r < k_; ++r)
            for (std::size_t p = 1; p < n; ++p) out[p] += out[p - 1];
        for (std::size_t p = 0; p < n; ++p) out[p] *= scale_;
        project_out(out);
    }

    // out (length n-k) = <tilde_phi_j, x> for j = k+1..n
    void analyze(const double* x, double* out) const {
        std::vector<double> t(x, x + n_);
        project_out(t.data());
        for (int r = 0; r < k_; ++r)
            for (std::size_t p = n_ - 1; p-- > 0;) t[p] += t[p + 1];
        for (std::size_t p = static_cast<std::size_t>(k_); p < n_; ++p) out[p - k_] = t[p] * scale_;
    }

    // Column j (1-based) of the partially orthonormalized dictionary.
    Eigen::VectorXd tilde_column(std::size_t j) const {
        if (j < 1 || j > n_) throw ShapeError("dictionary column out of range");
        if (j <= static_cast<std::size_t>(k_)) return q_.col(static_cast<Eigen::Index>(j - 1));
        std::vector<double> e(n_ - k_, 0.0);
        e[j - k_ - 1] = 1.0;
        Eigen::VectorXd out(static_cast<Eigen::Index>(n_));
        synthesize(e.data(), out.data());
        return out;
    }

    Eigen::MatrixXd tilde_matrix() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        for (std::size_t j = 1; j <= n_; ++j) m.col(static_cast<Eigen::Index>(j - 1)) = tilde_column(j);
        return m;
    }

private:
    std::size_t n_;
    int k_;
    double scale_;
    Eigen::MatrixXd q_;
};

inline Dictionary1D build_tilde_phi(std::size_t n, int k) { return Dictionary1D(n, k); }

inline std::shared_ptr<const Dictionary1D> dictionary(std::size_t n, int k) {
    static std::mutex mu;
    static std::map<std::pair<std::size_t, int>, std::shared_ptr<const Dictionary1D>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto d = std::make_shared<const Dictionary1D>(n, k);
    cache.emplace(key, d);
    return d;
}

using DictionarySet = std::vector<std::shared_ptr<const Dictionary1D>>;

inline DictionarySet dictionaries(const Shape& shape, int k) {
    DictionarySet out;
    for (auto n : shape) out.push_back(dictionary(n, k));
    return out;
}

inline Tensor product_atom(const DictionarySet& dicts, const MultiIndex& idx) {
    if (idx.size() != dicts.size()) throw ShapeError("atom index rank mismatch");
    std::vector<std::vector<double>> factors;
    for (std::size_t i = 0; i < dicts.size(); ++i) {
        Eigen::VectorXd c = dicts[i]->tilde_column(idx[i]);
        factors.emplace_back(c.data(), c.data() + c.size());
    }
    return outer_product(factors);
}

inline Shape coefficient_shape(const Shape& shape, int k) {
    Shape r = shape;
    for (auto& e : r) {
        check_order(e, k);
        e -= k;
    }
    return r;
}

// Projection onto the d-dimensional margin: the complement of the nullspace along every axis.
inline Tensor project_nullspace_complement(const Tensor& f, int k) {
    Tensor out = f;
    for (std::size_t a = 0; a < f.rank(); ++a) {
        auto dict = dictionary(f.extent(a), k);
        out = detail::map_fibers(out, a, f.extent(a), [&](const double* in, double* o) {
            std::copy(in, in + dict->n(), o);
            dict->project_out(o);
        });
    }
    return out;
}

// sum_j beta_j * tilde_phi_{j} over coefficient indices j >= k+1 on every axis.
inline Tensor synthesize(const Tensor& beta, int k) {
    Tensor out = beta;
    for (std::size_t a = 0; a < beta.rank(); ++a) {
        const std::size_t n = beta.extent(a) + k;
        auto dict = dictionary(n, k);
        out = detail::map_fibers(out, a, n, [&](const double* in, double* o) { dict->synthesize(in, o); });
    }
    return out;
}

// Adjoint of synthesize: correlations <tilde_phi_j, r> for all j >= k+1.
inline Tensor analyze(const Tensor& r, int k) {
    Tensor out = r;
    for (std::size_t a = 0; a < r.rank(); ++a) {
        const std::size_t n = r.extent(a);
        auto dict = dictionary(n, k);
        out = detail::map_fibers(out, a, n - k, [&](const double* in, double* o) { dict->analyze(in, o); });
    }
    return out;
}

// Identifies the ANOVA subspace M(M,h): axes in M carry the nullspace complement,
// the remaining axes (in increasing order) carry nullspace atom h (1-based).
struct MarginKey {
    std::vector<std::size_t> axes;
    std::vector<int> h;

    auto operator<=>(const MarginKey&) const = default;

    std::string to_string() const {
        std::string s = "M={";
        for (std::size_t i = 0; i < axes.size(); ++i) s += (i ? "," : "") + std::to_string(axes[i]);
        s += "} h=(";
        for (std::size_t i = 0; i < h.size(); ++i) s += (i ? "," : "") + std::to_string(h[i]);
        return s + ")";
    }
};

inline std::vector<MarginKey> margin_keys(std::size_t d, int k) {
    std::vector<MarginKey> keys;
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        MarginKey base;
        for (std::size_t i = 0; i < d; ++i)
            if (mask >> i & 1) base.axes.push_back(i);
        const std::size_t free = d - base.axes.size();
        std::vector<int> h(free, 1);
        while (true) {
            MarginKey key = base;
            key.h = h;
            keys.push_back(key);
            std::size_t p = free;
            while (p > 0 && h[p - 1] == k) h[--p] = 1;
            if (p == 0) break;
            ++h[p - 1];
        }
    }
    return keys;
}

inline void check_key(const MarginKey& key, std::size_t d, int k) {
    if (key.axes.size() + key.h.size() != d) throw ShapeError("margin key does not match tensor rank");
    for (std::size_t i = 0; i < key.axes.size(); ++i)
        if (key.axes[i] >= d || (i > 0 && key.axes[i] <= key.axes[i - 1])) throw ShapeError("invalid margin axes");
    for (int h : key.h)
        if (h < 1 || h > k) throw ShapeError("margin atom index out of [1:k]");
}

inline std::size_t margin_dimension(const Shape& shape, int k, const MarginKey& key) {
    std::size_t dim = 1;
    for (auto a : key.axes) dim *= shape[a] - k;
    return dim;
}

namespace detail {

inline std::vector<std::size_t> complement_axes(std::size_t d, const std::vector<std::size_t>& axes) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d; ++i)
        if (std::find(axes.begin(), axes.end(), i) == axes.end()) out.push_back(i);
    return out;
}

inline Tensor project_margin(const Tensor& f, int k, const MarginKey& key) {
    const auto other = complement_axes(f.rank(), key.axes);
    Tensor out = f;
    for (auto a : key.axes) {
        auto dict = dictionary(f.extent(a), k);
        out = map_fibers(out, a, f.extent(a), [&](const double* in, double* o) {
            std::copy(in, in + dict->n(), o);
            dict->project_out(o);
        });
    }
    for (std::size_t p = 0; p < other.size(); ++p) {
        const std::size_t a = other[p];
        auto dict = dictionary(f.extent(a), k);
        const Eigen::VectorXd qh = dict->nullspace_basis().col(key.h[p] - 1);
        const std::size_t n = dict->n();
        out = map_fibers(out, a, n, [&](const double* in, double* o) {
            double c = 0.0;
            for (std::size_t j = 0; j < n; ++j) c += qh(j) * in[j];
            c /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) o[j] = c * qh(j);
        });
    }
    return out;
}

}  // namespace detail

inline Tensor margin_component(const Tensor& f, int k, const MarginKey& key) {
    check_key(key, f.rank(), k);
    return detail::project_margin(f, k, key);
}

inline std::map<MarginKey, Tensor> anova_decompose(const Tensor& f, int k) {
    for (auto n : f.shape()) check_order(n, k);
    std::map<MarginKey, Tensor> out;
    for (const auto& key : margin_keys(f.rank(), k)) out.emplace(key, detail::project_margin(f, k, key));
    return out;
}

// Contract the axes outside M against their nullspace atoms; the result lives on the axes of M.
// For M empty the result is a single-entry tensor of shape (1).
inline Tensor margin_flatten_unchecked(const Tensor& comp, int k, const MarginKey& key) {
    check_key(key, comp.rank(), k);
    const auto other = detail::complement_axes(comp.rank(), key.axes);
    Tensor out = comp;
    for (std::size_t p = 0; p < other.size(); ++p) {
        const std::size_t a = other[p];
        auto dict = dictionary(comp.extent(a), k);
        const Eigen::VectorXd qh = dict->nullspace_basis().col(key.h[p] - 1);
        const std::size_t n = dict->n();
        out = detail::map_fibers(out, a, 1, [&](const double* in, double* o) {
            double c = 0.0;
            for (std::size_t j = 0; j < n; ++j) c += qh(j) * in[j];
            o[0] = c / static_cast<double>(n);
        });
    }
    Shape s;
    for (auto a : key.axes) s.push_back(comp.extent(a));
    if (s.empty()) s.push_back(1);
    return Tensor(s, out.values());
}

inline Tensor margin_expand(const Tensor& fbar, const Shape& full, int k, const MarginKey& key) {
    check_key(key, full.size(), k);
    Shape expect;
    for (auto a : key.axes) expect.push_back(full[a]);
    if (expect.empty()) expect.push_back(1);
    if (fbar.shape() != expect) throw ShapeError("flattened margin has shape " + shape_to_string(fbar.shape()));
    const auto other = detail::complement_axes(full.size(), key.axes);
    std::vector<Eigen::VectorXd> atoms;
    for (std::size_t p = 0; p < other.size(); ++p)
        atoms.push_back(dictionary(full[other[p]], k)->nullspace_basis().col(key.h[p] - 1));
    Tensor out(full);
    MultiIndex idx(std::vector<std::size_t>(full.size(), 1));
    const auto mstrides = row_major_strides(expect);
    std::size_t flat = 0;
    do {
        double v = 1.0;
        std::size_t off = 0;
        for (std::size_t p = 0; p < key.axes.size(); ++p) off += (idx[key.axes[p]] - 1) * mstrides[p];
        for (std::size_t p = 0; p < other.size(); ++p) v *= atoms[p](static_cast<Eigen::Index>(idx[other[p]] - 1));
        out[flat++] = v * fbar[off];
    } while (next_index(full, idx));
    return out;
}

inline Tensor margin_flatten(const Tensor& comp, int k, const MarginKey& key) {
    Tensor fbar = margin_flatten_unchecked(comp, k, key);
    const double nrm = std::sqrt(frobenius_sq(comp));
    Tensor back = margin_expand(fbar, comp.shape(), k, key);
    // components on axes in M must also be free of the nullspace there
    Tensor back_proj = detail::project_margin(back, k, key);
    const double res = std::sqrt(frobenius_sq(comp - back_proj));
    if (res > 1e-8 * std::max(nrm, 1e-300) && nrm > 0.0)
        throw DomainError("tensor is not in margin subspace " + key.to_string() + " (residual " +
                          std::to_string(res) + ")");
    return fbar;
}

}  // namespace vtf
