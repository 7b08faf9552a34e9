#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "vtf/dictionary.hpp"
#include "vtf/diff_ops.hpp"
#include "vtf/tensor.hpp"

namespace vtf {

enum class SolverKind { active_set, accelerated_proximal_gradient, coordinate_descent };

struct FitConfig {
    double lambda = 0.0;
    int max_iters = 5000;
    std::optional<double> tol;  // KKT tolerance in gradient units; default 1e-8 (1 + |Y|^2/n)
    SolverKind solver_kind = SolverKind::active_set;
    // Multiplies the l1 penalty; margin fits under literal D_M^k scaling use n_M^{k-1}.
    double penalty_scale = 1.0;
    std::optional<Tensor> warm_start;
    bool record_objective = false;
};

struct FitResult {
    Tensor coefficients;  // beta, reduced shape (n_i - k per axis)
    Tensor fitted;        // the fitted d-dimensional margin, full shape
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    double lambda = 0.0;
    std::vector<double> objective_trace;
};

inline double default_tolerance(const Tensor& Y) {
    return 1e-8 * (1.0 + frobenius_sq(Y) / static_cast<double>(Y.size()));
}

inline double lambda_max(const Tensor& Y, int k, double penalty_scale = 1.0) {
    Tensor c = analyze(Y, k);
    return max_abs(c) / (static_cast<double>(Y.size()) * penalty_scale);
}

namespace detail {

inline double kkt_from_correlations(const Tensor& c, const Tensor& beta, double n, double lam) {
    double worst = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const double g = -2.0 * c[j] / n;
        double v;
        if (beta[j] > 0)
            v = std::abs(g + 2.0 * lam);
        else if (beta[j] < 0)
            v = std::abs(g - 2.0 * lam);
        else
            v = std::max(0.0, std::abs(g) - 2.0 * lam);
        worst = std::max(worst, v);
    }
    return worst;
}

inline double objective_value(const Tensor& y, const Tensor& fit, const Tensor& beta, double lam) {
    return frobenius_sq(y - fit) / static_cast<double>(y.size()) + 2.0 * lam * l1_norm(beta);
}

}  // namespace detail

// Max violation of the subgradient optimality conditions, in gradient units.
inline double kkt_check(const Tensor& Y, int k, double lambda, const Tensor& beta, double penalty_scale = 1.0) {
    if (beta.shape() != coefficient_shape(Y.shape(), k)) throw ShapeError("coefficient tensor has wrong shape");
    Tensor r = Y - synthesize(beta, k);
    Tensor c = analyze(r, k);
    return detail::kkt_from_correlations(c, beta, static_cast<double>(Y.size()), lambda * penalty_scale);
}

namespace detail {

class ActiveSetSolver {
public:
    ActiveSetSolver(const Tensor& y, int k, double lam, double tol, int max_iters, bool trace)
        : y_(y), k_(k), lam_(lam), tol_(tol), max_iters_(max_iters), trace_(trace), n_(static_cast<double>(y.size())),
          cshape_(coefficient_shape(y.shape(), k)), beta_(cshape_) {}

    void warm(const Tensor& b) {
        if (b.shape() != cshape_) throw ShapeError("warm start has wrong shape");
        for (std::size_t j = 0; j < b.size(); ++j)
            if (b[j] != 0.0) {
                active_.push_back(j);
                coef_.push_back(b[j]);
            }
    }

    FitResult run() {
        const double thr = n_ * lam_;
        const double slack = 0.25 * tol_ * n_;  // correlation units
        int it = 0;
        refresh();
        while (true) {
            Tensor c = analyze(y_ - fit_, k_);
            materialize_beta();
            const double kkt = kkt_from_correlations(c, beta_, n_, lam_);
            if (kkt <= tol_) return finish(kkt, it);
            if (++it > max_iters_) throw ConvergenceError("active-set solver did not converge", kkt, it);

            // active coefficients off their optimality condition are resolved first
            bool active_ok = true;
            for (std::size_t a = 0; a < active_.size(); ++a) {
                const double s = coef_[a] > 0 ? 1.0 : -1.0;
                if (std::abs(c[active_[a]] - thr * s) > slack) active_ok = false;
            }
            std::vector<int> signs(active_.size());
            for (std::size_t a = 0; a < active_.size(); ++a) signs[a] = coef_[a] > 0 ? 1 : -1;
            if (active_ok) {
                std::vector<std::pair<double, std::size_t>> viol;
                std::vector<bool> is_active(c.size(), false);
                for (auto j : active_) is_active[j] = true;
                for (std::size_t j = 0; j < c.size(); ++j)
                    if (!is_active[j] && std::abs(c[j]) > thr + slack) viol.emplace_back(std::abs(c[j]), j);
                std::sort(viol.begin(), viol.end(), std::greater<>());
                const std::size_t cap = std::max<std::size_t>(1, active_.size() / 4 + 4);
                // neighbouring atoms are nearly collinear for k >= 2; adding them together makes the
                // sign-restricted solve blow up, so a batch only takes well separated violators
                std::vector<MultiIndex> picked;
                std::size_t add = 0;
                for (std::size_t v = 0; v < viol.size() && picked.size() < cap; ++v) {
                    const std::size_t j = viol[v].second;
                    const MultiIndex mj = flat_to_multi(cshape_, j);
                    bool near = false;
                    for (const auto& o : picked) {
                        std::size_t cheb = 0;
                        for (std::size_t i = 0; i < mj.size(); ++i)
                            cheb = std::max(cheb, mj[i] > o[i] ? mj[i] - o[i] : o[i] - mj[i]);
                        near = near || cheb <= static_cast<std::size_t>(k_);
                    }
                    if (near) continue;
                    picked.push_back(mj);
                    active_.push_back(j);
                    coef_.push_back(0.0);
                    signs.push_back(c[j] > 0 ? 1 : -1);
                    ++add;
                }
                if (add == 0) {
                    // only roundoff remains: re-solve the active system and re-check
                    feature_sign_step(signs);
                    continue;
                }
                if (add > 1) {
                    // single additions always descend; a batch that does not is undone and
                    // retried with the top violator alone
                    const auto saved_active = active_;
                    const auto saved_coef = coef_;
                    const auto saved_signs = signs;
                    const double before = current_objective();  // new entries enter at zero
                    feature_sign_step(signs);
                    if (current_objective() < before) continue;
                    active_.assign(saved_active.begin(), saved_active.end() - static_cast<long>(add) + 1);
                    coef_.assign(saved_coef.begin(), saved_coef.end() - static_cast<long>(add) + 1);
                    signs.assign(saved_signs.begin(), saved_signs.end() - static_cast<long>(add) + 1);
                    refresh();
                }
            }
            feature_sign_step(signs);
        }
    }

private:
    const Eigen::VectorXd& column(std::size_t j) {
        auto it = cols_.find(j);
        if (it != cols_.end()) return it->second;
        Tensor e(cshape_);
        e[j] = 1.0;
        Tensor a = synthesize(e, k_);
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(a.data().data(), static_cast<Eigen::Index>(a.size()));
        return cols_.emplace(j, std::move(v)).first->second;
    }

    Eigen::MatrixXd design() {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(y_.size()), static_cast<Eigen::Index>(active_.size()));
        for (std::size_t a = 0; a < active_.size(); ++a) X.col(static_cast<Eigen::Index>(a)) = column(active_[a]);
        return X;
    }

    double restricted_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& yv, const Eigen::VectorXd& b) const {
        return (yv - X * b).squaredNorm() / n_ + 2.0 * lam_ * b.lpNorm<1>();
    }

    // One feature-sign iteration: solve the sign-restricted quadratic, then line search over
    // sign changes, dropping coefficients that reach zero.
    void feature_sign_step(const std::vector<int>& signs) {
        if (active_.empty()) return;
        const Eigen::MatrixXd X = design();
        const Eigen::Map<const Eigen::VectorXd> yv(y_.data().data(), static_cast<Eigen::Index>(y_.size()));
        const Eigen::Index m = X.cols();
        Eigen::VectorXd theta(m);
        for (Eigen::Index a = 0; a < m; ++a) theta(a) = signs[a];
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
        const Eigen::MatrixXd R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
        auto solve_normal = [&](const Eigen::VectorXd& rhs) {
            Eigen::VectorXd z = R.transpose().triangularView<Eigen::Lower>().solve(rhs);
            return Eigen::VectorXd(R.triangularView<Eigen::Upper>().solve(z));
        };
        Eigen::VectorXd qty = (qr.householderQ().transpose() * yv).head(m);
        Eigen::VectorXd bnew = R.triangularView<Eigen::Upper>().solve(qty) - n_ * lam_ * solve_normal(theta);
        // one step of iterative refinement on the normal equations
        Eigen::VectorXd resid = X.transpose() * (yv - X * bnew) - n_ * lam_ * theta;
        bnew += solve_normal(resid);

        Eigen::VectorXd bold = Eigen::Map<const Eigen::VectorXd>(coef_.data(), m);
        std::vector<double> ts{1.0};
        for (Eigen::Index a = 0; a < m; ++a) {
            if (bold(a) != 0.0 && (bold(a) > 0) != (bnew(a) > 0)) {
                const double t = bold(a) / (bold(a) - bnew(a));
                if (t > 0.0 && t < 1.0) ts.push_back(t);
            }
        }
        Eigen::VectorXd best = bnew;
        double best_obj = restricted_objective(X, yv, bnew);
        bool sign_consistent = true;
        for (Eigen::Index a = 0; a < m; ++a)
            if (bnew(a) * theta(a) < 0) sign_consistent = false;
        if (!sign_consistent) {
            for (double t : ts) {
                Eigen::VectorXd b = bold + t * (bnew - bold);
                for (Eigen::Index a = 0; a < m; ++a)
                    if (bold(a) != 0.0 && std::abs(b(a)) <= 1e-14 * std::abs(bold(a))) b(a) = 0.0;
                const double o = restricted_objective(X, yv, b);
                if (o < best_obj) {
                    best_obj = o;
                    best = b;
                }
            }
        }
        std::vector<std::size_t> na;
        std::vector<double> nc;
        for (Eigen::Index a = 0; a < m; ++a)
            if (best(a) != 0.0) {
                na.push_back(active_[a]);
                nc.push_back(best(a));
            }
        active_ = std::move(na);
        coef_ = std::move(nc);
        refresh();
        if (trace_) trace_values_.push_back(current_objective());
    }

    void refresh() {
        fit_ = Tensor(y_.shape());
        auto f = fit_.data();
        for (std::size_t a = 0; a < active_.size(); ++a) {
            const auto& col = column(active_[a]);
            for (std::size_t p = 0; p < f.size(); ++p) f[p] += coef_[a] * col(static_cast<Eigen::Index>(p));
        }
    }

    void materialize_beta() {
        beta_ = Tensor(cshape_);
        for (std::size_t a = 0; a < active_.size(); ++a) beta_[active_[a]] = coef_[a];
    }

    double current_objective() {
        materialize_beta();
        return objective_value(y_, fit_, beta_, lam_);
    }

    FitResult finish(double kkt, int it) {
        materialize_beta();
        FitResult r;
        r.coefficients = beta_;
        r.fitted = fit_;
        r.objective = objective_value(y_, fit_, beta_, lam_);
        r.kkt_residual = kkt;
        r.iterations = it;
        r.objective_trace = trace_values_;
        return r;
    }

    const Tensor& y_;
    int k_;
    double lam_, tol_;
    int max_iters_;
    bool trace_;
    double n_;
    Shape cshape_;
    Tensor beta_;
    Tensor fit_;
    std::vector<std::size_t> active_;
    std::vector<double> coef_;
    std::unordered_map<std::size_t, Eigen::VectorXd> cols_;
    std::vector<double> trace_values_;
};

inline double soft(double x, double t) { return x > t ? x - t : (x < -t ? x + t : 0.0); }

inline double operator_norm_sq(const Shape& shape, int k) {
    // power iteration on X'X
    Shape cs = coefficient_shape(shape, k);
    Tensor b(cs);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> g;
    for (auto& v : b.data()) v = g(rng);
    double est = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double nb = std::sqrt(frobenius_sq(b));
        b *= 1.0 / nb;
        Tensor nb2 = analyze(synthesize(b, k), k);
        const double e = inner_product(b, nb2);
        if (std::abs(e - est) <= 1e-10 * e) {
            est = e;
            break;
        }
        est = e;
        b = nb2;
    }
    return est * 1.01;
}

inline FitResult fista(const Tensor& y, int k, double lam, double tol, int max_iters, bool trace,
                       const std::optional<Tensor>& warm) {
    const double n = static_cast<double>(y.size());
    const double L = 2.0 * operator_norm_sq(y.shape(), k) / n;
    Shape cs = coefficient_shape(y.shape(), k);
    Tensor b = warm ? *warm : Tensor(cs);
    Tensor z = b;
    double t = 1.0;
    FitResult r;
    double prev_obj = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iters; ++it) {
        Tensor fz = synthesize(z, k);
        Tensor c = analyze(y - fz, k);
        Tensor bn(cs);
        for (std::size_t j = 0; j < bn.size(); ++j) bn[j] = soft(z[j] + (2.0 / (n * L)) * c[j], 2.0 * lam / L);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        Tensor fb = synthesize(bn, k);
        const double obj = objective_value(y, fb, bn, lam);
        if (trace) r.objective_trace.push_back(obj);
        if (obj > prev_obj) {
            // gradient-style restart
            z = b;
            t = 1.0;
            prev_obj = std::numeric_limits<double>::infinity();
            continue;
        }
        z = bn + ((t - 1.0) / tn) * (bn - b);
        b = std::move(bn);
        t = tn;
        prev_obj = obj;
        if (it % 10 == 0 || it == max_iters) {
            Tensor cb = analyze(y - fb, k);
            const double kkt = kkt_from_correlations(cb, b, n, lam);
            if (kkt <= tol) {
                r.coefficients = b;
                r.fitted = fb;
                r.objective = obj;
                r.kkt_residual = kkt;
                r.iterations = it;
                return r;
            }
            if (it == max_iters) throw ConvergenceError("proximal gradient did not converge", kkt, it);
        }
    }
    Tensor fb = synthesize(b, k);
    throw ConvergenceError("proximal gradient did not converge", kkt_from_correlations(analyze(y - fb, k), b, n, lam),
                           max_iters);
}

inline FitResult coordinate_descent(const Tensor& y, int k, double lam, double tol, int max_iters, bool trace,
                                    const std::optional<Tensor>& warm) {
    Shape cs = coefficient_shape(y.shape(), k);
    const std::size_t p = shape_size(cs), N = y.size();
    if (N * p > (std::size_t{1} << 24)) throw ShapeError("coordinate descent is limited to small problems");
    const double n = static_cast<double>(N);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        Tensor e(cs);
        e[j] = 1.0;
        Tensor a = synthesize(e, k);
        X.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(a.data().data(), static_cast<Eigen::Index>(N));
    }
    Eigen::VectorXd cn = X.colwise().squaredNorm();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    if (warm) b = Eigen::Map<const Eigen::VectorXd>(warm->data().data(), static_cast<Eigen::Index>(p));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data().data(), static_cast<Eigen::Index>(N));
    Eigen::VectorXd r = yv - X * b;
    FitResult res;
    for (int it = 1; it <= max_iters; ++it) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
            const double rho = X.col(j).dot(r) + cn(j) * b(j);
            const double nb = soft(rho, n * lam) / cn(j);
            if (nb != b(j)) {
                r -= (nb - b(j)) * X.col(j);
                b(j) = nb;
            }
        }
        Tensor bt(cs, std::vector<double>(b.data(), b.data() + p));
        Eigen::VectorXd fitv = yv - r;
        Tensor ft(y.shape(), std::vector<double>(fitv.data(), fitv.data() + N));
        const double obj = objective_value(y, ft, bt, lam);
        if (trace) res.objective_trace.push_back(obj);
        Eigen::VectorXd c = X.transpose() * r;
        Tensor ct(cs, std::vector<double>(c.data(), c.data() + p));
        const double kkt = kkt_from_correlations(ct, bt, n, lam);
        if (kkt <= tol) {
            res.coefficients = bt;
            res.fitted = ft;
            res.objective = obj;
            res.kkt_residual = kkt;
            res.iterations = it;
            return res;
        }
        if (it == max_iters) throw ConvergenceError("coordinate descent did not converge", kkt, it);
    }
    throw ConvergenceError("coordinate descent did not converge", 0.0, max_iters);
}

}  // namespace detail

// Trend filter for the d-dimensional margin, solved in synthesis form:
// minimize |Y_perp - sum_j b_j tilde_phi_j|^2 / n + 2 lambda * penalty_scale * |b|_1.
inline FitResult fit_margin(const Tensor& Y, int k, const FitConfig& config) {
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) throw DomainError("lambda must be finite and >= 0");
    if (config.penalty_scale <= 0.0) throw DomainError("penalty scale must be positive");
    for (auto e : Y.shape()) check_order(e, k);
    const double tol = config.tol.value_or(default_tolerance(Y));
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    const Tensor y = project_nullspace_complement(Y, k);
    const double lam = config.lambda * config.penalty_scale;
    FitResult r;
    if (config.lambda == 0.0) {
        // unpenalized: the fit is the projection itself, with beta = D^k Y
        r.coefficients = apply_total_diff(y, k);
        r.fitted = y;
        r.objective = 0.0;
        r.kkt_residual = detail::kkt_from_correlations(analyze(y - synthesize(r.coefficients, k), k), r.coefficients,
                                                       static_cast<double>(y.size()), 0.0);
        r.iterations = 0;
    } else {
        switch (config.solver_kind) {
            case SolverKind::active_set: {
                detail::ActiveSetSolver s(y, k, lam, tol, config.max_iters, config.record_objective);
                if (config.warm_start) s.warm(*config.warm_start);
                r = s.run();
                break;
            }
            case SolverKind::accelerated_proximal_gradient:
                r = detail::fista(y, k, lam, tol, config.max_iters, config.record_objective, config.warm_start);
                break;
            case SolverKind::coordinate_descent:
                r = detail::coordinate_descent(y, k, lam, tol, config.max_iters, config.record_objective,
                                               config.warm_start);
                break;
        }
    }
    r.lambda = config.lambda;
    return r;
}

// Solutions along a descending lambda path, each warm-started from the previous one.
inline std::vector<FitResult> fit_path(const Tensor& Y, int k, std::vector<double> lambdas, FitConfig config) {
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    std::vector<FitResult> out;
    for (double l : lambdas) {
        config.lambda = l;
        out.push_back(fit_margin(Y, k, config));
        config.warm_start = out.back().coefficients;
    }
    return out;
}

// lambda_0(t) = sigma * sqrt((2 log 2n + 2t) / n)
inline double universal_lambda(double sigma, double n, double t) {
    return sigma * std::sqrt((2.0 * std::log(2.0 * n) + 2.0 * t) / n);
}

struct MarginFitConfig {
    FitConfig base;
    std::map<MarginKey, double> lambdas;
    MarginScaling scaling = MarginScaling::literal;
};

// lambda_{M,h} = grid_scale * lambda_0(log 2n) for every margin with M nonempty.
inline std::map<MarginKey, double> default_margin_lambdas(const Shape& shape, int k, double sigma,
                                                          double grid_scale = 1.0) {
    const double n = static_cast<double>(shape_size(shape));
    std::map<MarginKey, double> out;
    for (const auto& key : margin_keys(shape.size(), k))
        if (!key.axes.empty()) out[key] = grid_scale * universal_lambda(sigma, n, std::log(2.0 * n));
    return out;
}

struct AnovaFit {
    std::map<MarginKey, FitResult> margins;  // fits on the flattened problems
    std::map<MarginKey, Tensor> components;  // the same estimates embedded in the full shape
    Tensor fitted;
};

inline double margin_penalty_scale(const Shape& shape, int k, const MarginKey& key, MarginScaling scaling) {
    if (scaling == MarginScaling::consistent || key.axes.size() == shape.size()) return 1.0;
    double nm = 1.0;
    for (auto a : key.axes) nm *= static_cast<double>(shape[a]);
    return std::pow(nm, k - 1);
}

inline AnovaFit fit_all_margins(const Tensor& Y, int k, const MarginFitConfig& config) {
    for (auto e : Y.shape()) check_order(e, k);
    AnovaFit out;
    out.fitted = Tensor(Y.shape());
    for (const auto& key : margin_keys(Y.rank(), k)) {
        Tensor ybar = margin_flatten_unchecked(Y, k, key);
        FitResult fr;
        if (key.axes.empty()) {
            fr.coefficients = ybar;
            fr.fitted = ybar;
        } else {
            auto it = config.lambdas.find(key);
            if (it == config.lambdas.end()) throw DomainError("no lambda for margin " + key.to_string());
            FitConfig fc = config.base;
            fc.lambda = it->second;
            fc.penalty_scale = margin_penalty_scale(Y.shape(), k, key, config.scaling);
            fc.warm_start.reset();
            if (!config.base.tol) fc.tol = default_tolerance(ybar);
            fr = fit_margin(ybar, k, fc);
        }
        Tensor comp = margin_expand(fr.fitted, Y.shape(), k, key);
        out.fitted += comp;
        out.components.emplace(key, std::move(comp));
        out.margins.emplace(key, std::move(fr));
    }
    return out;
}

inline AnovaFit fit_all_margins(const Tensor& Y, int k, double sigma, double grid_scale = 1.0,
                                MarginScaling scaling = MarginScaling::literal) {
    MarginFitConfig c;
    c.lambdas = default_margin_lambdas(Y.shape(), k, sigma, grid_scale);
    c.scaling = scaling;
    return fit_all_margins(Y, k, c);
}

}  // namespace vtf
