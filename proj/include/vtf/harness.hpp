#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vtf/active_sets.hpp"
#include "vtf/dictionary.hpp"
#include "vtf/diff_ops.hpp"
#include "vtf/errors.hpp"
#include "vtf/solver.hpp"
#include "vtf/stats.hpp"
#include "vtf/tensor.hpp"

namespace vtf {

// One hyperrectangle [lo, hi] (1-based, inclusive) carrying a product of per-axis polynomials
// in x_i = j_i / n_i; coefficients are in increasing degree.
struct Piece {
    MultiIndex lo, hi;
    std::vector<std::vector<double>> coeffs;
};

enum class SignalKind { pieces, steps, sawtooth, quadrant };

struct SignalSpec {
    SignalKind kind = SignalKind::steps;
    std::size_t count = 2;    // jumps for steps, teeth for sawtooth
    double amplitude = 1.0;
    std::uint64_t seed = 7;   // polynomial draws for quadrant with k >= 2
    std::vector<Piece> pieces;
};

namespace detail {

inline double poly_eval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t p = c.size(); p-- > 0;) v = v * x + c[p];
    return v;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw FormatError("bad number for " + what + ": '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw FormatError("bad integer for " + what + ": '" + s + "'");
    }
}

inline std::size_t parse_count(const std::string& s, const std::string& what) {
    const long long v = parse_int(s, what);
    if (v < 0) throw FormatError(what + " must be nonnegative");
    return static_cast<std::size_t>(v);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::vector<Piece> quadrant_pieces(const Shape& shape, int k, std::uint64_t seed) {
    if (shape.size() != 2) throw DomainError("the quadrant signal needs d = 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t h0 = shape[0] / 2, h1 = shape[1] / 2;
    const double levels[4] = {1.0, 0.0, -0.5, 0.5};
    std::vector<Piece> out;
    int q = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b, ++q) {
            Piece p;
            p.lo = MultiIndex{a ? h0 + 1 : 1, b ? h1 + 1 : 1};
            p.hi = MultiIndex{a ? shape[0] : h0, b ? shape[1] : h1};
            for (int i = 0; i < 2; ++i) {
                std::vector<double> c(static_cast<std::size_t>(k), 0.0);
                if (k == 1) {
                    c[0] = i == 0 ? levels[q] : 1.0;
                } else {
                    for (auto& x : c) x = u(rng);
                }
                p.coeffs.push_back(c);
            }
            out.push_back(std::move(p));
        }
    return out;
}

}  // namespace detail

inline Tensor render_pieces(const std::vector<Piece>& pieces, const Shape& shape, int k) {
    check_shape(shape);
    Tensor f(shape);
    std::vector<char> covered(f.size(), 0);
    for (const auto& p : pieces) {
        if (p.lo.size() != shape.size() || p.hi.size() != shape.size() || p.coeffs.size() != shape.size())
            throw ShapeError("piece rank does not match the shape");
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (p.lo[i] < 1 || p.hi[i] > shape[i] || p.lo[i] > p.hi[i]) throw ShapeError("piece box out of range");
            if (p.coeffs[i].size() > static_cast<std::size_t>(k))
                throw DomainError("piece polynomial degree exceeds k-1");
        }
        Shape ext(shape.size());
        for (std::size_t i = 0; i < shape.size(); ++i) ext[i] = p.hi[i] - p.lo[i] + 1;
        MultiIndex r(std::vector<std::size_t>(shape.size(), 1));
        do {
            MultiIndex j = r;
            double v = 1.0;
            for (std::size_t i = 0; i < shape.size(); ++i) {
                j[i] += p.lo[i] - 1;
                v *= detail::poly_eval(p.coeffs[i], static_cast<double>(j[i]) / static_cast<double>(shape[i]));
            }
            const std::size_t flat = multi_to_flat(shape, j);
            if (covered[flat]) throw DomainError("signal pieces overlap");
            covered[flat] = 1;
            f[flat] = v;
        } while (next_index(ext, r));
    }
    return f;
}

inline Tensor generate_signal(const SignalSpec& spec, const Shape& shape, int k) {
    check_shape(shape);
    if (k < 1) throw OrderError("order k must be at least 1");
    switch (spec.kind) {
        case SignalKind::pieces:
            return render_pieces(spec.pieces, shape, k);
        case SignalKind::quadrant: {
            Tensor f = render_pieces(detail::quadrant_pieces(shape, k, spec.seed), shape, k);
            f *= spec.amplitude;
            return f;
        }
        case SignalKind::steps: {
            // s0 product atoms on the diagonal with alternating signs, so D^k f has exactly s0 nonzeros
            if (spec.count == 0) return Tensor(shape);
            auto dicts = dictionaries(shape, k);
            Tensor f(shape);
            for (std::size_t m = 1; m <= spec.count; ++m) {
                MultiIndex t{std::vector<std::size_t>(shape.size())};
                for (std::size_t i = 0; i < shape.size(); ++i) {
                    const std::size_t span = shape[i] - static_cast<std::size_t>(k);
                    if (spec.count > span) throw DomainError("too many jumps for the extent");
                    t[i] = static_cast<std::size_t>(k) + 1 +
                           static_cast<std::size_t>(std::lround(static_cast<double>(m) * span / (spec.count + 1.0) - 0.5));
                }
                Tensor a = product_atom(dicts, t);
                a *= (m % 2 ? 1.0 : -1.0) * spec.amplitude;
                f += a;
            }
            return f;
        }
        case SignalKind::sawtooth: {
            if (shape.size() != 1) throw DomainError("the sawtooth signal needs d = 1");
            if (spec.count < 1) throw DomainError("sawtooth needs at least one tooth");
            Tensor f(shape);
            const double n = static_cast<double>(shape[0]);
            for (std::size_t a = 0; a < shape[0]; ++a) {
                const double x = spec.count * (a + 0.5) / n;
                f[a] = spec.amplitude * (x - std::floor(x));
            }
            return f;
        }
    }
    throw DomainError("unknown signal kind");
}

inline double total_variation(const Tensor& f, int k) { return l1_norm(apply_total_diff(f, k)); }

inline std::size_t diff_support_size(const Tensor& f, int k, double tol = 1e-12) {
    const Tensor d = apply_total_diff(f, k);
    return static_cast<std::size_t>(std::count_if(d.data().begin(), d.data().end(),
                                                  [&](double x) { return std::abs(x) > tol; }));
}

enum class LambdaRule { universal, grid_scaled, sweep, not_so_slow };
enum class Measure { margin, anova };

struct ExperimentConfig {
    std::size_t d = 1;
    int k = 1;
    std::vector<std::size_t> sizes;  // extent of every axis; total size is n^d
    double sigma = 1.0;
    std::size_t replicates = 10;
    LambdaRule lambda_rule = LambdaRule::universal;
    double lambda_scale = 1.0;
    std::size_t grid_size = 1;             // s for grid_scaled
    std::vector<double> sweep{0.25, 0.5, 1.0, 2.0};  // multiples of lambda_0 for sweep
    Measure measure = Measure::margin;
    SignalSpec signal;
    std::uint64_t seed = 1;
    SolverKind solver = SolverKind::active_set;
    std::size_t threads = 1;

    void validate() const {
        if (d < 1) throw DomainError("d must be at least 1");
        if (k < 1) throw OrderError("k must be at least 1");
        if (replicates < 1) throw DomainError("replicates must be at least 1");
        if (sizes.empty()) throw DomainError("the n schedule is empty");
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            if (sizes[i] <= static_cast<std::size_t>(k)) throw OrderError("every n must exceed k");
            if (i > 0 && sizes[i] <= sizes[i - 1]) throw DomainError("the n schedule must be strictly increasing");
        }
        if (!(sigma >= 0.0)) throw DomainError("sigma must be nonnegative");
        if (!(lambda_scale >= 0.0)) throw DomainError("lambda_scale must be nonnegative");
        if (lambda_rule == LambdaRule::sweep && sweep.empty()) throw DomainError("sweep list is empty");
        if (lambda_rule == LambdaRule::grid_scaled && grid_size < 1) throw DomainError("grid_size must be positive");
        if (measure == Measure::anova && lambda_rule != LambdaRule::universal)
            throw DomainError("anova measure supports lambda_rule = universal only");
        if (threads < 1) throw DomainError("threads must be at least 1");
    }
};

namespace detail {

inline SignalSpec parse_signal(const std::string& v) {
    std::istringstream is(v);
    std::string kind;
    is >> kind;
    SignalSpec s;
    std::vector<std::string> rest;
    for (std::string t; is >> t;) rest.push_back(t);
    if (kind == "steps") {
        s.kind = SignalKind::steps;
    } else if (kind == "sawtooth") {
        s.kind = SignalKind::sawtooth;
        s.count = 3;
    } else if (kind == "quadrant") {
        s.kind = SignalKind::quadrant;
    } else if (kind == "pieces") {
        s.kind = SignalKind::pieces;
        if (!rest.empty()) throw FormatError("pieces take no arguments; add 'piece = ...' lines");
        return s;
    } else {
        throw FormatError("unknown signal kind '" + kind + "'");
    }
    if (rest.size() > 2) throw FormatError("too many signal arguments");
    if (!rest.empty()) {
        if (s.kind == SignalKind::quadrant)
            s.seed = parse_count(rest[0], "signal seed");
        else
            s.count = parse_count(rest[0], "signal count");
    }
    if (rest.size() > 1) s.amplitude = parse_double(rest[1], "signal amplitude");
    return s;
}

// "lo1 lo2 : hi1 hi2 : c c | c c"
inline Piece parse_piece(const std::string& v) {
    auto parts = split(v, ':');
    if (parts.size() != 3) throw FormatError("piece needs 'lo : hi : coefficients'");
    auto ints = [](const std::string& s) {
        std::vector<std::size_t> out;
        std::istringstream is(s);
        for (std::string t; is >> t;) out.push_back(parse_count(t, "piece corner"));
        return out;
    };
    Piece p;
    p.lo = MultiIndex(ints(parts[0]));
    p.hi = MultiIndex(ints(parts[1]));
    for (const auto& axis : split(parts[2], '|')) {
        std::vector<double> c;
        std::istringstream is(axis);
        for (std::string t; is >> t;) c.push_back(parse_double(t, "piece coefficient"));
        p.coeffs.push_back(c);
    }
    return p;
}

}  // namespace detail

// Flat "key = value" text, '#' comments. VTF_SEED in the environment overrides the seed.
inline ExperimentConfig parse_experiment_config(std::istream& is) {
    ExperimentConfig c;
    std::vector<Piece> pieces;
    std::map<std::string, int> seen;
    std::string line;
    int lineno = 0;
    bool have_signal = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key != "piece" && seen[key]++) throw FormatError("duplicate key '" + key + "'");
        if (key == "d") {
            c.d = detail::parse_count(val, key);
        } else if (key == "k") {
            c.k = static_cast<int>(detail::parse_int(val, key));
        } else if (key == "n") {
            c.sizes.clear();
            for (const auto& t : detail::split(val, ',')) c.sizes.push_back(detail::parse_count(t, key));
        } else if (key == "sigma") {
            c.sigma = detail::parse_double(val, key);
        } else if (key == "replicates") {
            c.replicates = detail::parse_count(val, key);
        } else if (key == "lambda_rule") {
            if (val == "universal") c.lambda_rule = LambdaRule::universal;
            else if (val == "grid_scaled") c.lambda_rule = LambdaRule::grid_scaled;
            else if (val == "sweep") c.lambda_rule = LambdaRule::sweep;
            else if (val == "not_so_slow") c.lambda_rule = LambdaRule::not_so_slow;
            else throw FormatError("unknown lambda_rule '" + val + "'");
        } else if (key == "lambda_scale") {
            c.lambda_scale = detail::parse_double(val, key);
        } else if (key == "grid_size") {
            c.grid_size = detail::parse_count(val, key);
        } else if (key == "sweep") {
            c.sweep.clear();
            for (const auto& t : detail::split(val, ',')) c.sweep.push_back(detail::parse_double(t, key));
        } else if (key == "measure") {
            if (val == "margin") c.measure = Measure::margin;
            else if (val == "anova") c.measure = Measure::anova;
            else throw FormatError("unknown measure '" + val + "'");
        } else if (key == "signal") {
            c.signal = detail::parse_signal(val);
            have_signal = true;
        } else if (key == "piece") {
            pieces.push_back(detail::parse_piece(val));
        } else if (key == "seed") {
            c.seed = detail::parse_count(val, key);
        } else if (key == "solver") {
            if (val == "active_set") c.solver = SolverKind::active_set;
            else if (val == "fista") c.solver = SolverKind::accelerated_proximal_gradient;
            else if (val == "cd") c.solver = SolverKind::coordinate_descent;
            else throw FormatError("unknown solver '" + val + "'");
        } else if (key == "threads") {
            c.threads = detail::parse_count(val, key);
        } else {
            throw FormatError("unknown key '" + key + "'");
        }
    }
    if (!pieces.empty()) {
        if (have_signal && c.signal.kind != SignalKind::pieces) throw FormatError("piece lines need signal = pieces");
        c.signal.kind = SignalKind::pieces;
        c.signal.pieces = std::move(pieces);
    } else if (have_signal && c.signal.kind == SignalKind::pieces) {
        throw FormatError("signal = pieces without piece lines");
    }
    if (const char* env = std::getenv("VTF_SEED"); env && *env) c.seed = detail::parse_count(env, "VTF_SEED");
    c.validate();
    return c;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    std::istringstream is(text);
    return parse_experiment_config(is);
}

inline ExperimentConfig read_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config file " + path);
    return parse_experiment_config(is);
}

inline double experiment_lambda(const ExperimentConfig& c, double n, double multiplier = 1.0) {
    const double l0 = universal_lambda(c.sigma, n, std::log(2.0 * n));
    switch (c.lambda_rule) {
        case LambdaRule::universal:
            return c.lambda_scale * l0;
        case LambdaRule::grid_scaled:
            return c.lambda_scale * l0 *
                   std::pow(static_cast<double>(c.grid_size), -(2.0 * c.k - 1) / (2.0 * static_cast<double>(c.d)));
        case LambdaRule::sweep:
            return multiplier * l0;
        case LambdaRule::not_so_slow: {
            const double h = harmonic_number(c.d);
            const double e = 2.0 * c.k - 1.0;
            return c.lambda_scale * c.sigma * std::pow(n, -(h + e) / (2.0 * h + e)) *
                   std::pow(std::log(n), h / (2.0 * h + e));
        }
    }
    return l0;
}

struct RateRow {
    std::size_t n = 0;  // total entries
    std::size_t replicate = 0;
    double mse = 0.0;
    double lambda = 0.0;
    bool converged = true;
    std::uint64_t seed = 0;
};

struct RatePoint {
    std::size_t n = 0;
    double mean_mse = 0.0;
    double se = 0.0;
    double q10 = 0.0, median = 0.0, q90 = 0.0;  // empirical MSE quantiles over replicates
    std::size_t used = 0;
    std::size_t failures = 0;
};

struct RateResult {
    std::vector<RateRow> rows;
    std::vector<RatePoint> points;
    LineFit full;
    LineFit half;  // largest half of the schedule
    bool has_fit = false;
};

inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t n, std::size_t rep) {
    return detail::splitmix64(detail::splitmix64(seed ^ detail::splitmix64(n)) + rep);
}

namespace detail {

inline double pairwise_sum(const double* x, std::size_t m) {
    if (m <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += x[i];
        return s;
    }
    return pairwise_sum(x, m / 2) + pairwise_sum(x + m / 2, m - m / 2);
}

inline RateRow run_replicate(const ExperimentConfig& c, const Shape& shape, const Tensor& f0, std::size_t rep) {
    RateRow row;
    row.n = f0.size();
    row.replicate = rep;
    row.seed = replicate_seed(c.seed, row.n, rep);
    std::mt19937_64 rng(row.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Tensor y = f0;
    for (std::size_t p = 0; p < y.size(); ++p) y[p] += c.sigma * nd(rng);
    const double n = static_cast<double>(row.n);
    try {
        if (c.measure == Measure::anova) {
            const double l = experiment_lambda(c, n);
            row.lambda = l;
            MarginFitConfig mc;
            mc.base.solver_kind = c.solver;
            mc.lambdas = default_margin_lambdas(shape, c.k, c.sigma, c.lambda_scale);
            mc.scaling = MarginScaling::consistent;
            AnovaFit fit = fit_all_margins(y, c.k, mc);
            Tensor e = fit.fitted - f0;
            row.mse = frobenius_sq(e) / n;
        } else {
            const Tensor target = project_nullspace_complement(f0, c.k);
            FitConfig fc;
            fc.solver_kind = c.solver;
            if (c.lambda_rule == LambdaRule::sweep) {
                // oracle choice over the sweep, warm-started along a descending path
                std::vector<double> ls;
                for (double m : c.sweep) ls.push_back(experiment_lambda(c, n, m));
                auto path = fit_path(y, c.k, ls, fc);
                row.mse = std::numeric_limits<double>::infinity();
                for (const auto& r : path) {
                    const double m = frobenius_sq(r.fitted - target) / n;
                    if (m < row.mse) {
                        row.mse = m;
                        row.lambda = r.lambda;
                    }
                }
            } else {
                fc.lambda = experiment_lambda(c, n);
                row.lambda = fc.lambda;
                FitResult r = fit_margin(y, c.k, fc);
                row.mse = frobenius_sq(r.fitted - target) / n;
            }
        }
    } catch (const ConvergenceError&) {
        row.converged = false;
        row.mse = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

}  // namespace detail

inline RateResult run_rate_experiment(const ExperimentConfig& c) {
    c.validate();
    RateResult res;
    for (std::size_t side : c.sizes) {
        const Shape shape(c.d, side);
        const Tensor f0 = generate_signal(c.signal, shape, c.k);
        std::vector<RateRow> rows(c.replicates);
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t r; (r = next.fetch_add(1)) < c.replicates;) rows[r] = detail::run_replicate(c, shape, f0, r);
        };
        const std::size_t nt = std::min(c.threads, c.replicates);
        if (nt <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        std::vector<double> ok;
        RatePoint pt;
        pt.n = f0.size();
        for (const auto& r : rows) {
            if (r.converged) ok.push_back(r.mse);
            else ++pt.failures;
        }
        pt.used = ok.size();
        if (!ok.empty()) {
            pt.mean_mse = detail::pairwise_sum(ok.data(), ok.size()) / static_cast<double>(ok.size());
            std::vector<double> sorted = ok;
            std::sort(sorted.begin(), sorted.end());
            auto quantile = [&](double q) {
                const double pos = q * static_cast<double>(sorted.size() - 1);
                const std::size_t lo = static_cast<std::size_t>(pos);
                const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
                return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
            };
            pt.q10 = quantile(0.1);
            pt.median = quantile(0.5);
            pt.q90 = quantile(0.9);
            if (ok.size() > 1) {
                std::vector<double> sq(ok.size());
                for (std::size_t i = 0; i < ok.size(); ++i) sq[i] = (ok[i] - pt.mean_mse) * (ok[i] - pt.mean_mse);
                const double var = detail::pairwise_sum(sq.data(), sq.size()) / static_cast<double>(ok.size() - 1);
                pt.se = std::sqrt(var / static_cast<double>(ok.size()));
            }
        }
        res.points.push_back(pt);
        res.rows.insert(res.rows.end(), rows.begin(), rows.end());
    }
    std::vector<double> xs, ys;
    for (const auto& p : res.points)
        if (p.used > 0 && p.mean_mse > 0) {
            xs.push_back(static_cast<double>(p.n));
            ys.push_back(p.mean_mse);
        }
    if (xs.size() >= 2) {
        res.full = fit_loglog(xs, ys);
        const std::size_t h = std::max<std::size_t>(2, (xs.size() + 1) / 2);
        std::vector<double> hx(xs.end() - static_cast<std::ptrdiff_t>(h), xs.end());
        std::vector<double> hy(ys.end() - static_cast<std::ptrdiff_t>(h), ys.end());
        res.half = fit_loglog(hx, hy);
        res.has_fit = true;
    }
    return res;
}

inline void write_rates_csv(std::ostream& os, const RateResult& r) {
    os << "n,replicate,mse,lambda,converged,seed\n";
    char buf[64];
    for (const auto& row : r.rows) {
        os << row.n << ',' << row.replicate << ',';
        std::snprintf(buf, sizeof buf, "%.17g", row.mse);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", row.lambda);
        os << buf << ',' << (row.converged ? "true" : "false") << ',' << row.seed << '\n';
    }
}

// Log-log scatter of the mean MSE with the full-schedule fit line.
inline void write_rates_svg(std::ostream& os, const RateResult& r) {
    const double W = 480, H = 360, M = 50;
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : r.points)
        if (p.used > 0 && p.mean_mse > 0) pts.emplace_back(std::log10(static_cast<double>(p.n)), std::log10(p.mean_mse));
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (pts.empty()) {
        os << "</svg>\n";
        return;
    }
    double x0 = pts.front().first, x1 = x0, y0 = pts.front().second, y1 = y0;
    for (auto [x, y] : pts) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    if (x1 - x0 < 1e-9) x1 = x0 + 1;
    if (y1 - y0 < 1e-9) y1 = y0 + 1;
    auto sx = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
    auto sy = [&](double y) { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); };
    os << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">log10 n</text>\n";
    os << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << H / 2
       << ")\" text-anchor=\"middle\">log10 MSE</text>\n";
    for (auto [x, y] : pts)
        os << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"4\" fill=\"steelblue\"/>\n";
    if (r.has_fit) {
        const double ln10 = std::log(10.0);
        auto fy = [&](double x) { return (r.full.intercept + r.full.slope * x * ln10) / ln10; };
        os << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(fy(x0)) << "\" x2=\"" << sx(x1) << "\" y2=\"" << sy(fy(x1))
           << "\" stroke=\"firebrick\"/>\n";
        os << "<text x=\"" << W - M << "\" y=\"" << M - 10 << "\" text-anchor=\"end\" font-size=\"12\">slope "
           << r.full.slope << " (largest half " << r.half.slope << ")</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace vtf
