#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vtf/errors.hpp"

namespace vtf {

// offset + sum_r coef_r * u^{exp_r} with u = sign * (x - shift), valid on [lo, hi].
struct PolyPiece {
    double lo = 0.0, hi = 1.0;
    double offset = 0.0;
    double sign = 1.0, shift = 0.0;
    std::vector<std::pair<double, double>> terms;  // (coefficient, exponent)

    double derivative(double x, int order) const {
        const double u = sign * (x - shift);
        double s = order == 0 ? offset : 0.0;
        for (auto [c, e] : terms) {
            double f = c;
            for (int t = 0; t < order; ++t) f *= (e - t) * sign;
            const double p = e - order;
            if (f == 0.0) continue;
            if (p == 0.0)
                s += f;
            else if (u == 0.0)
                s += p > 0 ? 0.0 : f * std::numeric_limits<double>::infinity();
            else
                s += f * std::pow(u, p);
        }
        return s;
    }
    double operator()(double x) const { return derivative(x, 0); }

    // the piece x -> 1 - P(1 - x) on [1 - hi, 1 - lo]
    PolyPiece reflected() const {
        PolyPiece r;
        r.lo = 1.0 - hi;
        r.hi = 1.0 - lo;
        r.offset = 1.0 - offset;
        r.sign = -sign;
        r.shift = 1.0 - shift;
        for (auto [c, e] : terms) r.terms.emplace_back(-c, e);
        return r;
    }
};

struct PiecewisePoly {
    std::vector<PolyPiece> pieces;  // ordered, contiguous cover of [0, 1]

    const PolyPiece& piece_at(double x) const {
        for (const auto& p : pieces)
            if (x <= p.hi) return p;
        return pieces.back();
    }
    double operator()(double x) const { return piece_at(x)(x); }
    double derivative(double x, int order) const { return piece_at(x).derivative(x, order); }

    std::vector<double> knots() const {
        std::vector<double> k{pieces.front().lo};
        for (const auto& p : pieces) k.push_back(p.hi);
        return k;
    }

    // max |left - right| over interior knots for derivatives 0..max_order
    double continuity_defect(int max_order) const {
        double worst = 0.0;
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
            const double x = pieces[i].hi;
            for (int r = 0; r <= max_order; ++r)
                worst = std::max(worst, std::abs(pieces[i].derivative(x, r) - pieces[i + 1].derivative(x, r)));
        }
        return worst;
    }

    bool monotone_nonincreasing(int grid = 10000, double slack = 1e-12) const {
        double prev = (*this)(0.0);
        for (int g = 1; g <= grid; ++g) {
            const double v = (*this)(static_cast<double>(g) / grid);
            if (v > prev + slack) return false;
            prev = v;
        }
        return true;
    }

    // monotonicity of each piece on its own interval, ignoring knot jumps
    bool monotone_within_pieces(int grid = 10000, double slack = 1e-12) const {
        for (const auto& p : pieces) {
            double prev = p(p.lo);
            for (int g = 1; g <= grid; ++g) {
                const double v = p(p.lo + (p.hi - p.lo) * g / grid);
                if (v > prev + slack) return false;
                prev = v;
            }
        }
        return true;
    }
};

struct InterpPolys {
    int k = 1;
    PiecewisePoly omega;
    PiecewisePoly w;
    double a0 = 1.0;    // omega(x) = 1 - a0 x^{(2k-1)/2} on the first piece
    double a0_w = 1.0;  // w(x) = 1 - a0_w x^k on the first piece
    double c0 = 1.0;    // omega(x) = c0 (1-x)^k on the last piece
    std::string source;

    // the floor k^{(2k-1)/2} / a0 for the noise-weight constant
    double c_floor() const { return std::pow(static_cast<double>(k), (2.0 * k - 1.0) / 2.0) / a0; }
    double omega_continuity_defect() const { return omega.continuity_defect(k - 1); }
    double w_continuity_defect() const { return w.continuity_defect(k - 1); }
    bool monotone(int grid = 10000) const {
        return omega.monotone_nonincreasing(grid) && w.monotone_nonincreasing(grid);
    }
};

namespace detail {

inline PolyPiece power_piece(double lo, double hi, std::vector<double> coeffs) {
    PolyPiece p;
    p.lo = lo;
    p.hi = hi;
    for (std::size_t r = 0; r < coeffs.size(); ++r)
        if (coeffs[r] != 0.0) p.terms.emplace_back(coeffs[r], static_cast<double>(r));
    return p;
}

inline PolyPiece head_piece(double hi, double a, double expo) {
    PolyPiece p;
    p.lo = 0.0;
    p.hi = hi;
    p.offset = 1.0;
    p.terms.emplace_back(-a, expo);
    return p;
}

inline PolyPiece tail_piece(double lo, double c, int k) {
    PolyPiece p;
    p.lo = lo;
    p.hi = 1.0;
    p.sign = -1.0;
    p.shift = 1.0;
    p.terms.emplace_back(c, static_cast<double>(k));
    return p;
}

// 1/2 + sum a_r (1/2 - x)^r over odd r
inline PolyPiece center_piece(double lo, double hi, const std::vector<std::pair<double, int>>& odd) {
    PolyPiece p;
    p.lo = lo;
    p.hi = hi;
    p.offset = 0.5;
    p.sign = -1.0;
    p.shift = 0.5;
    for (auto [a, r] : odd) p.terms.emplace_back(a, static_cast<double>(r));
    return p;
}

// Completes w from its left half by the symmetry w(x) = 1 - w(1-x).
inline PiecewisePoly symmetric_completion(std::vector<PolyPiece> left) {
    PiecewisePoly out;
    PolyPiece center = left.back();
    left.pop_back();
    for (auto& p : left) out.pieces.push_back(p);
    center.hi = 1.0 - center.lo;
    out.pieces.push_back(center);
    for (auto it = left.rbegin(); it != left.rend(); ++it) out.pieces.push_back(it->reflected());
    return out;
}

}  // namespace detail

// The explicit pieces for k = 1..4 as printed, with exact rationals where available
// (k = 4 is available only to two decimals).
inline InterpPolys printed_interp_polys(int k) {
    using namespace detail;
    InterpPolys p;
    p.k = k;
    p.source = "printed";
    switch (k) {
        case 1:
            p.a0 = 1.0;
            p.c0 = 1.0;
            p.a0_w = 1.0;
            p.omega.pieces = {head_piece(1.0, 1.0, 0.5)};
            p.w.pieces = {power_piece(0.0, 1.0, {1.0, -1.0})};
            break;
        case 2:
            p.a0 = 8.0 * std::sqrt(2.0) / 7.0;
            p.c0 = 12.0 / 7.0;
            p.a0_w = 8.0 / 3.0;
            p.omega.pieces = {head_piece(0.5, p.a0, 1.5), tail_piece(0.5, p.c0, 2)};
            p.w = symmetric_completion({head_piece(0.25, p.a0_w, 2.0), center_piece(0.25, 0.5, {{4.0 / 3.0, 1}})});
            break;
        case 3:
            p.a0 = 144.0 * std::sqrt(3.0) / 76.0;
            p.c0 = 315.0 / 76.0;
            p.a0_w = 16.0 / 3.0;
            p.omega.pieces = {head_piece(1.0 / 3.0, p.a0, 2.5),
                              power_piece(1.0 / 3.0, 2.0 / 3.0, {145.0 / 228.0, 255.0 / 76.0, -45.0 / 4.0, 585.0 / 76.0}),
                              tail_piece(2.0 / 3.0, p.c0, 3)};
            p.w = symmetric_completion({head_piece(0.25, p.a0_w, 3.0), center_piece(0.25, 0.5, {{2.0, 1}, {-16.0 / 3.0, 3}})});
            break;
        case 4:
            p.a0 = 7.29;
            p.c0 = 10.10;
            p.a0_w = 16.2;
            p.omega.pieces = {head_piece(0.25, 7.29, 3.5),
                              power_piece(0.25, 0.5, {1.12, -2.01, 12.26, -35.36, 27.39}),
                              power_piece(0.5, 0.75, {-2.43, 26.44, -73.08, 78.43, -29.51}),
                              tail_piece(0.75, 10.10, 4)};
            p.w = symmetric_completion({head_piece(1.0 / 6.0, 16.2, 4.0),
                                        power_piece(1.0 / 6.0, 1.0 / 3.0, {1.03, -0.8, 7.2, -28.8, 27.0}),
                                        center_piece(1.0 / 3.0, 0.5, {{2.2, 1}, {-7.2, 3}})});
            break;
        default:
            throw ConstructionError("printed pieces exist only for k = 1..4");
    }
    return p;
}

namespace detail {

// r-th derivative of u^e at u, with u = s (x - shift)
inline double term_derivative(double e, double s, double u, int r) {
    double f = 1.0;
    for (int t = 0; t < r; ++t) f *= (e - t) * s;
    const double p = e - r;
    if (f == 0.0) return 0.0;
    return p == 0.0 ? f : f * std::pow(u, p);
}

inline Eigen::VectorXd solve_square(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* what) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw ConstructionError(std::string("singular matching system for ") + what);
    Eigen::VectorXd x = lu.solve(b);
    x += lu.solve(b - A * x);
    return x;
}

}  // namespace detail

// omega and w by derivative matching: k equal intervals for omega; k+1 (k odd) or k+2 (k even)
// for w, whose middle piece spans two intervals and carries only odd powers of (1/2 - x).
inline InterpPolys matched_interp_polys(int k) {
    using namespace detail;
    if (k < 1) throw ConstructionError("k must be positive");
    if (k == 1) {
        InterpPolys p = printed_interp_polys(1);
        p.source = "matched";
        return p;
    }
    InterpPolys out;
    out.k = k;
    out.source = "matched";
    const double hexp = (2.0 * k - 1.0) / 2.0;

    {
        // unknowns: a0 | (k-2) full pieces of k+1 power coefficients | c0
        const int nun = k * (k - 1);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nun, nun);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(nun);
        auto add = [&](int row, int piece, double x, int r, double sg) {
            if (piece == 1) {
                A(row, 0) += sg * -term_derivative(hexp, 1.0, x, r);
                if (r == 0) b(row) -= sg;
            } else if (piece == k) {
                A(row, nun - 1) += sg * term_derivative(k, -1.0, 1.0 - x, r);
            } else {
                const int base = 1 + (piece - 2) * (k + 1);
                for (int e = 0; e <= k; ++e) A(row, base + e) += sg * term_derivative(e, 1.0, x, r);
            }
        };
        int row = 0;
        for (int l = 1; l < k; ++l) {
            const double x = static_cast<double>(l) / k;
            for (int r = 0; r < k; ++r, ++row) {
                add(row, l, x, r, 1.0);
                add(row, l + 1, x, r, -1.0);
            }
        }
        Eigen::VectorXd s = solve_square(A, b, "omega");
        out.a0 = s(0);
        out.c0 = s(nun - 1);
        out.omega.pieces.push_back(head_piece(1.0 / k, out.a0, hexp));
        for (int l = 2; l < k; ++l) {
            std::vector<double> c(k + 1);
            for (int e = 0; e <= k; ++e) c[e] = s(1 + (l - 2) * (k + 1) + e);
            out.omega.pieces.push_back(power_piece(static_cast<double>(l - 1) / k, static_cast<double>(l) / k, c));
        }
        out.omega.pieces.push_back(tail_piece(static_cast<double>(k - 1) / k, out.c0, k));
    }
    {
        const int N = k % 2 ? k + 1 : k + 2;
        const int L = k % 2 ? k : k - 1;
        std::vector<int> odd;
        for (int r = 1; r <= L; r += 2) odd.push_back(r);
        const int nfull = N / 2 - 2;
        const int nun = 1 + nfull * (k + 1) + static_cast<int>(odd.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nun, nun);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(nun);
        const int center = N / 2;  // piece index of the middle piece
        auto add = [&](int row, int piece, double x, int r, double sg) {
            if (piece == 1) {
                A(row, 0) += sg * -term_derivative(k, 1.0, x, r);
                if (r == 0) b(row) -= sg;
            } else if (piece < center) {
                const int base = 1 + (piece - 2) * (k + 1);
                for (int e = 0; e <= k; ++e) A(row, base + e) += sg * term_derivative(e, 1.0, x, r);
            } else {
                const int base = 1 + nfull * (k + 1);
                for (std::size_t i = 0; i < odd.size(); ++i)
                    A(row, base + static_cast<int>(i)) += sg * term_derivative(odd[i], -1.0, 0.5 - x, r);
                if (r == 0) b(row) -= sg * 0.5;
            }
        };
        int row = 0;
        for (int l = 1; l < center; ++l) {
            const double x = static_cast<double>(l) / N;
            for (int r = 0; r < k; ++r, ++row) {
                add(row, l, x, r, 1.0);
                add(row, l + 1, x, r, -1.0);
            }
        }
        if (row != nun) throw ConstructionError("matching system for w is not square");
        Eigen::VectorXd s = solve_square(A, b, "w");
        out.a0_w = s(0);
        std::vector<PolyPiece> left{head_piece(1.0 / N, out.a0_w, k)};
        for (int l = 2; l < center; ++l) {
            std::vector<double> c(k + 1);
            for (int e = 0; e <= k; ++e) c[e] = s(1 + (l - 2) * (k + 1) + e);
            left.push_back(power_piece(static_cast<double>(l - 1) / N, static_cast<double>(l) / N, c));
        }
        std::vector<std::pair<double, int>> oc;
        for (std::size_t i = 0; i < odd.size(); ++i) oc.emplace_back(s(1 + nfull * (k + 1) + static_cast<int>(i)), odd[i]);
        left.push_back(center_piece(static_cast<double>(center - 1) / N, 0.5, oc));
        out.w = symmetric_completion(left);
    }
    return out;
}

// Pieces used for certification: exact printed forms for k <= 3, recomputed ones otherwise.
inline InterpPolys interp_polys(int k) { return k <= 3 ? printed_interp_polys(k) : matched_interp_polys(k); }

// Coefficients of a piece as a dense power-basis vector in its own variable u, for comparisons.
inline std::vector<double> piece_coefficients(const PolyPiece& p, int max_power) {
    std::vector<double> c(max_power + 1, 0.0);
    for (auto [coef, e] : p.terms) {
        const int r = static_cast<int>(std::lround(e));
        if (std::abs(e - r) < 1e-12 && r <= max_power) c[r] += coef;
    }
    c[0] += p.offset;
    return c;
}

}  // namespace vtf
