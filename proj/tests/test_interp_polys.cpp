#include <gtest/gtest.h>

#include <cmath>

#include "vtf/interp_polys.hpp"

using namespace vtf;

namespace {

// largest coefficient gap between two piecewise polynomials with the same layout
double coefficient_gap(const PiecewisePoly& a, const PiecewisePoly& b) {
    EXPECT_EQ(a.pieces.size(), b.pieces.size());
    double gap = 0.0;
    for (std::size_t i = 0; i < std::min(a.pieces.size(), b.pieces.size()); ++i) {
        const auto& p = a.pieces[i];
        const auto& q = b.pieces[i];
        EXPECT_NEAR(p.lo, q.lo, 1e-14);
        EXPECT_NEAR(p.hi, q.hi, 1e-14);
        gap = std::max(gap, std::abs(p.offset - q.offset));
        for (auto [c, e] : p.terms) {
            double other = 0.0;
            for (auto [c2, e2] : q.terms)
                if (e2 == e) other = c2;
            gap = std::max(gap, std::abs(c - other));
        }
        for (auto [c2, e2] : q.terms) {
            bool found = false;
            for (auto [c, e] : p.terms) found = found || e == e2;
            if (!found) gap = std::max(gap, std::abs(c2));
        }
    }
    return gap;
}

}  // namespace

TEST(InterpPolys, OrderOneIsSquareRootAndLinear) {
    auto p = interp_polys(1);
    for (double x : {0.0, 0.1, 0.25, 0.7, 1.0}) {
        EXPECT_NEAR(p.omega(x), 1.0 - std::sqrt(x), 1e-15);
        EXPECT_NEAR(p.w(x), 1.0 - x, 1e-15);
    }
}

TEST(InterpPolys, OrderThreeMiddlePiece) {
    auto p = printed_interp_polys(3);
    auto c = piece_coefficients(p.omega.pieces[1], 3);
    EXPECT_DOUBLE_EQ(c[3], 585.0 / 76.0);
    EXPECT_DOUBLE_EQ(c[2], -45.0 / 4.0);
    EXPECT_DOUBLE_EQ(c[1], 255.0 / 76.0);
    EXPECT_DOUBLE_EQ(c[0], 145.0 / 228.0);
}

TEST(InterpPolys, OrderTwoKnotValue) {
    auto p = printed_interp_polys(2);
    EXPECT_NEAR(p.omega.pieces[0](0.5), 3.0 / 7.0, 1e-14);
    EXPECT_NEAR(p.omega.pieces[1](0.5), 3.0 / 7.0, 1e-14);
    EXPECT_NEAR(p.a0, 8.0 * std::sqrt(2.0) / 7.0, 1e-15);
}

TEST(InterpPolys, EndpointValues) {
    for (int k = 1; k <= 6; ++k) {
        auto p = k <= 4 ? printed_interp_polys(k) : matched_interp_polys(k);
        auto m = matched_interp_polys(k);
        for (const auto* q : {&p, &m}) {
            EXPECT_DOUBLE_EQ(q->omega(0.0), 1.0);
            EXPECT_DOUBLE_EQ(q->w(0.0), 1.0);
            EXPECT_NEAR(q->omega(1.0), 0.0, 1e-15);
            EXPECT_NEAR(q->w(1.0), 0.0, 1e-15);
        }
    }
}

TEST(InterpPolys, PrintedExactFormsAreSmoothAndMonotone) {
    for (int k = 1; k <= 3; ++k) {
        auto p = printed_interp_polys(k);
        EXPECT_LE(p.omega_continuity_defect(), 1e-9) << "k=" << k;
        EXPECT_LE(p.w_continuity_defect(), 1e-9) << "k=" << k;
        EXPECT_TRUE(p.monotone()) << "k=" << k;
    }
}

TEST(InterpPolys, MatchedFormsAreSmoothAndMonotoneUpToSix) {
    for (int k = 1; k <= 6; ++k) {
        auto p = matched_interp_polys(k);
        EXPECT_LE(p.omega_continuity_defect(), 1e-9) << "k=" << k;
        EXPECT_LE(p.w_continuity_defect(), 1e-9) << "k=" << k;
        EXPECT_TRUE(p.monotone()) << "k=" << k;
    }
}

TEST(InterpPolys, MatchingReproducesPrinted) {
    for (int k = 1; k <= 3; ++k) {
        auto p = printed_interp_polys(k);
        auto m = matched_interp_polys(k);
        EXPECT_LE(coefficient_gap(p.omega, m.omega), 1e-9) << "k=" << k;
        EXPECT_LE(coefficient_gap(p.w, m.w), 1e-9) << "k=" << k;
    }
    auto p = printed_interp_polys(4);
    auto m = matched_interp_polys(4);
    EXPECT_LE(coefficient_gap(p.omega, m.omega), 1e-2);
    EXPECT_LE(coefficient_gap(p.w, m.w), 1e-2);
}

// The two-decimal k=4 table is pinned as transcribed. Rounding leaves visible knot jumps,
// and the one at x = 1/2 goes upward.
TEST(InterpPolys, PrintedOrderFourRoundingDefects) {
    auto p = printed_interp_polys(4);
    EXPECT_NEAR(p.omega.pieces[2](0.5) - p.omega.pieces[1](0.5), 0.0075, 1e-9);
    EXPECT_NEAR(p.omega_continuity_defect(), 0.06, 1e-9);
    EXPECT_NEAR(p.w_continuity_defect(), 0.01 / 3.0, 1e-9);
    EXPECT_TRUE(p.omega.monotone_within_pieces());
    EXPECT_TRUE(p.w.monotone_within_pieces());
    EXPECT_FALSE(p.omega.monotone_nonincreasing());
}

TEST(InterpPolys, OrderFourLeadingConstant) {
    auto m = matched_interp_polys(4);
    EXPECT_NEAR(m.a0, 7.2926, 1e-4);
    EXPECT_NEAR(m.c0, 10.10, 1e-2);
    EXPECT_NEAR(m.a0_w, 16.2, 1e-9);
    EXPECT_NEAR(interp_polys(4).c_floor(), std::pow(4.0, 3.5) / m.a0, 1e-12);
}

TEST(InterpPolys, InvalidOrder) {
    EXPECT_THROW(matched_interp_polys(0), ConstructionError);
    EXPECT_THROW(printed_interp_polys(5), ConstructionError);
}
