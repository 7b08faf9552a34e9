#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vtf/certify.hpp"

using namespace vtf;

namespace {

std::optional<Tessellation> draw_tessellation(const Shape& shape, int k, std::mt19937_64& rng) {
    return detail::random_tessellation(shape, k, rng, 4);
}

MultiIndex random_covered_index(const Shape& shape, int k, std::mt19937_64& rng) {
    MultiIndex j{std::vector<std::size_t>(shape.size())};
    for (std::size_t i = 0; i < shape.size(); ++i) j[i] = k + 1 + rng() % (shape[i] - k);
    return j;
}

}  // namespace

TEST(Antiprojection, MemberOfSetIsZero) {
    auto s = enlarge({MultiIndex{6, 9}}, {14, 14}, 2);
    Antiprojector ap({14, 14}, 2, s);
    for (const auto& idx : s) EXPECT_LE(ap.length(idx), 1e-8);
    EXPECT_FALSE(ap.regularized());
}

TEST(Antiprojection, FullSetIsZero) {
    IndexSet all;
    for (std::size_t j = 1; j <= 10; ++j) all.push_back(MultiIndex{j});
    Antiprojector ap({10}, 2, all);
    for (std::size_t j = 1; j <= 10; ++j) EXPECT_LE(ap.length(MultiIndex{j}), 1e-8);
}

TEST(Antiprojection, OneStepAgainstAnother) {
    // centered steps: <phi_a, phi_b> = (n-b+1)(a-1)/n for a <= b
    const double n = 16, a = 5, b = 9;
    const double aa = (n - a + 1) * (a - 1) / n, ab = (n - b + 1) * (a - 1) / n, bb = (n - b + 1) * (b - 1) / n;
    const double expected = std::sqrt((aa - ab * ab / bb) / n);
    EXPECT_NEAR(expected, std::sqrt(1.0 / 8.0), 1e-15);
    EXPECT_NEAR(antiprojection_exact({16}, 1, {MultiIndex{9}}, MultiIndex{5}), expected, 1e-12);
}

TEST(Antiprojection, BulkMatchesExplicit) {
    Shape shape{12, 10};
    auto s = enlarge({MultiIndex{5, 4}, MultiIndex{9, 7}}, shape, 2);
    Antiprojector ap(shape, 2, s);
    auto probes = probe_indices(shape, 2);
    auto bulk = ap.lengths(probes);
    for (std::size_t p = 0; p < probes.size(); ++p) EXPECT_NEAR(bulk[p], ap.length(probes[p]), 1e-7);
}

TEST(Antiprojection, SingularGramIsRegularizedAndFlagged) {
    // the same atom twice makes the Gram matrix singular
    Antiprojector ap({10}, 1, {MultiIndex{4}, MultiIndex{4}});
    EXPECT_EQ(ap.set().size(), 1u);  // duplicates are merged by normalization
    Shape shape{6};
    IndexSet all;
    for (std::size_t j = 1; j <= 6; ++j) all.push_back(MultiIndex{j});
    Antiprojector full(shape, 3, all);
    EXPECT_LE(full.length(MultiIndex{2}), 1e-6);
}

TEST(AntiprojectionBound, PrintedExample) {
    auto t = tessellate(ActiveSet{{32}, 1, {MultiIndex{17}}});
    EXPECT_NEAR(antiprojection_bound(t, MultiIndex{13}), std::sqrt(4.0 / 32.0), 1e-15);
    EXPECT_EQ(antiprojection_bound(t, MultiIndex{17}), 0.0);
    EXPECT_THROW(antiprojection_bound(t, MultiIndex{1}), DomainError);
}

TEST(AntiprojectionBound, BlockIsZero) {
    auto t = tessellate(ActiveSet{{20, 20}, 3, {MultiIndex{9, 8}}});
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(antiprojection_bound(t, MultiIndex{9 + a, 8 + b}), 0.0);
}

TEST(AntiprojectionBound, DominatesExactOnRandomInstances) {
    std::mt19937_64 rng(2024);
    for (std::size_t d = 1; d <= 2; ++d)
        for (int k = 1; k <= 3; ++k) {
            int done = 0;
            while (done < 50) {
                Shape shape(d);
                for (auto& n : shape) n = 2 * k + 8 + rng() % (24 - 2 * k - 7);
                auto tess = draw_tessellation(shape, k, rng);
                if (!tess) continue;
                Antiprojector ap(shape, k, enlarge(tess->active));
                auto idx = random_covered_index(shape, k, rng);
                EXPECT_LE(ap.length(idx), antiprojection_bound(*tess, idx) + 1e-10)
                    << "d=" << d << " k=" << k << " n0=" << shape[0];
                ++done;
            }
        }
}

TEST(NoiseWeights, ZeroOnBlocksAndInUnitInterval) {
    auto t = tessellate(regular_grid({24, 24}, 2, 2));
    auto b = noise_weights(t, 1.75);
    for (const auto& j : enlarge(t.active)) {
        MultiIndex r{{j[0] - 2, j[1] - 2}};
        EXPECT_EQ(b.v[multi_to_flat(b.v.shape(), r)], 0.0);
    }
    for (std::size_t p = 0; p < b.v.size(); ++p) {
        EXPECT_GE(b.v[p], 0.0);
        EXPECT_LE(b.v[p], 1.0);
        EXPECT_GE(b.v_sqrt[p], b.v[p] - 1e-15);
    }
    EXPECT_THROW(noise_weights(t, 0.5), DomainError);
}

TEST(NoiseWeights, SingleCentralJumpGamma) {
    for (int k = 1; k <= 3; ++k) {
        auto t = tessellate(regular_grid({41}, k, 1));
        const double C = 2.5;
        auto b = noise_weights(t, C);
        const double dmax = static_cast<double>(t.d_max(0));
        EXPECT_NEAR(b.gamma_tilde, C * std::pow(dmax / 41.0, (2.0 * k - 1) / 2), 1e-14);
    }
}

TEST(NoiseWeights, DominanceOnRandomTessellations) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + trial % 3;
        const int k = 1 + (trial / 3) % 3;
        Shape shape(d);
        for (auto& n : shape) n = 2 * k + 10 + rng() % 10;
        auto tess = draw_tessellation(shape, k, rng);
        if (!tess) continue;
        auto b = noise_weights(*tess, 1.0 + (rng() % 100) / 25.0);
        EXPECT_LE(weight_dominance_excess(b), 1e-12);
    }
}

TEST(InterpTensor, OrderOneSingleJumpShape) {
    auto t = tessellate(ActiveSet{{33}, 1, {MultiIndex{17}}});
    auto b = noise_weights(t, 1.0);
    auto w = build_interpolating_tensor(b, {1}, interp_polys(1));
    // reduced index r holds j = r + 1
    EXPECT_DOUBLE_EQ(w[15], 1.0);
    for (std::size_t j = 2; j <= 33; ++j) {
        const double dist = j < 17 ? 17.0 - j : j - 17.0;
        const double dd = j < 17 ? t.d_minus(0, 0) : t.d_plus(0, 0);
        EXPECT_NEAR(w[j - 2], 1.0 - std::sqrt(dist / dd), 1e-14) << j;
    }
    EXPECT_NEAR(w[0], 0.0, 1e-15);
    EXPECT_NEAR(w[31], 0.0, 1e-15);
}

TEST(InterpTensor, OddInSigns) {
    auto t = tessellate(regular_grid({20, 20}, 2, 2));
    auto b = noise_weights(t, interp_polys(2).c_floor());
    auto q = random_signs(4, 3);
    auto w = interpolating_tensor_values(b, q, interp_polys(2));
    for (auto& x : q) x = -x;
    auto w2 = interpolating_tensor_values(b, q, interp_polys(2));
    for (std::size_t p = 0; p < w.size(); ++p) EXPECT_EQ(w2[p], -w[p]);
}

TEST(InterpTensor, ValidOnRegularGridsUpToOrderFour) {
    std::mt19937_64 rng(17);
    for (int k = 1; k <= 4; ++k)
        for (std::size_t d = 1; d <= 3; ++d) {
            const std::size_t n = d == 3 ? 4 * k + 8 : 6 * k + 14;
            const std::size_t per = d == 3 ? 1 : 2;
            auto t = tessellate(regular_grid(Shape(d, n), k, per));
            auto polys = interp_polys(k);
            auto b = noise_weights(t, polys.c_floor());
            auto q = random_signs(t.size(), rng());
            Tensor w;
            ASSERT_NO_THROW(w = build_interpolating_tensor(b, q, polys)) << "k=" << k << " d=" << d;
            auto c = check_interpolating_tensor(w, b, q);
            EXPECT_TRUE(c.valid()) << "k=" << k << " d=" << d;
        }
}

TEST(InterpTensor, ViolationListsOffenders) {
    // third-order polynomials decay too slowly near 0 for first-order weights
    auto t = tessellate(ActiveSet{{24}, 1, {MultiIndex{12}}});
    auto b = noise_weights(t, 1.0);
    try {
        build_interpolating_tensor(b, {1}, interp_polys(3));
        FAIL() << "expected a certification failure";
    } catch (const CertificationError& e) {
        EXPECT_FALSE(e.offenders().empty());
    }
}

TEST(EffectiveSparsity, ZeroTensor) { EXPECT_EQ(effective_sparsity_upper(Tensor({10, 9}), 2), 0.0); }

TEST(EffectiveSparsity, CentralJumpScale) {
    auto t = tessellate(regular_grid({64}, 1, 1));
    auto w = build_interpolating_tensor(noise_weights(t, 1.0), {1}, interp_polys(1));
    const double up = effective_sparsity_upper(w, 1);
    const double ref = 64.0 / t.d_minus(0, 0) + 64.0 / t.d_plus(0, 0);
    EXPECT_LE(up, 8.0 * ref);
    EXPECT_GE(up, ref / 8.0);
}

TEST(EffectiveSparsity, RefinementDoesNotDecreaseBound) {
    for (int k = 1; k <= 2; ++k)
        for (std::size_t d = 1; d <= 2; ++d) {
            const Shape shape(d, 15 * k + 30);
            auto polys = interp_polys(k);
            double prev = 0.0;
            for (std::size_t per : {1u, 3u}) {
                auto t = tessellate(regular_grid(shape, k, per));
                auto w = build_interpolating_tensor(noise_weights(t, polys.c_floor()),
                                                    std::vector<int>(t.size(), 1), polys);
                const double up = effective_sparsity_upper(w, k);
                EXPECT_GE(up, prev) << "k=" << k << " d=" << d << " per=" << per;
                prev = up;
            }
        }
}

TEST(EffectiveSparsityOracle, EmptySetIsZero) {
    EXPECT_EQ(effective_sparsity_oracle({12}, 1, {}, {}, Tensor({11})), 0.0);
}

TEST(EffectiveSparsityOracle, SandwichOneJump) {
    std::mt19937_64 rng(99);
    const Shape shape{16};
    OracleOptions opt;
    opt.iterations = 400;
    opt.restarts = 20;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t t0 = 3 + rng() % 13;
        const int q = (rng() & 1) ? 1 : -1;
        auto tess = tessellate(ActiveSet{shape, 1, {MultiIndex{t0}}});
        auto b = noise_weights(tess, 1.0);
        auto w = build_interpolating_tensor(b, {q}, interp_polys(1));
        const double upper = effective_sparsity_upper(w, 1);
        opt.seed = rng();
        const Tensor zero({15});
        const double oracle = effective_sparsity_oracle(shape, 1, {MultiIndex{t0}}, {q}, zero, opt);
        EXPECT_LE(oracle, upper + 1e-6) << "t=" << t0;
        // random directions scaled to the sphere never beat the ascent
        const DiffSpec spec = DiffSpec::total(shape, 1);
        std::normal_distribution<double> nd;
        double best = 0.0;
        for (int r = 0; r < 200; ++r) {
            Tensor f(shape);
            for (std::size_t p = 0; p < 16; ++p) f[p] = nd(rng);
            f *= 4.0 / std::sqrt(frobenius_sq(f));
            Tensor df = apply_total_diff(f, spec);
            double val = q * df[t0 - 2];
            for (std::size_t p = 0; p < 15; ++p)
                if (p != t0 - 2) val -= std::abs(df[p]);
            best = std::max(best, val);
        }
        EXPECT_LE(best * best, oracle + 1e-9);
    }
}

TEST(EffectiveSparsityOracle, AtLeastTheSignedAtomSum) {
    for (int k = 1; k <= 3; ++k) {
        const Shape shape{16, 16};
        auto tess = tessellate(regular_grid(shape, k, 2));
        auto b = noise_weights(tess, 1.0);
        auto q = random_signs(tess.active.size(), 5 + k);
        Tensor qs(reduced_shape(shape, k));
        for (std::size_t m = 0; m < q.size(); ++m) {
            MultiIndex r = tess.active.jumps[m];
            for (std::size_t i = 0; i < r.size(); ++i) r[i] -= k;
            qs[multi_to_flat(qs.shape(), r)] = q[m];
        }
        Tensor f = synthesize(qs, k);
        const double floor = static_cast<double>(q.size() * q.size()) * 256.0 / frobenius_sq(f);
        OracleOptions opt;
        opt.iterations = 200;
        opt.restarts = 3;
        const double got = effective_sparsity_oracle(shape, k, tess.active.jumps, q, b.v, opt);
        EXPECT_GE(got, floor * (1 - 1e-9)) << "k=" << k;
        EXPECT_LE(got, effective_sparsity_upper(interpolating_tensor_values(b, q, interp_polys(k)), k) + 1e-6);
    }
}

TEST(EffectiveSparsityOracle, SignSymmetry) {
    auto tess = tessellate(regular_grid({14, 14}, 1, 2));
    auto b = noise_weights(tess, 1.0);
    auto q = random_signs(4, 8);
    std::vector<int> mq = q;
    for (auto& x : mq) x = -x;
    OracleOptions opt;
    opt.iterations = 600;
    const double a = effective_sparsity_oracle({14, 14}, 1, tess.active.jumps, q, b.v, opt);
    const double c = effective_sparsity_oracle({14, 14}, 1, tess.active.jumps, mq, b.v, opt);
    EXPECT_NEAR(a, c, 0.02 * std::max(a, c));
}

TEST(DiscreteDiffScaling, FullPowerOrderOne) {
    for (std::size_t d : {8u, 64u, 1000u}) EXPECT_NEAR(discrete_diff_scaling(PowerKind::full_power, 1, d), 1.0 / d, 1e-14);
}

TEST(DiscreteDiffScaling, HalfPowerLogRatio) {
    const double r = discrete_diff_scaling(PowerKind::half_power, 1, 1024) /
                     discrete_diff_scaling(PowerKind::half_power, 1, 2048);
    const double model = (std::log(std::exp(1.0) * 1024) / 1024) / (std::log(std::exp(1.0) * 2048) / 2048);
    EXPECT_NEAR(r / model, 1.0, 0.15);
}

TEST(DiscreteDiffScaling, FullPowerSlope) {
    for (int k = 1; k <= 4; ++k) {
        std::vector<double> x, y;
        for (int e = 5; e <= 12; ++e) {
            x.push_back(std::ldexp(1.0, e));
            y.push_back(discrete_diff_scaling(PowerKind::full_power, k, static_cast<std::size_t>(x.back())));
        }
        EXPECT_NEAR(fit_loglog(x, y).slope, -(2.0 * k - 1), 0.2) << "k=" << k;
    }
    EXPECT_THROW(discrete_diff_scaling(PowerKind::full_power, 3, 5), DomainError);
}

TEST(GammaScaling, OneDimensionMesh) {
    auto run = mesh_gamma_scaling(1, 1, 256, {2, 4, 8, 16, 32});
    EXPECT_NEAR(run.fit.slope, -0.5, 0.1);
}

TEST(GammaScaling, TwoDimensionsMeshSteeperThanRegular) {
    auto mesh = mesh_gamma_scaling(1, 2, 64, {2, 3, 4, 5, 6});
    auto reg = regular_gamma_scaling(1, 2, 64, {2, 3, 4, 6, 8});
    EXPECT_NEAR(mesh.fit.slope, -1.0 / 3.0, 0.1);
    EXPECT_NEAR(reg.fit.slope, -0.25, 0.1);
    EXPECT_LT(mesh.fit.slope, reg.fit.slope);
}

TEST(ReflectedDictionary, MirrorsStepAtoms) {
    auto m = reflected_step_dictionary(8);
    auto dict = dictionary(8, 1);
    for (std::size_t j = 2; j <= 8; ++j) {
        // centered 1{j' >= j} equals minus the centered 1{j' <= j-1}
        Eigen::VectorXd r = m.col(static_cast<Eigen::Index>(j - 2));
        r.array() -= r.mean();
        EXPECT_LE((r + dict->tilde_column(j)).norm(), 1e-12);
    }
}

TEST(CertifySuite, AllRowsPassAndCsv) {
    CertifyOptions o;
    o.k = 2;
    o.d = 2;
    o.n = 24;
    o.instances = 20;
    auto rows = run_certify_suite(o);
    EXPECT_TRUE(all_pass(rows));
    for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.check_name << " " << r.params << " " << r.lhs << " " << r.rhs;
    std::ostringstream os;
    write_certify_csv(os, rows);
    EXPECT_EQ(os.str().substr(0, 31), "check_name,params,lhs,rhs,pass\n");
}
