#include <gtest/gtest.h>

#include <random>

#include "support/reference.hpp"
#include "vtf/solver.hpp"

using namespace vtf;

namespace {

Tensor step_signal(std::size_t n, std::size_t at) {
    Tensor y(Shape{n});
    for (std::size_t j = at; j <= n; ++j) y[j - 1] = 1.0;
    return y;
}

}  // namespace

TEST(FitMargin, ZeroLambdaReturnsProjection) {
    std::mt19937_64 rng(20);
    for (int k = 1; k <= 3; ++k) {
        Tensor Y = ref::random_tensor({9, 8}, rng);
        FitConfig c;
        c.lambda = 0.0;
        FitResult r = fit_margin(Y, k, c);
        EXPECT_LE(max_abs(r.fitted - project_nullspace_complement(Y, k)), 1e-8);
        EXPECT_LE(r.kkt_residual, 1e-8);
    }
}

TEST(FitMargin, AboveLambdaMaxIsZero) {
    std::mt19937_64 rng(21);
    for (int k = 1; k <= 3; ++k) {
        Tensor Y = ref::random_tensor({30}, rng);
        const double lm = lambda_max(Y, k);
        for (double f : {1.0, 1.5}) {
            FitConfig c;
            c.lambda = lm * f;
            FitResult r = fit_margin(Y, k, c);
            EXPECT_EQ(l1_norm(r.coefficients), 0.0);
            EXPECT_LE(kkt_check(Y, k, c.lambda, Tensor(coefficient_shape(Y.shape(), k))), 1e-10);
        }
        FitConfig c;
        c.lambda = 0.9 * lm;
        EXPECT_GT(l1_norm(fit_margin(Y, k, c).coefficients), 0.0);
    }
}

TEST(FitMargin, SingleStepShrinkage) {
    const std::size_t n = 16;
    Tensor Y = step_signal(n, 8);
    FitConfig c;
    c.lambda = 0.01;
    FitResult r = fit_margin(Y, 1, c);
    // y_perp equals the 8th dictionary atom, whose squared norm is 9 - 81/16
    const double norm_sq = 9.0 - 81.0 / 16.0;
    const double expect = 1.0 - n * c.lambda / norm_sq;
    for (std::size_t j = 0; j < r.coefficients.size(); ++j) {
        if (j + 2 == 8)
            EXPECT_NEAR(r.coefficients[j], expect, 1e-10);
        else
            EXPECT_EQ(r.coefficients[j], 0.0);
    }
    EXPECT_LE(r.kkt_residual, 1e-8);
}

TEST(FitMargin, KktAndCrossSolverAgreement) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.05, 0.6);
    for (int trial = 0; trial < 12; ++trial) {
        const int k = 1 + trial % 3;
        const Shape s = trial % 2 ? Shape{24} : Shape{7, 6};
        Tensor Y = ref::random_tensor(s, rng);
        FitConfig c;
        c.lambda = u(rng) * lambda_max(Y, k);
        c.tol = 1e-9;
        FitResult as = fit_margin(Y, k, c);
        EXPECT_LE(as.kkt_residual, 1e-9);
        EXPECT_LE(kkt_check(Y, k, c.lambda, as.coefficients), 1e-9);
        c.solver_kind = SolverKind::coordinate_descent;
        c.max_iters = 200000;
        c.tol = 1e-7;
        FitResult cd = fit_margin(Y, k, c);
        // convexity: F(b) - F(b*) <= kkt(b) * |b - b*|_1
        const double bound = (cd.kkt_residual + as.kkt_residual) * l1_norm(cd.coefficients - as.coefficients);
        EXPECT_LE(std::abs(cd.objective - as.objective), bound + 1e-12) << "trial " << trial;
        EXPECT_GE(cd.objective, as.objective - 1e-12);
    }
}

TEST(FitMargin, ProximalGradientAgrees) {
    std::mt19937_64 rng(23);
    Tensor Y = ref::random_tensor({40}, rng);
    FitConfig c;
    c.lambda = 0.3 * lambda_max(Y, 1);
    FitResult as = fit_margin(Y, 1, c);
    c.solver_kind = SolverKind::accelerated_proximal_gradient;
    c.max_iters = 200000;
    c.tol = 1e-6;
    FitResult pg = fit_margin(Y, 1, c);
    EXPECT_LE(pg.kkt_residual, 1e-6);
    EXPECT_NEAR(pg.objective, as.objective, 1e-6);
}

TEST(FitMargin, CoordinateDescentObjectiveMonotone) {
    std::mt19937_64 rng(24);
    Tensor Y = ref::random_tensor({20}, rng);
    FitConfig c;
    c.lambda = 0.2 * lambda_max(Y, 2);
    c.solver_kind = SolverKind::coordinate_descent;
    c.max_iters = 100000;
    c.tol = 1e-7;
    c.record_objective = true;
    FitResult r = fit_margin(Y, 2, c);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-12);
}

TEST(KktCheck, PerturbationViolates) {
    std::mt19937_64 rng(25);
    Tensor Y = ref::random_tensor({32}, rng);
    FitConfig c;
    c.lambda = 0.2 * lambda_max(Y, 1);
    FitResult r = fit_margin(Y, 1, c);
    Tensor b = r.coefficients;
    b[5] += 0.1;
    EXPECT_GT(kkt_check(Y, 1, c.lambda, b), 1e-4);
}

TEST(FitMargin, AxisPermutationInvariance) {
    std::mt19937_64 rng(26);
    Tensor Y = ref::random_tensor({8, 11}, rng);
    for (int k = 1; k <= 2; ++k) {
        FitConfig c;
        c.lambda = 0.3 * lambda_max(Y, k);
        FitResult a = fit_margin(Y, k, c);
        FitResult b = fit_margin(permute_axes(Y, {1, 0}), k, c);
        EXPECT_LE(max_abs(permute_axes(a.fitted, {1, 0}) - b.fitted), 1e-8);
    }
}

TEST(FitMargin, WarmStartPath) {
    std::mt19937_64 rng(27);
    Tensor Y = ref::random_tensor({64}, rng);
    const double lm = lambda_max(Y, 1);
    FitConfig c;
    auto path = fit_path(Y, 1, {0.1 * lm, 0.5 * lm, 0.25 * lm}, c);
    ASSERT_EQ(path.size(), 3u);
    EXPECT_GT(path[0].lambda, path[2].lambda);
    for (const auto& r : path) {
        EXPECT_LE(r.kkt_residual, default_tolerance(Y));
        c.lambda = r.lambda;
        EXPECT_NEAR(fit_margin(Y, 1, c).objective, r.objective, 1e-10);
    }
}

TEST(FitMargin, NoiseOverruledAtUniversalLambda) {
    const std::size_t n = 512;
    std::mt19937_64 rng(28);
    std::normal_distribution<double> g;
    int zeros = 0;
    const int reps = 50;
    const double lam = 2.0 * universal_lambda(1.0, n, std::log(2.0 * n));
    for (int r = 0; r < reps; ++r) {
        Tensor Y(Shape{n});
        for (auto& v : Y.data()) v = g(rng);
        FitConfig c;
        c.lambda = lam;
        zeros += l1_norm(fit_margin(Y, 1, c).coefficients) == 0.0;
    }
    EXPECT_GE(zeros, static_cast<int>(0.9 * reps));
}

TEST(FitMargin, RejectsBadConfig) {
    Tensor Y(Shape{8});
    FitConfig c;
    c.lambda = -1.0;
    EXPECT_THROW(fit_margin(Y, 1, c), DomainError);
    c.lambda = 0.1;
    EXPECT_THROW(fit_margin(Y, 8, c), OrderError);
}

TEST(FitAllMargins, ConstantIsReproduced) {
    Tensor Y(Shape{6, 7}, 3.0);
    AnovaFit fit = fit_all_margins(Y, 2, 1.0);
    EXPECT_LE(max_abs(fit.fitted - Y), 1e-12);
}

TEST(FitAllMargins, AdditiveStepRoutedToOneDimensionalMargin) {
    const std::size_t n1 = 16, n2 = 12;
    Tensor Y(Shape{n1, n2});
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) Y[i * n2 + j] = i >= 8 ? 1.0 : 0.0;
    MarginFitConfig c;
    for (const auto& key : margin_keys(2, 1))
        if (!key.axes.empty()) c.lambdas[key] = key.axes.size() == 2 ? 10.0 : 0.01;
    AnovaFit fit = fit_all_margins(Y, 1, c);
    const MarginKey full{{0, 1}, {}}, axis0{{0}, {1}}, axis1{{1}, {1}};
    EXPECT_LE(max_abs(fit.components.at(full)), 1e-12);
    EXPECT_LE(max_abs(fit.components.at(axis1)), 1e-12);
    EXPECT_GT(max_abs(fit.components.at(axis0)), 0.4);
    const auto& beta = fit.margins.at(axis0).coefficients;
    int nz = 0;
    for (double v : beta.data()) nz += v != 0.0;
    EXPECT_EQ(nz, 1);
}

TEST(FitAllMargins, ParsevalAcrossComponents) {
    std::mt19937_64 rng(29);
    Tensor Y = ref::random_tensor({10, 9}, rng);
    for (auto scaling : {MarginScaling::literal, MarginScaling::consistent}) {
        AnovaFit fit = fit_all_margins(Y, 2, 0.3, 1.0, scaling);
        double sum = 0.0;
        for (const auto& [key, comp] : fit.components) sum += frobenius_sq(comp);
        EXPECT_NEAR(frobenius_sq(fit.fitted), sum, 1e-9 * std::max(1.0, sum));
        for (auto a = fit.components.begin(); a != fit.components.end(); ++a)
            for (auto b = std::next(a); b != fit.components.end(); ++b)
                EXPECT_LE(std::abs(inner_product(a->second, b->second)), 1e-9 * std::max(1.0, sum));
    }
}

TEST(FitAllMargins, MissingLambdaThrows) {
    Tensor Y(Shape{6, 6});
    MarginFitConfig c;
    EXPECT_THROW(fit_all_margins(Y, 1, c), DomainError);
}

// long k = 3 signals: the largest violators are nearly collinear neighbours
TEST(FitMargin, ActiveSetLongHighOrderSignals) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.02, 0.9);
    for (int trial = 0; trial < 24; ++trial) {
        Tensor Y = ref::random_tensor({200 + rng() % 800}, rng);
        FitConfig c;
        c.lambda = u(rng) * lambda_max(Y, 3);
        FitResult r = fit_margin(Y, 3, c);
        EXPECT_LE(kkt_check(Y, 3, c.lambda, r.coefficients), 1e-6) << "trial " << trial;
    }
}
