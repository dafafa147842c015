#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace popctl;
using namespace popctl::testing;

namespace {

WeightConfig bench_weights(const SpaceTimeGrid& g, double s = 20.0) {
    WeightConfig cfg;
    cfg.kappa = 1e-8;
    cfg.s = s;
    return resolve_auto(cfg, Dispersion::power_law(0.5, 0.5), g, true, true);
}

struct Lab {
    SpaceTimeGrid g;
    Model model;
    Weights W;
    explicit Lab(std::size_t n)
        : g(bench_grid(n, n)),
          model(bench_coeffs(quadratic_beta(), 0.1), g),
          W(Dispersion::power_law(0.5, 0.5), g, bench_weights(g)) {}
};

std::vector<double> nodal(const std::vector<double>& c, std::size_t nx) {
    std::vector<double> v(nx + 1, 0.0);
    for (std::size_t i = 1; i < nx; ++i) v[i] = sine_sum(c, static_cast<double>(i) / static_cast<double>(nx));
    return v;
}

}  // namespace

TEST(Report, FitAndTrivialTrials) {
    InequalityReport r;
    r.add(0, 1.0, 0.0, 0.0);
    r.add(1, 1.0, 2.0, 1.0);
    r.add(2, 2.0, 3.0, 6.0);
    EXPECT_EQ(r.trivial_trials, 1u);
    EXPECT_EQ(r.trials.size(), 2u);
    EXPECT_EQ(r.fitted_constant, 2.0);
    EXPECT_TRUE(r.all_finite());
    r.add(3, 2.0, 1.0, 0.0);
    EXPECT_FALSE(r.all_finite());
}

TEST(Report, EmpiricalThreshold) {
    InequalityReport r;
    r.add(0, 5.0, 1.0, 1.0);
    r.add(0, 10.0, 4.0, 1.0);
    r.add(0, 20.0, 3.0, 1.0);
    r.add(0, 40.0, 2.0, 1.0);
    EXPECT_EQ(r.empirical_s0(), 10.0);
    const auto m = r.fitted_by_s();
    EXPECT_EQ(m.at(20.0), 3.0);
}

TEST(CarlemanMain, ZeroDataIsTrivial) {
    const Lab lab(40);
    const Field wT = Field::age_space(lab.g);
    const auto sides = carleman_main(solve_adjoint(lab.model, wT), wT, lab.W);
    EXPECT_EQ(sides.lhs, 0.0);
    EXPECT_EQ(sides.rhs, 0.0);
}

TEST(CarlemanMain, FiniteDespiteDegeneracyAndPoles) {
    const Lab lab(50);
    const Model no_renewal = lab.model.without_beta();
    FourierEnsemble e(3);
    for (int t = 0; t < 4; ++t) {
        const Field wT = e.band(lab.g);
        for (double s : {5.0, 20.0, 50.0}) {
            const auto sides = carleman_main(solve_adjoint(no_renewal, wT), wT, lab.W.with_s(s));
            EXPECT_TRUE(std::isfinite(sides.lhs));
            EXPECT_TRUE(std::isfinite(sides.rhs));
            EXPECT_GT(sides.lhs, 0.0);
            EXPECT_GT(sides.rhs, 0.0);
        }
    }
}

TEST(CarlemanIntermediate, ZeroDataIsTrivial) {
    const Lab lab(40);
    const Field h = Field::trajectory(lab.g);
    const auto sides = carleman_intermediate(solve_adjoint(lab.model.without_beta(), Field::age_space(lab.g), &h), h, lab.W);
    EXPECT_EQ(sides.lhs, 0.0);
    EXPECT_EQ(sides.rhs, 0.0);
}

TEST(CarlemanIntermediate, BoundarySignPattern) {
    const Lab lab(50);
    FourierEnsemble e(5);
    for (int t = 0; t < 4; ++t) {
        const Field wT = e.band(lab.g), h = e.trajectory(lab.g);
        const auto sides = carleman_intermediate(solve_adjoint(lab.model.without_beta(), wT, &h), h, lab.W);
        EXPECT_GE(sides.boundary_right, 0.0);
        EXPECT_LE(sides.boundary_left, 0.0);
        EXPECT_GT(sides.source_term, 0.0);
        EXPECT_DOUBLE_EQ(sides.rhs, sides.source_term + sides.boundary_right - sides.boundary_left);
        EXPECT_TRUE(std::isfinite(sides.lhs / sides.rhs));
    }
}

TEST(Caccioppoli, ZeroDataIsTrivial) {
    const Lab lab(40);
    const Field z = Field::trajectory(lab.g);
    const auto sides = caccioppoli_check(z, z, lab.W);
    EXPECT_EQ(sides.lhs, 0.0);
    EXPECT_EQ(sides.rhs, 0.0);
}

TEST(Caccioppoli, RejectsSubdomainAroundX0) {
    const Lab lab(40);
    const Field z = Field::trajectory(lab.g);
    EXPECT_THROW(caccioppoli_check(z, z, lab.W, Interval{0.45, 0.55}), std::invalid_argument);
    EXPECT_THROW(caccioppoli_check(z, z, lab.W, Interval{0.4, 0.5}), std::invalid_argument);
}

TEST(Caccioppoli, DomainMonotonicity) {
    const Lab lab(80);
    FourierEnsemble e(6);
    const Field wT = e.band(lab.g), h = e.trajectory(lab.g);
    const Field w = solve_adjoint(lab.model.without_beta(), wT, &h);
    double prev = std::numeric_limits<double>::infinity();
    for (const Interval iv : {Interval{0.35, 0.45}, Interval{0.36, 0.44}, Interval{0.375, 0.425}, Interval{0.3875, 0.4125}}) {
        const auto sides = caccioppoli_check(w, h, lab.W, iv);
        EXPECT_LE(sides.lhs, prev);
        EXPECT_GT(sides.lhs, 0.0);
        prev = sides.lhs;
    }
}

TEST(HardyPoincare, ZeroIsTrivial) {
    const auto g = bench_grid(50, 20);
    const auto k = Dispersion::power_law(0.5, 0.5);
    const auto rep = hardy_poincare_check({std::vector<double>(g.nx() + 1, 0.0)}, k, g);
    EXPECT_EQ(rep.trivial_trials, 1u);
    EXPECT_TRUE(rep.trials.empty());
}

TEST(HardyPoincare, TentFunctionClosedForm) {
    // ν = 1 − 2|x − 1/2| is linear on each cell; for α = 1/2, p = |x−x0|^{3/2}, so both sides are elementary integrals.
    const double r = 0.5;
    const double lhs = 2.0 * (2.0 * std::sqrt(r) - 8.0 / 3.0 * std::pow(r, 1.5) + 8.0 / 5.0 * std::pow(r, 2.5));
    const double rhs = 4.0 * 2.0 * std::pow(r, 2.5) / 2.5;
    for (std::size_t nx : {10, 40, 100}) {
        const auto g = bench_grid(nx, 20);
        std::vector<double> nu(nx + 1);
        for (std::size_t i = 0; i <= nx; ++i) nu[i] = 1.0 - 2.0 * std::abs(g.x(i) - 0.5);
        const auto s = hardy_poincare_sides(nu, Dispersion::power_law(0.5, 0.5), g);
        EXPECT_NEAR(s.lhs, lhs, 1e-6 * lhs) << nx;
        EXPECT_NEAR(s.rhs, rhs, 1e-6 * rhs) << nx;
    }
}

TEST(HardyPoincare, SineRatioStableUnderRefinement) {
    const auto k = Dispersion::power_law(0.5, 0.5);
    double prev = 0.0;
    for (std::size_t nx : {100, 200, 400}) {
        const auto g = bench_grid(nx, 20);
        const auto s = hardy_poincare_sides(nodal({1.0}, nx), k, g);
        const double ratio = s.lhs / s.rhs;
        EXPECT_TRUE(std::isfinite(ratio));
        if (prev > 0.0) {
            EXPECT_LE(std::abs(ratio - prev) / prev, 0.10);
        }
        prev = ratio;
    }
}

TEST(HardyPoincare, Homogeneity) {
    const auto g = bench_grid(100, 20);
    const auto k = Dispersion::power_law(0.5, 0.5);
    FourierEnsemble e(8);
    const auto nu = e.space_function(g.nx());
    auto nu3 = nu;
    for (double& v : nu3) v *= 3.0;
    const auto a = hardy_poincare_sides(nu, k, g), b = hardy_poincare_sides(nu3, k, g);
    EXPECT_NEAR(b.lhs, 9.0 * a.lhs, 1e-12 * b.lhs);
    EXPECT_NEAR(b.rhs, 9.0 * a.rhs, 1e-12 * b.rhs);
}

TEST(HardyPoincare, BoundaryAndSizeErrors) {
    const auto g = bench_grid(20, 20);
    const auto k = Dispersion::power_law(0.5, 0.5);
    std::vector<double> nu(g.nx() + 1, 0.0);
    nu.front() = 0.1;
    EXPECT_THROW(hardy_poincare_sides(nu, k, g), std::invalid_argument);
    EXPECT_THROW(hardy_poincare_sides(std::vector<double>(5, 0.0), k, g), std::invalid_argument);
    EXPECT_THROW(hardy_poincare_check({}, k, g), std::invalid_argument);
}

TEST(WeightSup, FiniteAndInterior) {
    const Lab lab(100);
    for (int d : {1, 2, 3}) {
        const auto sup = weight_sup_check(lab.W, d);
        EXPECT_TRUE(std::isfinite(sup.value)) << d;
        EXPECT_GT(sup.value, 0.0) << d;
        EXPECT_TRUE(sup.strictly_inside) << d;
    }
    EXPECT_THROW(weight_sup_check(lab.W, 0), std::invalid_argument);
    EXPECT_THROW(weight_sup_check(lab.W, 4), std::invalid_argument);
}

TEST(WeightSup, WithoutExponentialDivergesUnderRefinement) {
    const Lab coarse(50), fine(100);
    for (int d : {1, 2, 3}) {
        const double a = weight_sup_check(coarse.W, d, false).value;
        const double b = weight_sup_check(fine.W, d, false).value;
        // Θ at the first interior node grows like Δ^{-8}.
        EXPECT_GT(b, 100.0 * a) << d;
        EXPECT_FALSE(weight_sup_check(fine.W, d, false).strictly_inside);
    }
}

TEST(WeightSup, DoublingSDecreasesWhereExponentialDominates) {
    const Lab lab(60);
    const auto W2 = lab.W.with_s(2.0 * lab.W.s());
    std::size_t checked = 0;
    for (std::size_t n = 1; n < lab.g.nt(); ++n)
        for (std::size_t j = 1; j <= lab.g.na(); ++j)
            for (std::size_t i = 1; i < lab.g.nx(); i += 5)
                for (int d : {1, 2, 3}) {
                    const double lt = lab.W.log_theta_node(n, j);
                    const double st = lab.W.s() * std::exp(lt);
                    const double psi = lab.W.Psi_node(i);
                    if (!(2.0 * st * -psi > d)) continue;
                    const double v1 = detail::weighted(std::log(lab.W.s()) + lt, st, d, psi);
                    const double v2 = detail::weighted(std::log(W2.s()) + lt, 2.0 * st, d, psi);
                    EXPECT_LE(v2, v1);
                    ++checked;
                }
    EXPECT_GT(checked, 0u);
}

TEST(Observability, TrivialAndSupport) {
    const Lab lab(40);
    FourierEnsemble e(9);
    std::vector<Field> ens{Field::age_space(lab.g), e.band(lab.g), e.band(lab.g)};
    const auto rep = observability_check(lab.model, ens);
    EXPECT_EQ(rep.trivial_trials, 1u);
    ASSERT_EQ(rep.trials.size(), 2u);
    EXPECT_TRUE(rep.all_finite());
    // Band-supported data: the a < δ term vanishes, so rhs is the observed energy alone.
    const Field w = solve_adjoint(lab.model, ens[1]);
    EXPECT_DOUBLE_EQ(rep.trials[0].rhs, norm_sq(w, lab.g, Restriction::q()));
    EXPECT_EQ(norm_sq(ens[1], lab.g, Restriction::below_delta(lab.g)), 0.0);
    EXPECT_THROW(observability_check(lab.model, {}), std::invalid_argument);
}

TEST(Observability, RatioScaleInvariant) {
    const Lab lab(40);
    FourierEnsemble e(10);
    const Field wT = e.age_space(lab.g);
    const auto r = observability_check(lab.model, {wT, 5.0 * wT});
    ASSERT_EQ(r.trials.size(), 2u);
    EXPECT_NEAR(r.trials[1].ratio, r.trials[0].ratio, 1e-12 * r.trials[0].ratio);
}

TEST(CarlemanLab, EnsembleFiniteAndDeterministic) {
    const Lab lab(40);
    FourierEnsemble e(11);
    std::vector<Field> wTs, hs;
    for (int t = 0; t < 3; ++t) wTs.push_back(e.band(lab.g));
    for (int t = 0; t < 3; ++t) hs.push_back(e.trajectory(lab.g));
    const std::vector<double> s_values{5.0, 20.0, 50.0};
    const auto a = carleman_lab(lab.model, lab.W, wTs, hs, s_values);
    const auto b = carleman_lab(lab.model, lab.W, wTs, hs, s_values);
    for (const auto* r : {&a.main, &a.intermediate, &a.caccioppoli}) {
        EXPECT_TRUE(r->all_finite()) << r->name;
        EXPECT_EQ(r->trials.size(), 9u) << r->name;
        EXPECT_GT(r->fitted_constant, 0.0) << r->name;
    }
    EXPECT_EQ(a.main.fitted_constant, b.main.fitted_constant);
    EXPECT_EQ(a.intermediate.fitted_constant, b.intermediate.fitted_constant);
    EXPECT_GE(a.min_boundary_right, 0.0);
    EXPECT_LE(a.max_boundary_left, 0.0);
    EXPECT_THROW(carleman_lab(lab.model, lab.W, wTs, {}, s_values), std::invalid_argument);
    EXPECT_THROW(carleman_lab(lab.model, lab.W, wTs, hs, {}), std::invalid_argument);
    EXPECT_THROW(carleman_lab(lab.model, lab.W, wTs, hs, {-1.0}), std::invalid_argument);
}

TEST(CarlemanLab, RatiosScaleInvariant) {
    const Lab lab(40);
    FourierEnsemble e(12);
    const Field wT = e.band(lab.g), h = e.trajectory(lab.g);
    const auto a = carleman_lab(lab.model, lab.W, {wT}, {h}, {20.0});
    const auto b = carleman_lab(lab.model, lab.W, {4.0 * wT}, {4.0 * h}, {20.0});
    EXPECT_NEAR(b.main.fitted_constant, a.main.fitted_constant, 1e-12 * a.main.fitted_constant);
    EXPECT_NEAR(b.intermediate.fitted_constant, a.intermediate.fitted_constant, 1e-12 * a.intermediate.fitted_constant);
    EXPECT_NEAR(b.caccioppoli.fitted_constant, a.caccioppoli.fitted_constant, 1e-12 * a.caccioppoli.fitted_constant);
}
