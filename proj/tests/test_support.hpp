#pragma once

// Shared fixtures and closed-form oracles for the unit and acceptance tests.

#include <cmath>
#include <numbers>

#include "popctl/popctl.hpp"

namespace popctl::testing {

inline constexpr double pi = std::numbers::pi;

/// Benchmark geometry (A = 1, δ = 0.5, T = 0.4, ω = (0.3,0.7)) at nx × na, nt = 0.4·na.
inline SpaceTimeGrid bench_grid(std::size_t nx, std::size_t na) {
    return SpaceTimeGrid::create(aligned_params(GridParams{}, nx, na));
}

inline CoefficientSet bench_coeffs(Rate beta = Rate::zero(), double mu = 0.0) {
    CoefficientSet c;
    c.k = Dispersion::power_law(0.5, 0.5);
    c.mu = Rate::constant(mu);
    c.beta = std::move(beta);
    return c;
}

/// 4a(A−a)/A², zero at a = 0.
inline Rate quadratic_beta(double A = 1.0, double scale = 4.0) {
    return Rate::age_profile([A, scale](double a) { return scale * a * (A - a) / (A * A); });
}

/// Quadratic profile switched off for a ≤ onset.
inline Rate gated_beta(double onset, double A = 1.0, double scale = 4.0) {
    return Rate::age_profile([A, scale, onset](double a) { return a <= onset ? 0.0 : scale * a * (A - a) / (A * A); });
}

/// Smooth age profile vanishing at a ≤ 0 and at a = 1.
inline double age_bump(double a) { return a <= 0.0 || a >= 1.0 ? 0.0 : std::pow(std::sin(pi * a), 2); }

/// Relative L²(Q) error of the scheme against e^{−(π²+m)t} g(a−t) sin(πx) with k ≡ 1, μ ≡ m, β ≡ 0.
inline double separable_error(std::size_t nx, std::size_t na, double m) {
    const auto g = bench_grid(nx, na);
    CoefficientSet c;
    c.k = Dispersion::constant(1.0);
    c.mu = Rate::constant(m);
    c.diagnostic = true;
    const Model model(c, g);
    Field y0 = Field::age_space(g);
    for (std::size_t j = 0; j <= g.na(); ++j)
        for (std::size_t i = 0; i <= g.nx(); ++i) y0(j, i) = age_bump(g.a(j)) * std::sin(pi * g.x(i));
    const Field y = solve_forward(model, y0);
    Field exact = Field::trajectory(g);
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t j = 0; j <= g.na(); ++j)
            for (std::size_t i = 1; i < g.nx(); ++i)
                exact(n, j, i) = std::exp(-(pi * pi + m) * g.t(n)) * age_bump(g.a(j) - g.t(n)) * std::sin(pi * g.x(i));
    return std::sqrt(norm_sq(y - exact, g) / norm_sq(exact, g));
}

}  // namespace popctl::testing

namespace popctl::testing {

/// Relative L²(Q) error of the adjoint against e^{−π²(T−t)} h(a+T−t) sin(πx) (k ≡ 1, μ = β = 0);
/// with trace_only the comparison is restricted to the a = 0 trace from trace_age_zero.
inline double backward_heat_error(std::size_t nx, std::size_t na, bool trace_only = false) {
    const auto g = bench_grid(nx, na);
    CoefficientSet c;
    c.k = Dispersion::constant(1.0);
    c.diagnostic = true;
    const Model model(c, g);
    Field wT = Field::age_space(g);
    for (std::size_t j = 0; j <= g.na(); ++j)
        for (std::size_t i = 0; i <= g.nx(); ++i) wT(j, i) = age_bump(g.a(j)) * std::sin(pi * g.x(i));
    auto exact = [&](double t, double a, double x) {
        return std::exp(-pi * pi * (g.T() - t)) * age_bump(a + g.T() - t) * std::sin(pi * x);
    };
    if (trace_only) {
        const Field tr = trace_age_zero(model, wT);
        Field ex = Field::time_space(g);
        for (std::size_t n = 0; n <= g.nt(); ++n)
            for (std::size_t i = 1; i < g.nx(); ++i) ex(n, i) = exact(g.t(n), 0.0, g.x(i));
        return std::sqrt(norm_sq(tr - ex, g) / norm_sq(ex, g));
    }
    const Field w = solve_adjoint(model, wT);
    Field ex = Field::trajectory(g);
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t j = 0; j <= g.na(); ++j)
            for (std::size_t i = 1; i < g.nx(); ++i) ex(n, j, i) = exact(g.t(n), g.a(j), g.x(i));
    return std::sqrt(norm_sq(w - ex, g) / norm_sq(ex, g));
}

/// Relative L² difference between duhamel_first_case and solve_adjoint over the region a > t + (A − T).
inline double duhamel_difference(const Model& model, const Field& wT) {
    const auto& g = model.grid();
    const Field w = solve_adjoint(model, wT);
    const Field tr = w.age_level(0);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t j = n + (g.na() - g.nt()) + 1; j <= g.na(); ++j) {
            const auto v = duhamel_first_case(model, tr, n, j);
            for (std::size_t i = 0; i <= g.nx(); ++i) {
                const double d = v[i] - w(n, j, i);
                num += d * d;
                den += w(n, j, i) * w(n, j, i);
            }
        }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Relative L²(Q_T) distance between the solver's a = 0 row and trace_age_zero.
inline double trace_difference(const Model& model, const Field& wT) {
    const auto& g = model.grid();
    const Field row = solve_adjoint(model, wT).age_level(0);
    const Field formula = trace_age_zero(model, wT);
    const double den = norm_sq(formula, g);
    return den > 0.0 ? std::sqrt(norm_sq(row - formula, g) / den) : std::sqrt(norm_sq(row, g));
}

}  // namespace popctl::testing
