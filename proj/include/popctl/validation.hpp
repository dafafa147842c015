#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "popctl/coefficients.hpp"
#include "popctl/grid.hpp"

namespace popctl {

inline constexpr double validator_tol_abs = 1e-12;
inline constexpr double validator_tol_rel = 1e-8;

struct Violation {
    std::string location;  // e.g. "x=0.25" or "t=0.1,a=0,x=0.5"
    double lhs = 0.0;
    double rhs = 0.0;
    std::string what;
};

struct ValidationReport {
    std::string name;
    bool passed = true;
    double fitted_gamma = 0.0;
    std::optional<double> fitted_theta;
    std::vector<Violation> violations;

    void add(Violation v) {
        violations.push_back(std::move(v));
        passed = false;
    }
};

namespace detail {

inline std::string at_x(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "x=%.17g", x);
    return buf;
}

/// k'(x_i) from the analytic derivative if present, otherwise by finite differences
/// on the grid nodes: central away from x0, one-sided on the side away from x0 next to it.
inline double node_derivative(const Dispersion& k, const SpaceTimeGrid& g, std::size_t i) {
    const double x = g.x(i);
    if (auto d = k.derivative(x)) return *d;
    const std::size_t i0 = g.x0_index();
    const double h = g.dx();
    const bool left_edge = i == 0, right_edge = i == g.nx();
    const bool next_to_x0_on_right = i == i0 + 1;  // left neighbour is x0
    const bool next_to_x0_on_left = i + 1 == i0;   // right neighbour is x0
    if (left_edge || next_to_x0_on_right) return (k(g.x(i + 1)) - k(x)) / h;
    if (right_edge || next_to_x0_on_left) return (k(x) - k(g.x(i - 1))) / h;
    return (k(g.x(i + 1)) - k(g.x(i - 1))) / (2.0 * h);
}

}  // namespace detail

/// Checks (x − x0) k'(x) ≤ γ k(x) at every node x ≠ x0 and fits the smallest such γ.
inline ValidationReport validate_degeneracy(const Dispersion& k, double gamma, const SpaceTimeGrid& g) {
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("validate_degeneracy: gamma must lie in [0,1)");
    ValidationReport rep;
    rep.name = "degeneracy";
    const double x0 = g.x0();
    double fitted = 0.0;
    for (std::size_t i = 0; i <= g.nx(); ++i) {
        if (i == g.x0_index()) continue;
        const double x = g.x(i);
        const double kx = k(x);
        if (!(kx > 0.0)) throw std::invalid_argument("validate_degeneracy: k must be positive off x0 (" + detail::at_x(x) + ")");
        const double lhs = (x - x0) * detail::node_derivative(k, g, i);
        const double rhs = gamma * kx;
        fitted = std::max(fitted, lhs / kx);
        if (lhs > rhs + validator_tol_abs) rep.add({detail::at_x(x), lhs, rhs, "(x-x0)k' > gamma k"});
    }
    rep.fitted_gamma = fitted;
    return rep;
}

namespace detail {

inline bool hp_holds(const Dispersion& k, double theta, const SpaceTimeGrid& g, ValidationReport* rep) {
    const std::size_t i0 = g.x0_index();
    const double x0 = g.x0();
    auto ratio = [&](std::size_t i) { return k(g.x(i)) / std::pow(std::abs(g.x(i) - x0), theta); };
    bool ok = true;
    // Left of x0: nonincreasing in x.
    for (std::size_t i = 0; i + 1 < i0; ++i) {
        const double r0 = ratio(i), r1 = ratio(i + 1);
        if (r1 > r0 + validator_tol_rel * std::abs(r0)) {
            ok = false;
            if (rep) rep->add({at_x(g.x(i + 1)), r1, r0, "k/|x-x0|^theta increases left of x0"});
        }
    }
    // Right of x0: nondecreasing in x.
    for (std::size_t i = i0 + 1; i < g.nx(); ++i) {
        const double r0 = ratio(i), r1 = ratio(i + 1);
        if (r1 < r0 - validator_tol_rel * std::abs(r0)) {
            ok = false;
            if (rep) rep->add({at_x(g.x(i + 1)), r1, r0, "k/|x-x0|^theta decreases right of x0"});
        }
    }
    return ok;
}

}  // namespace detail

/// Monotonicity hypothesis on x ↦ k(x)/|x − x0|^θ for θ ∈ (0, γ].
///
/// γ = 0 leaves (0, γ] empty; that case is reported as a failed check with a
/// single explanatory violation instead of being decided either way.
inline ValidationReport validate_hp(const Dispersion& k, double theta, double gamma, const SpaceTimeGrid& g) {
    ValidationReport rep;
    rep.name = "hardy-poincare-monotonicity";
    if (gamma == 0.0) {
        rep.add({detail::at_x(g.x0()), theta, gamma, "theta interval (0,gamma] is empty for gamma = 0"});
        return rep;
    }
    if (!(theta > 0.0) || theta > gamma)
        throw std::invalid_argument("validate_hp: theta must lie in (0, gamma]");
    const bool ok = detail::hp_holds(k, theta, g, &rep);
    if (ok) {
        // Passing θ form an interval (0, θ*]; locate θ* by bisection on [θ, γ].
        double lo = theta, hi = gamma;
        if (detail::hp_holds(k, gamma, g, nullptr)) {
            lo = gamma;
        } else {
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (detail::hp_holds(k, mid, g, nullptr) ? lo : hi) = mid;
            }
        }
        rep.fitted_theta = lo;
    }
    return rep;
}

/// μ ≥ 0, β ≥ 0 everywhere and β(t,0,x) = 0 on all grid samples.
inline ValidationReport validate_rates(const CoefficientSet& c, const SpaceTimeGrid& g) {
    ValidationReport rep;
    rep.name = "rates";
    char loc[96];
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t j = 0; j <= g.na(); ++j)
            for (std::size_t i = 0; i <= g.nx(); ++i) {
                const double t = g.t(n), a = g.a(j), x = g.x(i);
                const double m = c.mu(t, a, x), b = c.beta(t, a, x);
                auto where = [&] {
                    std::snprintf(loc, sizeof loc, "t=%.17g,a=%.17g,x=%.17g", t, a, x);
                    return std::string(loc);
                };
                if (!(m >= 0.0)) rep.add({where(), m, 0.0, "mu < 0"});
                if (!(b >= 0.0)) rep.add({where(), b, 0.0, "beta < 0"});
                if (j == 0 && b != 0.0) rep.add({where(), b, 0.0, "beta(t,0,x) != 0"});
            }
    return rep;
}

}  // namespace popctl
