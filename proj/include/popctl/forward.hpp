#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "popctl/diffusion.hpp"
#include "popctl/field.hpp"
#include "popctl/model.hpp"
#include "popctl/quadrature.hpp"

namespace popctl {

struct ForwardProblem {
    CoefficientSet coeffs;
    SpaceTimeGrid grid;
    Field y0;                      // age-space slice at t = 0
    std::optional<Field> control;  // trajectory-shaped, zero-extended outside ω
};

/// Number of nonzero control samples at nodes outside ω (they are ignored by the solver).
inline std::size_t control_outside_omega(const Field& control, const SpaceTimeGrid& g) {
    std::size_t count = 0;
    for (std::size_t n = 0; n < control.extent_t(); ++n)
        for (std::size_t j = 0; j < control.extent_a(); ++j) {
            auto r = control.row(n, j);
            for (std::size_t i = 0; i < r.size(); ++i)
                if (!g.in_omega(i) && r[i] != 0.0) ++count;
        }
    return count;
}

/// Newborn row ∫_0^A β(t_n,a,x) y(t_n,a,x) da by the trapezoid rule in a.
inline std::vector<double> renewal_integral(const Field& level, const Field& beta_samples, std::size_t n,
                                            const SpaceTimeGrid& g) {
    if (level.shape() != FieldShape::age_space || !level.matches(g))
        throw std::invalid_argument("renewal_integral: expected an age-space slice on the grid");
    const auto wa = trapezoid_weights(g.na() + 1, g.da());
    std::vector<double> out(g.nx() + 1, 0.0);
    for (std::size_t j = 0; j <= g.na(); ++j) {
        auto y = level.row(j);
        auto b = beta_samples.row(n, j);
        for (std::size_t i = 0; i <= g.nx(); ++i) out[i] += wa[j] * b[i] * y[i];
    }
    out.front() = 0.0;
    out.back() = 0.0;
    return out;
}

inline std::vector<double> renewal_integral(const Field& level, const Rate& beta, double t, const SpaceTimeGrid& g) {
    Field b = Field::trajectory(g);
    const std::size_t n = static_cast<std::size_t>(std::llround(t / g.dt()));
    for (std::size_t j = 0; j <= g.na(); ++j)
        for (std::size_t i = 0; i <= g.nx(); ++i) b(n, j, i) = beta(t, g.a(j), g.x(i));
    return renewal_integral(level, b, n, g);
}

/// Solves the controlled population model on the whole grid.
///
/// Each step follows the characteristic a = t + const: the slice at (t_{n+1}, a_j)
/// comes from (t_n, a_{j−1}) by one backward-Euler solve with mortality sampled at
/// the arrival node and the control sampled at the departure node. The newborn row
/// of the new level is filled afterwards from the renewal integral (β(·,0,·) = 0
/// removes its self-coupling).
inline Field solve_forward(const Model& model, const Field& y0, const Field* control = nullptr) {
    const auto& g = model.grid();
    const auto& s = model.sampled();
    if (y0.shape() != FieldShape::age_space || !y0.matches(g))
        throw std::invalid_argument("solve_forward: y0 must be an age-space slice on the grid");
    if (control && (control->shape() != FieldShape::trajectory || !control->matches(g)))
        throw std::invalid_argument("solve_forward: control must be trajectory-shaped on the grid");

    Field y = Field::trajectory(g);
    for (std::size_t j = 0; j <= g.na(); ++j) {
        auto src = y0.row(j);
        auto dst = y.row(0, j);
        std::copy(src.begin(), src.end(), dst.begin());
        dst.front() = 0.0;
        dst.back() = 0.0;
    }

    std::vector<char> omega(g.nx() + 1);
    for (std::size_t i = 0; i <= g.nx(); ++i) omega[i] = g.in_omega(i) ? 1 : 0;

    DiffusionStepper stepper = model.stepper();
    std::vector<double> rhs(g.nx() + 1);
    const double dt = g.dt();
    const auto wa = trapezoid_weights(g.na() + 1, g.da());
    for (std::size_t n = 0; n < g.nt(); ++n) {
        for (std::size_t j = 1; j <= g.na(); ++j) {
            auto old = y.row(n, j - 1);
            std::copy(old.begin(), old.end(), rhs.begin());
            if (control) {
                auto c = control->row(n, j - 1);
                for (std::size_t i = 0; i <= g.nx(); ++i)
                    if (omega[i]) rhs[i] += dt * c[i];
            }
            stepper.solve(s.mu.row(n + 1, j), rhs, y.row(n + 1, j));
        }
        auto newborn = y.row(n + 1, 0);
        std::fill(newborn.begin(), newborn.end(), 0.0);
        if (!s.beta_zero) {
            for (std::size_t j = 1; j <= g.na(); ++j) {
                auto b = s.beta.row(n + 1, j);
                auto yr = y.row(n + 1, j);
                for (std::size_t i = 1; i < g.nx(); ++i) newborn[i] += wa[j] * b[i] * yr[i];
            }
        }
    }
    y.require_finite("solve_forward");
    return y;
}

inline Field solve_forward(const ForwardProblem& p) {
    const Model model(p.coeffs, p.grid);
    return solve_forward(model, p.y0, p.control ? &*p.control : nullptr);
}

struct EnergyReport {
    double sup_t_norm = 0.0;
    double sup_a_norm = 0.0;
    double hk_dissipation = 0.0;
    double bound_rhs = 0.0;
    double ratio = 0.0;
};

/// Three quantities on the left of the well-posedness estimate and its right-hand side.
inline EnergyReport energy_report(const Field& y, const Model& model, const Field& y0, const Field* control = nullptr) {
    const auto& g = model.grid();
    if (y.shape() != FieldShape::trajectory || !y.matches(g))
        throw std::invalid_argument("energy_report: trajectory does not match grid");
    EnergyReport r;
    for (std::size_t n = 0; n <= g.nt(); ++n) r.sup_t_norm = std::max(r.sup_t_norm, norm_sq(y.time_level(n), g));
    for (std::size_t j = 0; j <= g.na(); ++j) r.sup_a_norm = std::max(r.sup_a_norm, norm_sq(y.age_level(j), g));
    const auto& kh = model.sampled().k_half;
    const auto wt = trapezoid_weights(g.nt() + 1, g.dt());
    const auto wa = trapezoid_weights(g.na() + 1, g.da());
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t j = 0; j <= g.na(); ++j) r.hk_dissipation += wt[n] * wa[j] * hk_row(y.row(n, j), kh, g.dx());
    r.bound_rhs = norm_sq(y0, g) + (control ? norm_sq(*control, g, Restriction::q()) : 0.0);
    const double lhs = r.sup_t_norm + r.sup_a_norm + r.hk_dissipation;
    r.ratio = r.bound_rhs > 0.0 ? lhs / r.bound_rhs : 0.0;
    return r;
}

}  // namespace popctl
