#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <vector>

#include "popctl/adjoint.hpp"
#include "popctl/field.hpp"
#include "popctl/forward.hpp"
#include "popctl/model.hpp"
#include "popctl/quadrature.hpp"

namespace popctl {

struct ControlSolution {
    Field control;            // ϑ on q, zero outside ω
    Field terminal_adjoint;   // converged p on the band, zero for a < δ
    Field trajectory;         // controlled y
    double y_final_norm_sq = 0.0;
    double control_cost = 0.0;
    double epsilon = 0.0;
    std::size_t cg_iterations = 0;
    double cg_residual = 0.0;
    bool iteration_cap_hit = false;
    double cost_value = 0.0;
    std::vector<double> residual_history;  // relative residual, index 0 = initial guess
    std::vector<double> energy_history;    // quadratic functional of the dual problem
};

struct CgOptions {
    double tol = 1e-6;
    std::size_t maxit = 500;
};

/// Discrete L²((δ,A)×(0,1)) pairing of age-space slices.
inline double band_inner(const Field& u, const Field& v, const SpaceTimeGrid& g) {
    return inner_product(u, v, g, Restriction::band(g));
}

/// (Ep)_j = (W_j/Δa) p_j with W the band trapezoid weights: the slice whose plain
/// age-sum pairing with y(T) reproduces the band pairing with p.
inline Field band_extension(const Field& p, const SpaceTimeGrid& g) {
    const auto wb = trapezoid_weights(g.na() + 1, g.da(), g.band_ages());
    Field out = Field::age_space(g);
    for (std::size_t j = g.delta_index(); j <= g.na(); ++j) {
        const double c = wb[j] / g.da();
        auto src = p.row(j);
        auto dst = out.row(j);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = c * src[i];
    }
    return out;
}

/// Zeroes the rows below the band.
inline Field band_restrict(Field f, const SpaceTimeGrid& g) {
    for (std::size_t j = 0; j < g.delta_index(); ++j) std::fill(f.row(j).begin(), f.row(j).end(), 0.0);
    return f;
}

/// −w χ_ω (or +w χ_ω with sign = 1) as a control field.
inline Field control_from_adjoint(const Field& w, const SpaceTimeGrid& g, double sign = -1.0) {
    Field c = Field::like(w);
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t j = 0; j <= g.na(); ++j) {
            auto src = w.row(n, j);
            auto dst = c.row(n, j);
            for (std::size_t i = 0; i <= g.nx(); ++i) dst[i] = g.in_omega(i) ? sign * src[i] : 0.0;
        }
    return c;
}

/// Pairing on q matched to the scheme: the control at (t_n, a_j) acts over one step for n < nt and
/// j < na, so the sum is left-point in t and a. Equals ⟨Gp, p⟩_band for u = v = w_p up to round-off.
inline double scheme_q_inner(const Field& u, const Field& v, const SpaceTimeGrid& g) {
    if (!u.same_shape(v) || u.shape() != FieldShape::trajectory || !u.matches(g))
        throw std::invalid_argument("scheme_q_inner: expected trajectory fields on the grid");
    double total = 0.0;
    for (std::size_t n = 0; n < g.nt(); ++n)
        for (std::size_t j = 0; j < g.na(); ++j) {
            auto ur = u.row(n, j);
            auto vr = v.row(n, j);
            double s = 0.0;
            for (std::size_t i = 0; i <= g.nx(); ++i)
                if (g.in_omega(i)) s += ur[i] * vr[i];
            total += s;
        }
    return total * g.dt() * g.da() * g.dx();
}

/// J_ε(ϑ) =(1/2ε)‖y(T)‖²_{(δ,A)×(0,1)} + ½‖ϑ‖²_q.
inline double cost_functional(const Model& model, const Field& control, const Field& y0, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("cost_functional: epsilon must be positive");
    const auto& g = model.grid();
    const Field y = solve_forward(model, y0, &control);
    const Field yT = y.time_level(g.nt());
    return 0.5 / epsilon * norm_sq(yT, g, Restriction::band(g)) + 0.5 * norm_sq(control, g, Restriction::q());
}

/// Gram operator on terminal adjoint data: p ↦ band part of y(T) for zero initial data
/// and control +w χ_ω, w the adjoint with terminal slice E p. Symmetric and positive
/// semidefinite in the band pairing; the control of the penalized problem is −w χ_ω.
inline Field gram_apply(const Model& model, const Field& p, Field* adjoint_out = nullptr) {
    const auto& g = model.grid();
    const Field w = solve_adjoint(model, band_extension(p, g), nullptr, true);
    const Field c = control_from_adjoint(w, g, 1.0);
    const Field y = solve_forward(model, Field::age_space(g), &c);
    if (adjoint_out) *adjoint_out = w;
    return band_restrict(y.time_level(g.nt()), g);
}

/// Penalized HUM: conjugate gradient on (G + εI)p = R y_free(T) in the band pairing, then ϑ = −w_p χ_ω.
inline ControlSolution solve_control(const Model& model, const Field& y0, double epsilon, const CgOptions& opt = {}) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("solve_control: epsilon must be positive");
    if (opt.maxit == 0) throw std::invalid_argument("solve_control: maxit must be positive");
    const auto& g = model.grid();
    if (!(g.T() < g.delta())) throw std::invalid_argument("solve_control: requires T < delta");

    const Field y_free = solve_forward(model, y0);
    const Field r = band_restrict(y_free.time_level(g.nt()), g);
    const double r_norm = std::sqrt(band_inner(r, r, g));

    ControlSolution sol;
    sol.epsilon = epsilon;
    Field p = Field::age_space(g);
    Field res = r;
    auto energy = [&](const Field& pp, const Field& rr) { return -0.5 * (band_inner(r, pp, g) + band_inner(rr, pp, g)); };
    sol.residual_history.push_back(r_norm > 0.0 ? 1.0 : 0.0);
    sol.energy_history.push_back(0.0);

    if (r_norm > 0.0) {
        Field d = res;
        double rr = band_inner(res, res, g);
        for (std::size_t it = 0; it < opt.maxit; ++it) {
            Field q = gram_apply(model, d);
            q.axpy(epsilon, d);
            const double dq = band_inner(d, q, g);
            if (!(dq > 0.0)) throw std::runtime_error("solve_control: operator lost positivity");
            const double alpha = rr / dq;
            p.axpy(alpha, d);
            res.axpy(-alpha, q);
            const double rr_new = band_inner(res, res, g);
            sol.cg_iterations = it + 1;
            sol.residual_history.push_back(std::sqrt(rr_new) / r_norm);
            sol.energy_history.push_back(energy(p, res));
            if (std::sqrt(rr_new) <= opt.tol * r_norm) break;
            d *= rr_new / rr;
            d += res;
            rr = rr_new;
        }
    }
    sol.cg_residual = sol.residual_history.back();
    sol.iteration_cap_hit = sol.cg_residual > opt.tol && r_norm > 0.0;

    const Field w = solve_adjoint(model, band_extension(p, g), nullptr, true);
    sol.control = control_from_adjoint(w, g, -1.0);
    sol.trajectory = solve_forward(model, y0, &sol.control);
    const Field yT = sol.trajectory.time_level(g.nt());
    sol.y_final_norm_sq = norm_sq(yT, g, Restriction::band(g));
    sol.control_cost = norm_sq(sol.control, g, Restriction::q());
    sol.cost_value = 0.5 / epsilon * sol.y_final_norm_sq + 0.5 * sol.control_cost;
    sol.terminal_adjoint = std::move(p);
    return sol;
}

struct NullReachReport {
    double terminal_constant = 0.0;  // ‖y(T)‖²_band / (ε‖y0‖²)
    double cost_constant = 0.0;      // ‖ϑ‖²_q / ‖y0‖²
    double relative_terminal_norm = 0.0;  // ‖y(T)‖_band / ‖y0‖
};

inline NullReachReport verify_null_reach(const ControlSolution& sol, const Field& y0, const SpaceTimeGrid& g) {
    NullReachReport r;
    const double y0n = norm_sq(y0, g);
    if (y0n == 0.0) return r;
    r.terminal_constant = sol.y_final_norm_sq / (sol.epsilon * y0n);
    r.cost_constant = sol.control_cost / y0n;
    r.relative_terminal_norm = std::sqrt(sol.y_final_norm_sq / y0n);
    return r;
}

/// Relative mismatch between (1/ε) R y(T) and the converged p.
inline double optimality_defect(const ControlSolution& sol, const SpaceTimeGrid& g) {
    Field yT = band_restrict(sol.trajectory.time_level(g.nt()), g);
    yT *= 1.0 / sol.epsilon;
    const double pn = std::sqrt(band_inner(sol.terminal_adjoint, sol.terminal_adjoint, g));
    if (pn == 0.0) return std::sqrt(band_inner(yT, yT, g));
    yT -= sol.terminal_adjoint;
    return std::sqrt(band_inner(yT, yT, g)) / pn;
}

/// Independent solves for several penalties, one task each.
inline std::vector<ControlSolution> epsilon_sweep(const Model& model, const Field& y0, const std::vector<double>& eps,
                                                  const CgOptions& opt = {}) {
    std::vector<std::future<ControlSolution>> jobs;
    jobs.reserve(eps.size());
    for (double e : eps) jobs.push_back(std::async(std::launch::async, [&model, &y0, e, opt] { return solve_control(model, y0, e, opt); }));
    std::vector<ControlSolution> out;
    out.reserve(eps.size());
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace popctl
