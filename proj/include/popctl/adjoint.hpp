#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "popctl/field.hpp"
#include "popctl/model.hpp"
#include "popctl/quadrature.hpp"

namespace popctl {

struct AdjointProblem {
    CoefficientSet coeffs;
    SpaceTimeGrid grid;
    Field wT;                        // age-space slice at t = T
    std::optional<Field> source_h;   // right-hand side h of w_t + w_a + (k w_x)_x − μw = h
    bool require_band_support = false;
};

inline void check_band_support(const Field& wT, const SpaceTimeGrid& g) {
    for (std::size_t j = 0; j < g.delta_index(); ++j)
        for (double v : wT.row(j))
            if (v != 0.0) throw std::invalid_argument("adjoint: terminal data must be supported in a in (delta, A)");
}

/// Backward sweep for w_t + w_a + (k w_x)_x − μw = −β w(t,0,x) + h, w(T) = wT, w(t,A) = 0.
///
/// The slice at (t_n, a_j) comes from (t_{n+1}, a_{j+1}) by one implicit solve of
/// (I − Δt L_k + Δt μ) w = w_new + Δt (β w(t_n,0) − h), with μ sampled at the
/// departure node so each step uses the forward solver's matrix for the same
/// characteristic segment. The age-0 row of each level is solved first; its own
/// β term is zero, all other rows then read it.
inline Field solve_adjoint(const Model& model, const Field& wT, const Field* h = nullptr, bool band_support = false) {
    const auto& g = model.grid();
    const auto& s = model.sampled();
    if (wT.shape() != FieldShape::age_space || !wT.matches(g))
        throw std::invalid_argument("solve_adjoint: wT must be an age-space slice on the grid");
    if (h && (h->shape() != FieldShape::trajectory || !h->matches(g)))
        throw std::invalid_argument("solve_adjoint: source must be trajectory-shaped on the grid");
    if (band_support) check_band_support(wT, g);

    Field w = Field::trajectory(g);
    for (std::size_t j = 0; j <= g.na(); ++j) {
        auto src = wT.row(j);
        auto dst = w.row(g.nt(), j);
        std::copy(src.begin(), src.end(), dst.begin());
        dst.front() = 0.0;
        dst.back() = 0.0;
    }

    DiffusionStepper stepper = model.stepper();
    std::vector<double> rhs(g.nx() + 1);
    const double dt = g.dt();
    for (std::size_t n = g.nt(); n-- > 0;) {
        for (std::size_t j = 0; j < g.na(); ++j) {
            auto next = w.row(n + 1, j + 1);
            std::copy(next.begin(), next.end(), rhs.begin());
            if (h) {
                auto hr = h->row(n, j);
                for (std::size_t i = 1; i < g.nx(); ++i) rhs[i] -= dt * hr[i];
            }
            if (j > 0 && !s.beta_zero) {
                auto b = s.beta.row(n, j);
                auto w0 = w.row(n, 0);
                for (std::size_t i = 1; i < g.nx(); ++i) rhs[i] += dt * b[i] * w0[i];
            }
            stepper.solve(s.mu.row(n + 1, j + 1), rhs, w.row(n, j));
        }
        // w(t, A, x) = 0 is the zero-initialized row na.
    }
    w.require_finite("solve_adjoint");
    return w;
}

inline Field solve_adjoint(const AdjointProblem& p) {
    const Model model(p.coeffs, p.grid);
    return solve_adjoint(model, p.wT, p.source_h ? &*p.source_h : nullptr, p.require_band_support);
}

/// a = 0 trace from the pure parabolic evolution z' = L_k z − μz: for each level t_n,
/// wT(T − t_n, ·) is stepped backward over the horizon T − t_n along the characteristic
/// through (t_n, 0), with the same backward-Euler stepper as the solver.
inline Field trace_age_zero(const Model& model, const Field& wT) {
    const auto& g = model.grid();
    const auto& s = model.sampled();
    if (wT.shape() != FieldShape::age_space || !wT.matches(g))
        throw std::invalid_argument("trace_age_zero: wT must be an age-space slice on the grid");
    if (g.nt() > g.na()) throw std::invalid_argument("trace_age_zero: requires T < A");
    Field trace = Field::time_space(g);
    DiffusionStepper stepper = model.stepper();
    std::vector<double> z(g.nx() + 1);
    for (std::size_t n = 0; n <= g.nt(); ++n) {
        const std::size_t horizon = g.nt() - n;
        auto start = wT.row(horizon);
        std::copy(start.begin(), start.end(), z.begin());
        z.front() = 0.0;
        z.back() = 0.0;
        // Level l+1 at age l+1−n back to level l at age l−n.
        for (std::size_t l = g.nt(); l-- > n;) stepper.solve(s.mu.row(l + 1, l + 1 - n), z, z);
        std::copy(z.begin(), z.end(), trace.row(n).begin());
    }
    return trace;
}

/// Characteristic (Duhamel) representation of w(t_n, a_j, ·) in the region a > t + (A − T),
/// where the line through (t_n, a_j) leaves through a = A before reaching t = T:
///   w(t,a) = ∫_0^{A−a} S(s) [β(t+s, a+s) w(t+s, 0)] ds,
/// with S(s) the backward parabolic evolution along the line and w(·,0) given by `trace`.
/// Trapezoid rule in s.
inline std::vector<double> duhamel_first_case(const Model& model, const Field& trace, std::size_t n, std::size_t j) {
    const auto& g = model.grid();
    const auto& s = model.sampled();
    if (trace.shape() != FieldShape::time_space || !trace.matches(g))
        throw std::invalid_argument("duhamel_first_case: trace must be a time-space slice on the grid");
    if (n > g.nt() || j > g.na() || !(j > n + (g.na() - g.nt())))
        throw std::invalid_argument("duhamel_first_case: point outside the region a > t + (A - T)");
    const std::size_t len = g.na() - j;
    std::vector<double> v(g.nx() + 1, 0.0);
    if (len == 0) return v;
    const double d = g.dt();
    auto add_source = [&](std::size_t m, double c) {
        auto b = s.beta.row(n + m, j + m);
        auto tr = trace.row(n + m);
        for (std::size_t i = 1; i < g.nx(); ++i) v[i] += c * b[i] * tr[i];
    };
    DiffusionStepper stepper = model.stepper();
    add_source(len, 0.5 * d);
    for (std::size_t m = len; m-- > 0;) {
        stepper.solve(s.mu.row(n + m + 1, j + m + 1), v, v);
        add_source(m, m == 0 ? 0.5 * d : d);
    }
    return v;
}

/// |⟨y(T), wT⟩ − ⟨y0, w(0)⟩ − ⟨control, w⟩_q| / max(1, largest of the three magnitudes).
inline double duality_residual(const Field& y, const Field& w, const Field* control, const Field& y0, const Field& wT,
                               const SpaceTimeGrid& g) {
    if (!y.matches(g) || !w.matches(g) || !y0.matches(g) || !wT.matches(g) || (control && !control->matches(g)))
        throw std::invalid_argument("duality_residual: grid mismatch");
    const double terminal = inner_product(y.time_level(g.nt()), wT, g);
    const double initial = inner_product(y0, w.time_level(0), g);
    const double source = control ? inner_product(*control, w, g, Restriction::q()) : 0.0;
    const double scale = std::max({std::abs(terminal), std::abs(initial), std::abs(source)});
    return std::abs(terminal - initial - source) / std::max(1.0, scale);
}

}  // namespace popctl
