#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "popctl/adjoint.hpp"
#include "popctl/field.hpp"
#include "popctl/model.hpp"
#include "popctl/quadrature.hpp"
#include "popctl/weights.hpp"

namespace popctl {

struct InequalityTrial {
    std::size_t trial = 0;
    double s = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;  // lhs/rhs, +inf when rhs = 0 < lhs
};

struct InequalityReport {
    std::string name;
    std::vector<InequalityTrial> trials;  // nontrivial trials only
    std::size_t ensemble_size = 0;
    std::size_t trivial_trials = 0;       // lhs = rhs = 0, excluded from the fit
    double fitted_constant = 0.0;
    std::vector<double> s_values;
    std::string grid_signature;

    void add(std::size_t trial, double s, double lhs, double rhs) {
        if (lhs == 0.0 && rhs == 0.0) {
            ++trivial_trials;
            return;
        }
        const double ratio = rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
        trials.push_back({trial, s, lhs, rhs, ratio});
        fitted_constant = std::max(fitted_constant, ratio);
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(trials.begin(), trials.end(), [](const InequalityTrial& t) {
            return std::isfinite(t.lhs) && std::isfinite(t.rhs) && std::isfinite(t.ratio) && t.lhs >= 0.0 && t.rhs >= 0.0;
        });
    }

    /// Largest ratio at each swept s.
    [[nodiscard]] std::map<double, double> fitted_by_s() const {
        std::map<double, double> m;
        for (const auto& t : trials) m[t.s] = std::max(m[t.s], t.ratio);
        return m;
    }

    /// Smallest swept s beyond which the per-s fitted constant never exceeds its value there.
    [[nodiscard]] double empirical_s0() const {
        const auto m = fitted_by_s();
        if (m.empty()) return 0.0;
        std::vector<std::pair<double, double>> v(m.begin(), m.end());
        std::size_t start = v.size() - 1;
        double running = v.back().second;
        for (std::size_t k = v.size() - 1; k-- > 0;) {
            if (v[k].second >= running) {
                start = k;
                running = v[k].second;
            }
        }
        return v[start].first;
    }
};

struct InequalitySides {
    double lhs = 0.0;
    double rhs = 0.0;
};

namespace detail {

/// ∂_x at node i: central in the interior, second-order one-sided at the ends.
inline double dx_node(std::span<const double> r, std::size_t i, double dx) {
    const std::size_t nx = r.size() - 1;
    if (i == 0) return (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * dx);
    if (i == nx) return (3.0 * r[nx] - 4.0 * r[nx - 1] + r[nx - 2]) / (2.0 * dx);
    return (r[i + 1] - r[i - 1]) / (2.0 * dx);
}

/// (x − x0)²/k at the nodes, 0 at x0 by its limit.
inline std::vector<double> hardy_factor(const Weights& W) {
    const auto& g = W.grid();
    std::vector<double> f(g.nx() + 1, 0.0);
    for (std::size_t i = 0; i <= g.nx(); ++i) {
        if (i == g.x0_index()) continue;
        const double d = g.x(i) - g.x0();
        f[i] = d * d / W.dispersion()(g.x(i));
    }
    return f;
}

/// exp(d·log(sΘ) + 2sΘ·phase); underflows cleanly to 0 near the poles of Θ.
inline double weighted(double log_s_theta, double s_theta, int d, double phase) {
    return std::exp(static_cast<double>(d) * log_s_theta + 2.0 * s_theta * phase);
}

struct Quadrature3 {
    std::vector<double> wt, wa, wx;
};
inline Quadrature3 full_weights(const SpaceTimeGrid& g) {
    return {trapezoid_weights(g.nt() + 1, g.dt()), trapezoid_weights(g.na() + 1, g.da()),
            trapezoid_weights(g.nx() + 1, g.dx())};
}

/// ∫_Q (sΘk w_x² + s³Θ³((x−x0)²/k) w²) e^{2sφ}, zero on the faces t ∈ {0,T}, a = 0.
inline double carleman_lhs(const Field& w, const Weights& W) {
    const auto& g = W.grid();
    const auto q = full_weights(g);
    const auto hf = hardy_factor(W);
    std::vector<double> kx(g.nx() + 1);
    for (std::size_t i = 0; i <= g.nx(); ++i) kx[i] = W.dispersion()(g.x(i));
    const double s = W.s();
    double total = 0.0;
    for (std::size_t n = 1; n < g.nt(); ++n)
        for (std::size_t j = 1; j <= g.na(); ++j) {
            const double lt = W.log_theta_node(n, j);
            const double st = s * std::exp(lt);
            const double lst = std::log(s) + lt;
            auto r = w.row(n, j);
            double row = 0.0;
            for (std::size_t i = 1; i < g.nx(); ++i) {
                const double e1 = weighted(lst, st, 1, W.psi_node(i));
                if (e1 == 0.0) continue;
                const double wx = dx_node(r, i, g.dx());
                row += q.wx[i] * (e1 * kx[i] * wx * wx + weighted(lst, st, 3, W.psi_node(i)) * hf[i] * r[i] * r[i]);
            }
            total += q.wt[n] * q.wa[j] * row;
        }
    return total;
}

}  // namespace detail

/// Both sides of the ω-local Carleman estimate for the full adjoint system.
inline InequalitySides carleman_main(const Field& w, const Field& wT, const Weights& W) {
    const auto& g = W.grid();
    if (!w.matches(g) || w.shape() != FieldShape::trajectory) throw std::invalid_argument("carleman_main: bad trajectory");
    InequalitySides out;
    out.lhs = detail::carleman_lhs(w, W);
    const auto q = detail::full_weights(g);
    const double s = W.s();
    double obs = 0.0;
    for (std::size_t n = 1; n < g.nt(); ++n)
        for (std::size_t j = 1; j <= g.na(); ++j) {
            const double lt = W.log_theta_node(n, j);
            const double st = s * std::exp(lt);
            const double lst = std::log(s) + lt;
            auto r = w.row(n, j);
            double row = 0.0;
            for (std::size_t i = 1; i < g.nx(); ++i)
                if (g.in_omega(i)) row += q.wx[i] * detail::weighted(lst, st, 3, W.Psi_node(i)) * r[i] * r[i];
            obs += q.wt[n] * q.wa[j] * row;
        }
    out.rhs = obs + norm_sq(wT, g, Restriction::below_delta(g));
    return out;
}

struct IntermediateSides {
    double lhs = 0.0;
    double rhs = 0.0;
    double source_term = 0.0;
    double boundary_right = 0.0;  // s∫∫ kΘe^{2sφ}(x−x0)w_x² at x = 1
    double boundary_left = 0.0;   // same at x = 0 (nonpositive)
};

/// Both sides of the intermediate estimate for w solving the system with source h and no renewal term.
inline IntermediateSides carleman_intermediate(const Field& w, const Field& h, const Weights& W) {
    const auto& g = W.grid();
    if (!w.matches(g) || !h.matches(g)) throw std::invalid_argument("carleman_intermediate: grid mismatch");
    IntermediateSides out;
    out.lhs = detail::carleman_lhs(w, W);
    const auto q = detail::full_weights(g);
    const double s = W.s();
    const double k0 = W.dispersion()(0.0), k1 = W.dispersion()(1.0);
    const double x0 = g.x0();
    for (std::size_t n = 1; n < g.nt(); ++n)
        for (std::size_t j = 1; j <= g.na(); ++j) {
            const double lt = W.log_theta_node(n, j);
            const double theta = std::exp(lt);
            const double st = s * theta;
            auto hr = h.row(n, j);
            double row = 0.0;
            for (std::size_t i = 1; i < g.nx(); ++i) row += q.wx[i] * std::exp(2.0 * st * W.psi_node(i)) * hr[i] * hr[i];
            out.source_term += q.wt[n] * q.wa[j] * row;
            auto r = w.row(n, j);
            const double w1 = detail::dx_node(r, g.nx(), g.dx());
            const double w0 = detail::dx_node(r, 0, g.dx());
            const double c = q.wt[n] * q.wa[j] * s * theta;
            out.boundary_right += c * k1 * std::exp(2.0 * st * W.psi_node(g.nx())) * (1.0 - x0) * w1 * w1;
            out.boundary_left += c * k0 * std::exp(2.0 * st * W.psi_node(0)) * (0.0 - x0) * w0 * w0;
        }
    out.rhs = out.source_term + out.boundary_right - out.boundary_left;
    return out;
}

/// Both sides of the Caccioppoli inequality on ω′ (defaults to the grid's ω′).
inline InequalitySides caccioppoli_check(const Field& w, const Field& h, const Weights& W,
                                         std::optional<Interval> omega_prime = std::nullopt) {
    const auto& g = W.grid();
    const Interval op = omega_prime.value_or(g.omega_prime());
    if (op.contains_closed(g.x0())) throw std::invalid_argument("caccioppoli_check: x0 must lie outside closure(omega')");
    if (!w.matches(g) || !h.matches(g)) throw std::invalid_argument("caccioppoli_check: grid mismatch");
    const IndexRange xr = g.x_nodes_in(op);
    const auto q = detail::full_weights(g);
    const auto wxp = trapezoid_weights(g.nx() + 1, g.dx(), xr);
    const double s = W.s();
    InequalitySides out;
    for (std::size_t n = 1; n < g.nt(); ++n)
        for (std::size_t j = 1; j <= g.na(); ++j) {
            const double lt = W.log_theta_node(n, j);
            const double st = s * std::exp(lt);
            const double lst = std::log(s) + lt;
            auto r = w.row(n, j);
            auto hr = h.row(n, j);
            double left = 0.0, right = 0.0;
            for (std::size_t i = 1; i < g.nx(); ++i) {
                const double e = std::exp(2.0 * st * W.psi_node(i));
                if (e == 0.0) continue;
                if (!xr.empty() && xr.contains(i)) {
                    const double wx = detail::dx_node(r, i, g.dx());
                    left += wxp[i] * wx * wx * e;
                }
                if (g.in_omega(i))
                    right += q.wx[i] * (detail::weighted(lst, st, 2, W.psi_node(i)) * r[i] * r[i] + e * hr[i] * hr[i]);
            }
            out.lhs += q.wt[n] * q.wa[j] * left;
            out.rhs += q.wt[n] * q.wa[j] * right;
        }
    return out;
}

struct SupCheck {
    double value = 0.0;
    std::size_t n = 0, j = 0, i = 0;
    bool strictly_inside = false;  // not on levels 1 or nt−1, not at a_1
};

/// max over interior nodes of s^dΘ^d e^{2sΦ}; with use_phi = false the exponential is dropped.
inline SupCheck weight_sup_check(const Weights& W, int d, bool use_phi = true) {
    if (d < 1 || d > 3) throw std::invalid_argument("weight_sup_check: d must be 1, 2 or 3");
    const auto& g = W.grid();
    const double s = W.s();
    SupCheck best;
    best.value = -1.0;
    for (std::size_t n = 1; n < g.nt(); ++n)
        for (std::size_t j = 1; j <= g.na(); ++j) {
            const double lt = W.log_theta_node(n, j);
            const double st = s * std::exp(lt);
            for (std::size_t i = 1; i < g.nx(); ++i) {
                const double v = detail::weighted(std::log(s) + lt, st, d, use_phi ? W.Psi_node(i) : 0.0);
                if (v > best.value) best = {v, n, j, i, false};
            }
        }
    best.strictly_inside = best.n > 1 && best.n + 1 < g.nt() && best.j > 1;
    return best;
}

namespace detail {

/// Gauss–Legendre nodes and weights on [0,1], 8 points.
inline const std::array<std::pair<double, double>, 8>& gauss8() {
    static const std::array<std::pair<double, double>, 8> table = [] {
        const std::array<double, 4> x{0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
        const std::array<double, 4> w{0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
        std::array<std::pair<double, double>, 8> t{};
        for (std::size_t k = 0; k < 4; ++k) {
            t[2 * k] = {0.5 * (1.0 - x[k]), 0.5 * w[k]};
            t[2 * k + 1] = {0.5 * (1.0 + x[k]), 0.5 * w[k]};
        }
        return t;
    }();
    return table;
}

}  // namespace detail

/// Both sides of the Hardy–Poincaré inequality ∫ p/(x−x0)² ν² ≤ C ∫ p ν_x² for nodal ν.
///
/// ν is linear between nodes; each cell is integrated by 8-point Gauss. In the two cells
/// touching x0, where p/(x−x0)² = k^{1/3}|x−x0|^{−2/3} is integrably singular, the
/// distance to x0 is substituted as r = h·u⁶, which makes the integrand smooth in u.
inline InequalitySides hardy_poincare_sides(std::span<const double> nu, const Dispersion& k, const SpaceTimeGrid& g) {
    if (nu.size() != g.nx() + 1) throw std::invalid_argument("hardy_poincare: nu must have nx+1 samples");
    if (std::abs(nu.front()) > boundary_tolerance || std::abs(nu.back()) > boundary_tolerance)
        throw std::invalid_argument("hardy_poincare: nu must vanish at x = 0 and x = 1");
    const double x0 = g.x0();
    const double h = g.dx();
    InequalitySides out;
    for (std::size_t c = 0; c < g.nx(); ++c) {
        const double xa = g.x(c);
        const double va = nu[c], vb = nu[c + 1];
        const double slope = (vb - va) / h;
        const bool touches = (c == g.x0_index() || c + 1 == g.x0_index());
        double lhs = 0.0, pint = 0.0;
        for (const auto& [u, wq] : detail::gauss8()) {
            if (touches) {
                // r = h u⁶ from x0 into the cell, dr = 6h u⁵ du.
                const double r = h * std::pow(u, 6);
                const double dr = 6.0 * h * std::pow(u, 5);
                const double x = c == g.x0_index() ? x0 + r : x0 - r;
                const double v = va + slope * (x - xa);
                const double kx = k(x);
                // p/r² · dr = k^{1/3} r^{−2/3} · 6h u⁵ = 6 k^{1/3} h^{1/3} u
                lhs += wq * std::cbrt(kx) * 6.0 * std::cbrt(h) * u * v * v;
                pint += wq * p_weight(x, k, x0) * dr;
            } else {
                const double x = xa + u * h;
                const double v = va + slope * u * h;
                const double d = x - x0;
                const double pw = p_weight(x, k, x0);
                lhs += wq * h * pw / (d * d) * v * v;
                pint += wq * h * pw;
            }
        }
        out.lhs += lhs;
        out.rhs += slope * slope * pint;
    }
    return out;
}

inline InequalityReport hardy_poincare_check(const std::vector<std::vector<double>>& ensemble, const Dispersion& k,
                                             const SpaceTimeGrid& g) {
    if (ensemble.empty()) throw std::invalid_argument("hardy_poincare_check: empty ensemble");
    InequalityReport rep;
    rep.name = "hardy_poincare";
    rep.ensemble_size = ensemble.size();
    rep.grid_signature = g.signature();
    for (std::size_t t = 0; t < ensemble.size(); ++t) {
        const auto sides = hardy_poincare_sides(ensemble[t], k, g);
        rep.add(t, 0.0, sides.lhs, sides.rhs);
    }
    return rep;
}

/// ‖w(0)‖²_{Q_A} ≤ C_δ(‖w‖²_q + ‖wT‖²_{a<δ}) over an ensemble of terminal data.
inline InequalityReport observability_check(const Model& model, const std::vector<Field>& wT_ensemble) {
    if (wT_ensemble.empty()) throw std::invalid_argument("observability_check: empty ensemble");
    const auto& g = model.grid();
    if (!(g.T() < g.delta())) throw std::invalid_argument("observability_check: requires T < delta");
    std::vector<std::future<InequalitySides>> jobs;
    for (const auto& wT : wT_ensemble)
        jobs.push_back(std::async(std::launch::async, [&model, &wT, &g] {
            const Field w = solve_adjoint(model, wT);
            return InequalitySides{norm_sq(w.time_level(0), g),
                                   norm_sq(w, g, Restriction::q()) + norm_sq(wT, g, Restriction::below_delta(g))};
        }));
    InequalityReport rep;
    rep.name = "observability";
    rep.ensemble_size = wT_ensemble.size();
    rep.grid_signature = g.signature();
    for (std::size_t t = 0; t < jobs.size(); ++t) {
        const auto sides = jobs[t].get();
        rep.add(t, 0.0, sides.lhs, sides.rhs);
    }
    return rep;
}

/// Carleman-type ensembles over an s sweep. Main: w from the full adjoint system with
/// terminal data wT. Intermediate and Caccioppoli: w from the system without renewal
/// term, with terminal data wT and source h.
struct CarlemanLabResult {
    InequalityReport main;
    InequalityReport intermediate;
    InequalityReport caccioppoli;
    double min_boundary_right = std::numeric_limits<double>::infinity();
    double max_boundary_left = -std::numeric_limits<double>::infinity();
};

inline CarlemanLabResult carleman_lab(const Model& model, const Weights& weights, const std::vector<Field>& wT_ensemble,
                                      const std::vector<Field>& h_ensemble, const std::vector<double>& s_values) {
    if (wT_ensemble.empty() || wT_ensemble.size() != h_ensemble.size())
        throw std::invalid_argument("carleman_lab: need matching nonempty wT and h ensembles");
    if (s_values.empty()) throw std::invalid_argument("carleman_lab: empty s sweep");
    for (double s : s_values)
        if (!(s > 0.0)) throw std::invalid_argument("carleman_lab: s must be positive");
    const auto& g = model.grid();
    const Model no_renewal = model.without_beta();

    struct TrialOut {
        std::vector<InequalitySides> main, cacc;
        std::vector<IntermediateSides> inter;
    };
    std::vector<std::future<TrialOut>> jobs;
    for (std::size_t t = 0; t < wT_ensemble.size(); ++t)
        jobs.push_back(std::async(std::launch::async, [&, t] {
            TrialOut o;
            const Field w_full = solve_adjoint(model, wT_ensemble[t]);
            const Field w_src = solve_adjoint(no_renewal, wT_ensemble[t], &h_ensemble[t]);
            for (double s : s_values) {
                const Weights W = weights.with_s(s);
                o.main.push_back(carleman_main(w_full, wT_ensemble[t], W));
                o.inter.push_back(carleman_intermediate(w_src, h_ensemble[t], W));
                o.cacc.push_back(caccioppoli_check(w_src, h_ensemble[t], W));
            }
            return o;
        }));

    CarlemanLabResult res;
    for (auto* r : {&res.main, &res.intermediate, &res.caccioppoli}) {
        r->ensemble_size = wT_ensemble.size();
        r->s_values = s_values;
        r->grid_signature = g.signature();
    }
    res.main.name = "carleman_main";
    res.intermediate.name = "carleman_intermediate";
    res.caccioppoli.name = "caccioppoli";
    for (std::size_t t = 0; t < jobs.size(); ++t) {
        const TrialOut o = jobs[t].get();
        for (std::size_t k = 0; k < s_values.size(); ++k) {
            res.main.add(t, s_values[k], o.main[k].lhs, o.main[k].rhs);
            res.intermediate.add(t, s_values[k], o.inter[k].lhs, o.inter[k].rhs);
            res.caccioppoli.add(t, s_values[k], o.cacc[k].lhs, o.cacc[k].rhs);
            res.min_boundary_right = std::min(res.min_boundary_right, o.inter[k].boundary_right);
            res.max_boundary_left = std::max(res.max_boundary_left, o.inter[k].boundary_left);
        }
    }
    return res;
}

}  // namespace popctl
