#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "popctl/coefficients.hpp"
#include "popctl/field.hpp"
#include "popctl/grid.hpp"

namespace popctl {

/// Trapezoid weights for n nodes of spacing h, supported on the inclusive index range r
/// (half weights at the range endpoints, zero outside).
inline std::vector<double> trapezoid_weights(std::size_t n, double h, std::optional<IndexRange> r = std::nullopt) {
    std::vector<double> w(n, 0.0);
    if (n == 1) {
        w[0] = 1.0;
        return w;
    }
    const IndexRange range = r.value_or(IndexRange{0, n - 1});
    if (range.empty() || range.last >= n) return w;
    if (range.first == range.last) return w;
    for (std::size_t k = range.first; k <= range.last; ++k) w[k] = h;
    w[range.first] *= 0.5;
    w[range.last] *= 0.5;
    return w;
}

/// Sub-box and masks for restricted quadrature.
struct Restriction {
    std::optional<IndexRange> t;
    std::optional<IndexRange> a;
    std::optional<IndexRange> x;
    bool omega_mask = false;  ///< multiply by χ_ω(x_i) (open ω), keeping full-domain x weights

    /// q = (0,T)×(0,A)×ω.
    static Restriction q() { return Restriction{std::nullopt, std::nullopt, std::nullopt, true}; }
    /// Target band (δ,A)×(0,1).
    static Restriction band(const SpaceTimeGrid& g) { return Restriction{std::nullopt, g.band_ages(), std::nullopt, false}; }
    /// (0,δ)×(0,1).
    static Restriction below_delta(const SpaceTimeGrid& g) {
        return Restriction{std::nullopt, g.below_delta_ages(), std::nullopt, false};
    }
};

struct QuadratureWeights {
    std::vector<double> t, a, x;
};

inline QuadratureWeights quadrature_weights(const Field& f, const SpaceTimeGrid& g, const Restriction& r = {}) {
    if (!f.matches(g)) throw std::invalid_argument("quadrature: field does not match grid");
    QuadratureWeights w;
    w.t = trapezoid_weights(f.extent_t(), g.dt(), f.extent_t() > 1 ? r.t : std::nullopt);
    w.a = trapezoid_weights(f.extent_a(), g.da(), f.extent_a() > 1 ? r.a : std::nullopt);
    w.x = trapezoid_weights(f.extent_x(), g.dx(), r.x);
    if (r.omega_mask)
        for (std::size_t i = 0; i < w.x.size(); ++i)
            if (!g.in_omega(i)) w.x[i] = 0.0;
    return w;
}

/// Trapezoidal ∫ f·g·weight over the field's domain (optionally restricted).
inline double inner_product(const Field& f, const Field& h, const SpaceTimeGrid& g, const Restriction& r = {},
                            const Field* weight = nullptr) {
    if (!f.same_shape(h)) throw std::invalid_argument("inner_product: shape mismatch");
    if (weight && !weight->same_shape(f)) throw std::invalid_argument("inner_product: weight shape mismatch");
    const auto w = quadrature_weights(f, g, r);
    double total = 0.0;
    for (std::size_t n = 0; n < f.extent_t(); ++n) {
        if (w.t[n] == 0.0) continue;
        for (std::size_t j = 0; j < f.extent_a(); ++j) {
            const double wtj = w.t[n] * w.a[j];
            if (wtj == 0.0) continue;
            auto fr = f.row(n, j);
            auto hr = h.row(n, j);
            double s = 0.0;
            if (weight) {
                auto wr = weight->row(n, j);
                for (std::size_t i = 0; i < fr.size(); ++i) s += w.x[i] * (fr[i] * hr[i]) * wr[i];
            } else {
                for (std::size_t i = 0; i < fr.size(); ++i) s += w.x[i] * (fr[i] * hr[i]);
            }
            total += wtj * s;
        }
    }
    return total;
}

inline double norm_sq(const Field& f, const SpaceTimeGrid& g, const Restriction& r = {}) {
    return inner_product(f, f, g, r);
}

inline constexpr double boundary_tolerance = 1e-12;

/// Σ_i k_{i+1/2} ((f_{i+1} − f_i)/Δx)² Δx for a single spatial row.
inline double hk_row(std::span<const double> f, std::span<const double> k_half, double dx) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        const double d = (f[i + 1] - f[i]) / dx;
        s += k_half[i] * d * d * dx;
    }
    return s;
}

/// Discrete ‖√k f_x‖², integrated over the remaining dimensions by the trapezoid rule.
/// Requires Dirichlet ends; finite at the degeneracy node since only half-point k enters.
inline double hk_seminorm(const Field& f, const Dispersion& k, const SpaceTimeGrid& g) {
    if (!f.matches(g)) throw std::invalid_argument("hk_seminorm: field does not match grid");
    std::vector<double> kh(g.nx());
    for (std::size_t i = 0; i < g.nx(); ++i) kh[i] = k(0.5 * (g.x(i) + g.x(i + 1)));
    const auto w = quadrature_weights(f, g);
    double total = 0.0;
    for (std::size_t n = 0; n < f.extent_t(); ++n)
        for (std::size_t j = 0; j < f.extent_a(); ++j) {
            auto r = f.row(n, j);
            if (std::abs(r.front()) > boundary_tolerance || std::abs(r.back()) > boundary_tolerance)
                throw std::invalid_argument("hk_seminorm: nonzero Dirichlet boundary value");
            total += w.t[n] * w.a[j] * hk_row(r, kh, g.dx());
        }
    return total;
}

}  // namespace popctl
