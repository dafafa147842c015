#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "popctl/coefficients.hpp"
#include "popctl/grid.hpp"

namespace popctl {

/// Θ(t,a) = 1/((t(T−t))⁴ a⁴), defined for t ∈ (0,T), a ∈ (0,A].
inline double theta(double t, double a, double T, double A) {
    if (!(t > 0.0 && t < T) || !(a > 0.0 && a <= A))
        throw std::domain_error("theta: (t,a) must lie in (0,T) x (0,A]");
    const double q = t * (T - t) * a;
    return 1.0 / (q * q * q * q);
}

inline double log_theta(double t, double a, double T) { return -4.0 * (std::log(t * (T - t)) + std::log(a)); }

/// Composite trapezoid for ∫_{x0}^{x} (r − x0)/k(r) dr with n intervals; the integrand is
/// continuous for weak degeneracy and is taken as 0 at r = x0.
inline double psi_integral_quadrature(const Dispersion& k, double x0, double x, std::size_t n) {
    if (n == 0 || x == x0) return 0.0;
    auto f = [&](double r) {
        const double d = r - x0;
        return d == 0.0 ? 0.0 : d / k(r);
    };
    const double h = (x - x0) / static_cast<double>(n);
    double s = 0.5 * (f(x0) + f(x));
    for (std::size_t m = 1; m < n; ++m) s += f(x0 + static_cast<double>(m) * h);
    return s * h;
}

/// ∫_{x0}^{x} (r − x0)/k(r) dr in closed form for k = c|x − x0|^α.
inline double psi_integral_power_law(const Dispersion& k, double x) {
    const double alpha = k.alpha();
    return std::pow(std::abs(x - k.x0()), 2.0 - alpha) / (k.scale() * (2.0 - alpha));
}

/// Lower bound for c2: max{(1−x0)²/(k(1)(2−γ)), x0²/(k(0)(2−γ))}.
inline double min_c2(const Dispersion& k, double gamma, double x0) {
    const double k0 = k(0.0), k1 = k(1.0);
    if (!(k0 > 0.0) || !(k1 > 0.0)) throw std::invalid_argument("min_c2: need k(0) > 0 and k(1) > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("min_c2: gamma must lie in [0,1)");
    return std::max((1.0 - x0) * (1.0 - x0) / (k1 * (2.0 - gamma)), x0 * x0 / (k0 * (2.0 - gamma)));
}

/// σ(x) = x(1−x)e^{ρx} with its single critical point placed at `center`.
struct SigmaProfile {
    double rho = 0.0;
    double center = 0.5;
    double sup_norm = 0.25;

    double operator()(double x) const { return x * (1.0 - x) * std::exp(rho * x); }
    [[nodiscard]] double derivative(double x) const {
        return std::exp(rho * x) * ((1.0 - 2.0 * x) + rho * x * (1.0 - x));
    }
};

/// Bisection on ρ for σ'(c) = 0, c the center of ω0.
inline SigmaProfile build_sigma(const SpaceTimeGrid& g) {
    const double c = g.omega0().center();
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("build_sigma: omega0 center must lie in (0,1)");
    // σ'(c)e^{−ρc} = (1 − 2c) + ρc(1 − c) is increasing in ρ.
    auto f = [c](double rho) { return (1.0 - 2.0 * c) + rho * c * (1.0 - c); };
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 200 && f(lo) > 0.0; ++it) lo *= 2.0;
    for (int it = 0; it < 200 && f(hi) < 0.0; ++it) hi *= 2.0;
    if (f(lo) > 0.0 || f(hi) < 0.0) throw std::runtime_error("build_sigma: bisection could not bracket rho");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    SigmaProfile s;
    s.rho = 0.5 * (lo + hi);
    if (f(lo) == 0.0) s.rho = lo;
    if (f(hi) == 0.0) s.rho = hi;
    s.center = c;
    s.sup_norm = s(c);
    return s;
}

/// Two-term lower bound on c1 that makes φ ≤ Φ.
inline double min_c1(const Dispersion& k, double gamma, double x0, double c2, double kappa, const SigmaProfile& sigma) {
    const double k0 = k(0.0), k1 = k(1.0);
    const double g2 = 2.0 - gamma;
    const double d1 = c2 * k1 * g2 - (1.0 - x0) * (1.0 - x0);
    const double d0 = c2 * k0 * g2 - x0 * x0;
    if (!(d1 > 0.0) || !(d0 > 0.0)) throw std::invalid_argument("min_c1: c2 must exceed min_c2");
    const double e = std::expm1(2.0 * kappa * sigma.sup_norm);
    return std::max(k1 * g2 * e / d1, k0 * g2 * e / d0);
}

/// p(x) = (k(x)|x − x0|⁴)^{1/3}.
inline double p_weight(double x, const Dispersion& k, double x0) {
    const double d = std::abs(x - x0);
    return std::cbrt(k(x) * d * d * d * d);
}

struct WeightConfig {
    double c1 = 0.0;
    double c2 = 0.0;
    double kappa = 1.0;
    double s = 1.0;
    double gamma = 0.5;
    double theta = 0.5;
};

/// Resolves c2 = 1.05·min_c2 and c1 = 1.05·min_c1 when the corresponding value is nonpositive.
inline WeightConfig resolve_auto(WeightConfig cfg, const Dispersion& k, const SpaceTimeGrid& g, bool auto_c2,
                                 bool auto_c1) {
    if (auto_c2) cfg.c2 = 1.05 * min_c2(k, cfg.gamma, g.x0());
    if (auto_c1) cfg.c1 = 1.05 * min_c1(k, cfg.gamma, g.x0(), cfg.c2, cfg.kappa, build_sigma(g));
    return cfg;
}

/// Carleman weights Θ, ψ, φ = Θψ, Ψ, Φ = ΘΨ and p on a grid.
///
/// Construction rejects configurations violating the c2/c1/κ/s constraints or φ ≤ Φ.
class Weights {
public:
    static constexpr std::size_t quadrature_refinement = 10;

    Weights(Dispersion k, SpaceTimeGrid grid, WeightConfig cfg)
        : k_(std::move(k)), grid_(std::move(grid)), cfg_(cfg), sigma_(build_sigma(grid_)) {
        if (!(cfg_.kappa > 0.0)) throw std::invalid_argument("WeightConfig: kappa must be positive");
        if (!(cfg_.s > 0.0)) throw std::invalid_argument("WeightConfig: s must be positive");
        const double x0 = grid_.x0();
        const double c2min = min_c2(k_, cfg_.gamma, x0);
        if (!(cfg_.c2 > c2min))
            throw std::invalid_argument("WeightConfig: c2 = " + std::to_string(cfg_.c2) + " must exceed min_c2 = " +
                                        std::to_string(c2min));
        const double c1min = min_c1(k_, cfg_.gamma, x0, cfg_.c2, cfg_.kappa, sigma_);
        if (!(cfg_.c1 >= c1min * (1.0 - 1e-12)))
            throw std::invalid_argument("WeightConfig: c1 = " + std::to_string(cfg_.c1) + " below min_c1 = " +
                                        std::to_string(c1min));
        tabulate();
        for (std::size_t i = 0; i <= grid_.nx(); ++i)
            if (!(psi_[i] < 0.0)) throw std::invalid_argument("Weights: psi must be negative on [0,1]");
        // φ ≤ Φ ⇔ ψ ≤ Ψ since Θ > 0.
        for (std::size_t i = 0; i <= grid_.nx(); ++i)
            if (psi_[i] > Psi_[i]) throw std::invalid_argument("Weights: phi <= Phi violated at " + std::to_string(grid_.x(i)));
    }

    [[nodiscard]] const SpaceTimeGrid& grid() const { return grid_; }
    [[nodiscard]] const WeightConfig& config() const { return cfg_; }
    [[nodiscard]] const SigmaProfile& sigma() const { return sigma_; }
    [[nodiscard]] const Dispersion& dispersion() const { return k_; }
    [[nodiscard]] double s() const { return cfg_.s; }

    /// Same weights with another Carleman parameter.
    [[nodiscard]] Weights with_s(double s) const {
        Weights w = *this;
        if (!(s > 0.0)) throw std::invalid_argument("Weights: s must be positive");
        w.cfg_.s = s;
        return w;
    }

    double psi(double x) const {
        if (k_.is_power_law()) return cfg_.c1 * (psi_integral_power_law(k_, x) - cfg_.c2);
        const std::size_t n = quadrature_refinement * grid_.nx();
        const auto cells = static_cast<std::size_t>(std::ceil(std::abs(x - grid_.x0()) * static_cast<double>(n)));
        return cfg_.c1 * (psi_integral_quadrature(k_, grid_.x0(), x, std::max<std::size_t>(cells, 1)) - cfg_.c2);
    }
    double Psi(double x) const {
        return std::expm1(cfg_.kappa * sigma_(x)) - std::expm1(2.0 * cfg_.kappa * sigma_.sup_norm);
    }
    double varphi(double t, double a, double x) const { return theta(t, a, grid_.T(), grid_.A()) * psi(x); }
    double capital_phi(double t, double a, double x) const { return theta(t, a, grid_.T(), grid_.A()) * Psi(x); }

    // Node tables.
    [[nodiscard]] double psi_node(std::size_t i) const { return psi_[i]; }
    [[nodiscard]] double Psi_node(std::size_t i) const { return Psi_[i]; }
    [[nodiscard]] double p_node(std::size_t i) const { return p_[i]; }
    [[nodiscard]] bool interior_level(std::size_t n, std::size_t j) const {
        return n > 0 && n < grid_.nt() && j > 0;
    }
    /// log Θ at an interior (t_n, a_j).
    [[nodiscard]] double log_theta_node(std::size_t n, std::size_t j) const {
        return log_theta(grid_.t(n), grid_.a(j), grid_.T());
    }
    [[nodiscard]] double theta_node(std::size_t n, std::size_t j) const {
        return theta(grid_.t(n), grid_.a(j), grid_.T(), grid_.A());
    }

    /// C2 = max over nodes x ≠ x0 of p/k.
    [[nodiscard]] double p_over_k_max() const {
        double m = 0.0;
        for (std::size_t i = 0; i <= grid_.nx(); ++i)
            if (i != grid_.x0_index()) m = std::max(m, p_[i] / k_(grid_.x(i)));
        return m;
    }

private:
    void tabulate() {
        const std::size_t nx = grid_.nx();
        psi_.resize(nx + 1);
        Psi_.resize(nx + 1);
        p_.resize(nx + 1);
        if (k_.is_power_law()) {
            for (std::size_t i = 0; i <= nx; ++i) psi_[i] = psi(grid_.x(i));
        } else {
            // Cumulative trapezoid outward from x0 on a grid refined quadrature_refinement times.
            const std::size_t i0 = grid_.x0_index();
            const std::size_t r = quadrature_refinement;
            const double h = grid_.dx() / static_cast<double>(r);
            const double x0 = grid_.x0();
            auto f = [&](double x) { return x == x0 ? 0.0 : (x - x0) / k_(x); };
            std::vector<double> integral(nx + 1, 0.0);
            for (std::size_t i = i0 + 1; i <= nx; ++i) {
                double acc = 0.0;
                for (std::size_t m = 0; m < r; ++m) {
                    const double xa = grid_.x(i - 1) + static_cast<double>(m) * h;
                    acc += 0.5 * h * (f(xa) + f(xa + h));
                }
                integral[i] = integral[i - 1] + acc;
            }
            for (std::size_t i = i0; i-- > 0;) {
                double acc = 0.0;
                for (std::size_t m = 0; m < r; ++m) {
                    const double xb = grid_.x(i + 1) - static_cast<double>(m) * h;
                    acc += 0.5 * h * (f(xb) + f(xb - h));
                }
                integral[i] = integral[i + 1] - acc;  // reversed orientation: the integrand is negative, the integral positive
            }
            for (std::size_t i = 0; i <= nx; ++i) psi_[i] = cfg_.c1 * (integral[i] - cfg_.c2);
        }
        for (std::size_t i = 0; i <= nx; ++i) {
            Psi_[i] = Psi(grid_.x(i));
            p_[i] = p_weight(grid_.x(i), k_, grid_.x0());
        }
    }

    Dispersion k_;
    SpaceTimeGrid grid_;
    WeightConfig cfg_;
    SigmaProfile sigma_;
    std::vector<double> psi_, Psi_, p_;
};

}  // namespace popctl
