#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "popctl/field.hpp"
#include "popctl/grid.hpp"

namespace popctl {

/// Dispersion coefficient k on [0,1].
class Dispersion {
public:
    enum class Kind { power_law, constant, tabulated, function };

    /// k(x) = scale·|x − x0|^alpha.
    static Dispersion power_law(double x0, double alpha, double scale = 1.0) {
        if (!(alpha >= 0.0) || !(scale > 0.0))
            throw std::invalid_argument("Dispersion::power_law: need alpha >= 0 and scale > 0");
        Dispersion d(Kind::power_law, x0);
        d.alpha_ = alpha;
        d.scale_ = scale;
        d.eval_ = [x0, alpha, scale](double x) { return scale * std::pow(std::abs(x - x0), alpha); };
        d.deriv_ = [x0, alpha, scale](double x) {
            const double r = x - x0;
            if (r == 0.0) return 0.0;
            return scale * alpha * std::copysign(std::pow(std::abs(r), alpha - 1.0), r);
        };
        return d;
    }

    /// Nondegenerate diagnostic coefficient; x0 is carried only for bookkeeping.
    static Dispersion constant(double value, double x0 = 0.5) {
        if (!(value >= 0.0)) throw std::invalid_argument("Dispersion::constant: negative value");
        Dispersion d(Kind::constant, x0);
        d.scale_ = value;
        d.eval_ = [value](double) { return value; };
        d.deriv_ = [](double) { return 0.0; };
        return d;
    }

    /// Piecewise-linear interpolant of samples (xs strictly increasing, covering [0,1]).
    static Dispersion tabulated(std::vector<double> xs, std::vector<double> ks, double x0) {
        if (xs.size() != ks.size() || xs.size() < 2)
            throw std::invalid_argument("Dispersion::tabulated: need matching abscissae and values");
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("Dispersion::tabulated: abscissae not increasing");
        if (xs.front() > 0.0 || xs.back() < 1.0)
            throw std::invalid_argument("Dispersion::tabulated: table must cover [0,1]");
        Dispersion d(Kind::tabulated, x0);
        auto table = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(std::move(xs),
                                                                                           std::move(ks));
        d.eval_ = [table](double x) {
            const auto& [px, pk] = *table;
            auto it = std::upper_bound(px.begin(), px.end(), x);
            std::size_t hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - px.begin(), 1,
                                                                                 static_cast<std::ptrdiff_t>(px.size()) - 1));
            const std::size_t lo = hi - 1;
            const double w = (x - px[lo]) / (px[hi] - px[lo]);
            return (1.0 - w) * pk[lo] + w * pk[hi];
        };
        return d;
    }

    /// Arbitrary evaluable coefficient without an analytic derivative.
    static Dispersion function(std::function<double(double)> f, double x0) {
        Dispersion d(Kind::function, x0);
        d.eval_ = std::move(f);
        return d;
    }

    /// Samples f on the spatial nodes of a grid and tabulates them.
    static Dispersion sampled(const std::function<double(double)>& f, double x0, std::size_t nx) {
        std::vector<double> xs(nx + 1), ks(nx + 1);
        for (std::size_t i = 0; i <= nx; ++i) {
            xs[i] = static_cast<double>(i) / static_cast<double>(nx);
            ks[i] = f(xs[i]);
        }
        return tabulated(std::move(xs), std::move(ks), x0);
    }

    double operator()(double x) const { return eval_(x); }

    /// Analytic k'(x) when the representation carries one.
    [[nodiscard]] std::optional<double> derivative(double x) const {
        if (!deriv_) return std::nullopt;
        return deriv_(x);
    }
    [[nodiscard]] bool has_derivative() const { return static_cast<bool>(deriv_); }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double x0() const { return x0_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double scale() const { return scale_; }
    [[nodiscard]] bool is_power_law() const { return kind_ == Kind::power_law; }

private:
    Dispersion(Kind k, double x0) : kind_(k), x0_(x0) {}

    Kind kind_;
    double x0_;
    double alpha_ = 0.0;
    double scale_ = 1.0;
    std::function<double(double)> eval_;
    std::function<double(double)> deriv_;
};

/// A rate μ(t,a,x) or β(t,a,x).
class Rate {
public:
    enum class Kind { constant, separable, tabulated, function };
    using Fn = std::function<double(double, double, double)>;
    using Fn1 = std::function<double(double)>;

    static Rate zero() { return constant(0.0); }
    static Rate constant(double v) {
        Rate r(Kind::constant);
        r.constant_ = v;
        r.eval_ = [v](double, double, double) { return v; };
        return r;
    }
    /// f_t(t)·f_a(a)·f_x(x)
    static Rate separable(Fn1 ft, Fn1 fa, Fn1 fx) {
        Rate r(Kind::separable);
        r.eval_ = [ft = std::move(ft), fa = std::move(fa), fx = std::move(fx)](double t, double a, double x) {
            return ft(t) * fa(a) * fx(x);
        };
        return r;
    }
    /// Age-only profile f(a).
    static Rate age_profile(Fn1 fa) {
        return separable([](double) { return 1.0; }, std::move(fa), [](double) { return 1.0; });
    }
    /// Trilinear interpolation of a trajectory-shaped table over [0,T]×[0,A]×[0,1].
    static Rate tabulated(Field table, double T, double A) {
        if (table.shape() != FieldShape::trajectory)
            throw std::invalid_argument("Rate::tabulated: needs a trajectory-shaped table");
        Rate r(Kind::tabulated);
        auto tab = std::make_shared<Field>(std::move(table));
        r.eval_ = [tab, T, A](double t, double a, double x) {
            auto locate = [](double v, double len, std::size_t n, std::size_t& lo, double& w) {
                const double s = std::clamp(v / len, 0.0, 1.0) * static_cast<double>(n - 1);
                lo = std::min(static_cast<std::size_t>(s), n - 2);
                w = s - static_cast<double>(lo);
            };
            std::size_t n, j, i;
            double wt, wa, wx;
            locate(t, T, tab->extent_t(), n, wt);
            locate(a, A, tab->extent_a(), j, wa);
            locate(x, 1.0, tab->extent_x(), i, wx);
            double acc = 0.0;
            for (int dn = 0; dn < 2; ++dn)
                for (int dj = 0; dj < 2; ++dj)
                    for (int di = 0; di < 2; ++di) {
                        const double c = (dn ? wt : 1 - wt) * (dj ? wa : 1 - wa) * (di ? wx : 1 - wx);
                        acc += c * (*tab)(n + dn, j + dj, i + di);
                    }
            return acc;
        };
        return r;
    }
    static Rate function(Fn f) {
        Rate r(Kind::function);
        r.eval_ = std::move(f);
        return r;
    }

    double operator()(double t, double a, double x) const { return eval_(t, a, x); }
    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] bool is_identically_zero() const { return kind_ == Kind::constant && constant_ == 0.0; }

private:
    explicit Rate(Kind k) : kind_(k) {}
    Kind kind_;
    double constant_ = 0.0;
    Fn eval_;
};

/// The triple (k, μ, β). `diagnostic` marks a nondegenerate or transport-only
/// k used for closed-form oracles; degeneracy checks are skipped for it.
struct CoefficientSet {
    Dispersion k = Dispersion::power_law(0.5, 0.5);
    Rate mu = Rate::zero();
    Rate beta = Rate::zero();
    bool diagnostic = false;

    [[nodiscard]] double x0() const { return k.x0(); }
};

/// Coefficients sampled on a grid, shared by the solvers.
struct SampledCoefficients {
    std::vector<double> k_nodes;  // k(x_i), i = 0..nx
    std::vector<double> k_half;   // k((x_i + x_{i+1})/2), i = 0..nx-1
    Field mu;                     // μ(t_n, a_j, x_i)
    Field beta;                   // β(t_n, a_j, x_i)
    bool beta_zero = true;

    static SampledCoefficients sample(const CoefficientSet& c, const SpaceTimeGrid& g) {
        SampledCoefficients s;
        s.k_nodes.resize(g.nx() + 1);
        s.k_half.resize(g.nx());
        for (std::size_t i = 0; i <= g.nx(); ++i) s.k_nodes[i] = c.k(g.x(i));
        for (std::size_t i = 0; i < g.nx(); ++i) s.k_half[i] = c.k(0.5 * (g.x(i) + g.x(i + 1)));
        s.mu = Field::trajectory(g);
        s.beta = Field::trajectory(g);
        for (std::size_t n = 0; n <= g.nt(); ++n)
            for (std::size_t j = 0; j <= g.na(); ++j)
                for (std::size_t i = 0; i <= g.nx(); ++i) {
                    s.mu(n, j, i) = c.mu(g.t(n), g.a(j), g.x(i));
                    s.beta(n, j, i) = c.beta(g.t(n), g.a(j), g.x(i));
                }
        s.beta_zero = s.beta.max_abs() == 0.0;
        s.check(c, g);
        return s;
    }

private:
    void check(const CoefficientSet& c, const SpaceTimeGrid& g) const {
        for (std::size_t i = 0; i < k_half.size(); ++i) {
            if (!std::isfinite(k_half[i]) || k_half[i] < 0.0)
                throw std::invalid_argument("dispersion: invalid half-point value");
            if (!c.diagnostic && !(k_half[i] > 0.0))
                throw std::invalid_argument("dispersion: half-point value must be positive");
        }
        for (std::size_t n = 0; n <= g.nt(); ++n)
            for (std::size_t j = 0; j <= g.na(); ++j)
                for (std::size_t i = 0; i <= g.nx(); ++i) {
                    const double m = mu(n, j, i), b = beta(n, j, i);
                    if (!std::isfinite(m) || m < 0.0)
                        throw std::invalid_argument("mortality must be finite and nonnegative");
                    if (!std::isfinite(b) || b < 0.0)
                        throw std::invalid_argument("fertility must be finite and nonnegative");
                    if (j == 0 && b != 0.0)
                        throw std::invalid_argument("fertility must vanish at age 0 (newborns are not fertile)");
                }
    }
};

}  // namespace popctl
