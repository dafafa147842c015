#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "popctl/field.hpp"
#include "popctl/grid.hpp"

namespace popctl {

/// Random sine sums with coefficients uniform in [−1,1] scaled by (mn)^{−decay}.
/// Uniform draws are built from raw 64-bit engine output so results do not depend
/// on the standard library's distribution implementations.
class FourierEnsemble {
public:
    explicit FourierEnsemble(std::uint64_t seed, std::size_t modes = 4, double decay = 1.5)
        : rng_(seed), modes_(modes), decay_(decay) {}

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double coefficient(std::size_t m, std::size_t n = 1) {
        return (2.0 * uniform() - 1.0) / std::pow(static_cast<double>(m * n), decay_);
    }

    /// Slice on (0,A)×(0,1) vanishing at a ∈ {lo, A} and x ∈ {0,1}; zero for a < lo.
    Field age_space(const SpaceTimeGrid& g, double lo = 0.0) {
        const auto c = draw(modes_ * modes_);
        Field f = Field::age_space(g);
        const double len = g.A() - lo;
        for (std::size_t j = 0; j <= g.na(); ++j) {
            const double a = g.a(j);
            if (a < lo || j == g.na()) continue;
            for (std::size_t i = 0; i <= g.nx(); ++i) f(j, i) = sum2(c, (a - lo) / len, g.x(i));
        }
        zero_x_ends(f);
        return f;
    }

    /// Terminal data supported in the band a ∈ (δ, A).
    Field band(const SpaceTimeGrid& g) { return age_space(g, g.a(g.delta_index())); }

    /// Trajectory-shaped source, smooth in (t,a,x), vanishing at x ∈ {0,1}.
    Field trajectory(const SpaceTimeGrid& g) {
        const auto c = draw(modes_ * modes_ * modes_);
        Field f = Field::trajectory(g);
        constexpr double pi = std::numbers::pi;
        const std::size_t M = modes_;
        std::vector<double> ct((g.nt() + 1) * M), sa((g.na() + 1) * M), sx((g.nx() + 1) * M);
        for (std::size_t n = 0; n <= g.nt(); ++n)
            for (std::size_t l = 0; l < M; ++l) ct[n * M + l] = std::cos(static_cast<double>(l) * pi * g.t(n) / g.T());
        for (std::size_t j = 0; j <= g.na(); ++j)
            for (std::size_t m = 0; m < M; ++m) sa[j * M + m] = std::sin(static_cast<double>(m + 1) * pi * g.a(j) / g.A());
        for (std::size_t i = 0; i <= g.nx(); ++i)
            for (std::size_t q = 0; q < M; ++q) sx[i * M + q] = std::sin(static_cast<double>(q + 1) * pi * g.x(i));
        std::vector<double> cq(M);
        for (std::size_t n = 0; n <= g.nt(); ++n)
            for (std::size_t j = 0; j <= g.na(); ++j) {
                // Contract over l and m first, leaving one coefficient per x mode.
                std::fill(cq.begin(), cq.end(), 0.0);
                for (std::size_t l = 0; l < M; ++l)
                    for (std::size_t m = 0; m < M; ++m) {
                        const double tam = ct[n * M + l] * sa[j * M + m];
                        for (std::size_t q = 0; q < M; ++q) cq[q] += c[(l * M + m) * M + q] * tam;
                    }
                auto row = f.row(n, j);
                for (std::size_t i = 0; i <= g.nx(); ++i) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < M; ++q) s += cq[q] * sx[i * M + q];
                    row[i] = s;
                }
            }
        for (std::size_t n = 0; n <= g.nt(); ++n)
            for (std::size_t j = 0; j <= g.na(); ++j) {
                f(n, j, 0) = 0.0;
                f(n, j, g.nx()) = 0.0;
            }
        return f;
    }

    /// ν(x) = Σ c_n sin(nπx) on the given nodes.
    std::vector<double> space_function(std::size_t nx) {
        const auto c = draw(modes_);
        std::vector<double> v(nx + 1, 0.0);
        for (std::size_t i = 1; i < nx; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(nx);
            for (std::size_t m = 0; m < modes_; ++m)
                v[i] += c[m] * std::sin(static_cast<double>(m + 1) * std::numbers::pi * x);
        }
        return v;
    }

    /// Coefficients of a space function, to evaluate the same ν on several grids.
    std::vector<double> space_coefficients() { return draw(modes_); }

private:
    std::vector<double> draw(std::size_t count) {
        std::vector<double> c(count);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t m = modes_ > 0 ? k / modes_ % modes_ + 1 : 1;
            const std::size_t n = k % modes_ + 1;
            c[k] = coefficient(m, n);
        }
        return c;
    }
    double sum2(const std::vector<double>& c, double u, double x) const {
        constexpr double pi = std::numbers::pi;
        double s = 0.0;
        for (std::size_t m = 0; m < modes_; ++m)
            for (std::size_t n = 0; n < modes_; ++n)
                s += c[m * modes_ + n] * std::sin(static_cast<double>(m + 1) * pi * u) *
                     std::sin(static_cast<double>(n + 1) * pi * x);
        return s;
    }
    static void zero_x_ends(Field& f) {
        for (std::size_t j = 0; j < f.extent_a(); ++j) {
            f(j, 0) = 0.0;
            f(j, f.extent_x() - 1) = 0.0;
        }
    }

    std::mt19937_64 rng_;
    std::size_t modes_;
    double decay_;
};

/// ν(x) = Σ c_m sin((m+1)πx) evaluated at x.
inline double sine_sum(const std::vector<double>& c, double x) {
    double s = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) s += c[m] * std::sin(static_cast<double>(m + 1) * std::numbers::pi * x);
    return s;
}
inline double sine_sum_derivative(const std::vector<double>& c, double x) {
    double s = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) {
        const double w = static_cast<double>(m + 1) * std::numbers::pi;
        s += c[m] * w * std::cos(w * x);
    }
    return s;
}

}  // namespace popctl
