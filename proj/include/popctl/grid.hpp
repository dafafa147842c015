#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace popctl {

/// Open interval (lo, hi).
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double x) const { return lo < x && x < hi; }
    [[nodiscard]] bool contains_closed(double x) const { return lo <= x && x <= hi; }
    [[nodiscard]] double center() const { return 0.5 * (lo + hi); }
    [[nodiscard]] double length() const { return hi - lo; }
    /// this ⊂⊂ outer, i.e. the closure of this lies inside the open outer interval.
    [[nodiscard]] bool compactly_inside(const Interval& outer) const {
        return outer.lo < lo && hi < outer.hi && lo < hi;
    }
};

/// Inclusive index range [first, last].
struct IndexRange {
    std::size_t first = 0;
    std::size_t last = 0;

    [[nodiscard]] bool empty() const { return last < first; }
    [[nodiscard]] std::size_t size() const { return empty() ? 0 : last - first + 1; }
    [[nodiscard]] bool contains(std::size_t i) const { return first <= i && i <= last; }
};

struct GridParams {
    double T = 0.4;
    double A = 1.0;
    double delta = 0.5;
    std::size_t nx = 100;
    std::size_t nt = 40;
    std::size_t na = 100;
    double x0 = 0.5;
    Interval omega{0.3, 0.7};
    Interval omega0{0.45, 0.55};
    Interval omega_prime{0.35, 0.45};
};

/// Uniform, characteristic-aligned discretization of (0,T)×(0,A)×(0,1).
///
/// Nodes are t_n = nΔ (n = 0..nt), a_j = jΔ (j = 0..na) and x_i = iΔx
/// (i = 0..nx) with Δ = T/nt = A/na. The degeneracy point x0 is a node.
class SpaceTimeGrid {
public:
    static constexpr double step_tolerance = 1e-12;
    static constexpr double node_tolerance = 1e-9;

    /// Validates every invariant and throws std::invalid_argument naming the first failure.
    static SpaceTimeGrid create(const GridParams& p) {
        auto fail = [](const std::string& what) {
            throw std::invalid_argument("SpaceTimeGrid: " + what);
        };
        if (!(p.T > 0.0) || !(p.A > 0.0) || !std::isfinite(p.T) || !std::isfinite(p.A))
            fail("T and A must be positive and finite");
        if (p.nx < 4 || p.nt < 2 || p.na < 2)
            fail("cell counts too small (nx >= 4, nt >= 2, na >= 2)");
        const double dt = p.T / static_cast<double>(p.nt);
        const double da = p.A / static_cast<double>(p.na);
        if (std::abs(dt - da) > step_tolerance * std::max(dt, da)) {
            std::ostringstream os;
            os.precision(17);
            os << "characteristic alignment requires T/nt == A/na (got " << dt << " vs " << da << ")";
            fail(os.str());
        }
        if (!(0.0 < p.T && p.T < p.delta && p.delta < p.A))
            fail("ordering 0 < T < delta < A violated");
        if (!(0.0 < p.x0 && p.x0 < 1.0)) fail("x0 must lie in (0,1)");
        if (!p.omega.compactly_inside(Interval{0.0, 1.0}))
            fail("omega must be compactly contained in (0,1)");
        if (!p.omega.contains(p.x0)) fail("x0 must lie in omega = (x1,x2)");
        const double scaled = p.x0 * static_cast<double>(p.nx);
        if (std::abs(scaled - std::round(scaled)) > node_tolerance)
            fail("x0 must coincide with a spatial grid node");
        if (!p.omega0.compactly_inside(p.omega)) fail("omega0 must be compactly contained in omega");
        if (!p.omega_prime.compactly_inside(p.omega))
            fail("omega_prime must be compactly contained in omega");
        if (p.omega_prime.contains_closed(p.x0)) fail("x0 must not lie in the closure of omega_prime");
        if (std::floor(p.delta / dt + node_tolerance) < 1.0) fail("delta below one age step");
        return SpaceTimeGrid(p);
    }

    [[nodiscard]] const GridParams& params() const { return p_; }
    [[nodiscard]] double T() const { return p_.T; }
    [[nodiscard]] double A() const { return p_.A; }
    [[nodiscard]] double delta() const { return p_.delta; }
    [[nodiscard]] double x0() const { return p_.x0; }
    [[nodiscard]] const Interval& omega() const { return p_.omega; }
    [[nodiscard]] const Interval& omega0() const { return p_.omega0; }
    [[nodiscard]] const Interval& omega_prime() const { return p_.omega_prime; }

    [[nodiscard]] std::size_t nx() const { return p_.nx; }
    [[nodiscard]] std::size_t nt() const { return p_.nt; }
    [[nodiscard]] std::size_t na() const { return p_.na; }

    /// Common step Δt = Δa.
    [[nodiscard]] double dt() const { return step_; }
    [[nodiscard]] double da() const { return step_; }
    [[nodiscard]] double dx() const { return 1.0 / static_cast<double>(p_.nx); }

    [[nodiscard]] double t(std::size_t n) const { return static_cast<double>(n) * step_; }
    [[nodiscard]] double a(std::size_t j) const { return static_cast<double>(j) * step_; }
    [[nodiscard]] double x(std::size_t i) const {
        return static_cast<double>(i) / static_cast<double>(p_.nx);
    }

    [[nodiscard]] std::size_t x0_index() const { return x0_index_; }

    /// χ_ω at node i (open interval).
    [[nodiscard]] bool in_omega(std::size_t i) const { return p_.omega.contains(x(i)); }

    /// Nodes whose abscissa lies in the closed interval.
    [[nodiscard]] IndexRange x_nodes_in(const Interval& iv) const {
        const double n = static_cast<double>(p_.nx);
        const auto first = static_cast<std::size_t>(std::ceil(iv.lo * n - node_tolerance));
        const auto last = static_cast<std::size_t>(std::floor(iv.hi * n + node_tolerance));
        return {first, std::min(last, p_.nx)};
    }

    /// Age index of δ rounded down to a node; the target band is a ∈ [a(delta_index), A].
    [[nodiscard]] std::size_t delta_index() const { return delta_index_; }
    [[nodiscard]] IndexRange band_ages() const { return {delta_index_, p_.na}; }
    [[nodiscard]] IndexRange below_delta_ages() const { return {0, delta_index_}; }

    [[nodiscard]] std::string signature() const {
        std::ostringstream os;
        os << "nx=" << p_.nx << ",na=" << p_.na << ",nt=" << p_.nt;
        return os.str();
    }

    friend bool operator==(const SpaceTimeGrid& l, const SpaceTimeGrid& r) {
        return l.p_.nx == r.p_.nx && l.p_.na == r.p_.na && l.p_.nt == r.p_.nt && l.p_.T == r.p_.T &&
               l.p_.A == r.p_.A;
    }

private:
    explicit SpaceTimeGrid(const GridParams& p)
        : p_(p),
          step_(p.T / static_cast<double>(p.nt)),
          x0_index_(static_cast<std::size_t>(std::llround(p.x0 * static_cast<double>(p.nx)))),
          delta_index_(static_cast<std::size_t>(std::floor(p.delta / step_ + node_tolerance))) {}

    GridParams p_;
    double step_;
    std::size_t x0_index_;
    std::size_t delta_index_;
};

/// Grid parameters with nt derived from na so that Δt = Δa.
inline GridParams aligned_params(GridParams p, std::size_t nx, std::size_t na) {
    p.nx = nx;
    p.na = na;
    const double nt = p.T * static_cast<double>(na) / p.A;
    p.nt = static_cast<std::size_t>(std::llround(nt));
    return p;
}

}  // namespace popctl
