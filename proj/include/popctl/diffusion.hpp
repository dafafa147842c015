#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace popctl {

/// Symmetric tridiagonal matrix on the interior nodes 1..nx-1.
struct SymmetricTridiagonal {
    std::vector<double> diag;  // size m
    std::vector<double> off;   // size m-1, entry (r, r+1)

    [[nodiscard]] std::size_t size() const { return diag.size(); }

    void multiply(std::span<const double> v, std::span<double> out) const {
        const std::size_t m = diag.size();
        for (std::size_t r = 0; r < m; ++r) {
            double s = diag[r] * v[r];
            if (r > 0) s += off[r - 1] * v[r - 1];
            if (r + 1 < m) s += off[r] * v[r + 1];
            out[r] = s;
        }
    }
};

/// Flux-form operator (L_k y)_i = (k_{i+1/2}(y_{i+1} − y_i) − k_{i−1/2}(y_i − y_{i−1}))/Δx²
/// with homogeneous Dirichlet ends, and the backward-Euler solve of (I − Δt L_k + Δt μ).
///
/// Rows passed in and out span all nx+1 nodes; boundary entries of outputs are set to 0.
/// Holds scratch storage, so one instance must not be shared between threads.
class DiffusionStepper {
public:
    DiffusionStepper(std::vector<double> k_half, double dx, double dt)
        : k_half_(std::move(k_half)), dx_(dx), dt_(dt) {
        if (k_half_.size() < 2) throw std::invalid_argument("DiffusionStepper: need at least two cells");
        const std::size_t m = interior();
        cprime_.resize(m);
        denom_.resize(m);
        dprime_.resize(m);
    }

    [[nodiscard]] std::size_t nodes() const { return k_half_.size() + 1; }
    [[nodiscard]] std::size_t interior() const { return k_half_.size() - 1; }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] double dx() const { return dx_; }
    [[nodiscard]] const std::vector<double>& k_half() const { return k_half_; }

    /// out = L_k in (out[0] = out[nx] = 0).
    void apply_operator(std::span<const double> in, std::span<double> out) const {
        const std::size_t nx = k_half_.size();
        const double inv = 1.0 / (dx_ * dx_);
        out[0] = 0.0;
        out[nx] = 0.0;
        for (std::size_t i = 1; i < nx; ++i)
            out[i] = (k_half_[i] * (in[i + 1] - in[i]) - k_half_[i - 1] * (in[i] - in[i - 1])) * inv;
    }

    /// −L_k restricted to the interior (symmetric, positive definite when all k_half > 0).
    [[nodiscard]] SymmetricTridiagonal negative_operator() const { return assemble(0.0, nullptr, 1.0); }

    /// I − Δt L_k + Δt μ on the interior nodes.
    [[nodiscard]] SymmetricTridiagonal step_matrix(std::span<const double> mu_row) const {
        return assemble(1.0, &mu_row, dt_);
    }

    /// Solves (I − Δt L_k + Δt μ) out = rhs on interior nodes; out and rhs may alias.
    void solve(std::span<const double> mu_row, std::span<const double> rhs, std::span<double> out) {
        const std::size_t m = interior();
        const double r = dt_ / (dx_ * dx_);
        if (!factored_ || !std::equal(mu_row.begin() + 1, mu_row.begin() + 1 + static_cast<std::ptrdiff_t>(m),
                                      last_mu_.begin())) {
            last_mu_.assign(mu_row.begin() + 1, mu_row.begin() + 1 + static_cast<std::ptrdiff_t>(m));
            for (std::size_t q = 0; q < m; ++q) {
                const std::size_t i = q + 1;
                const double b = 1.0 + r * (k_half_[i - 1] + k_half_[i]) + dt_ * mu_row[i];
                const double a = q > 0 ? -r * k_half_[i - 1] : 0.0;
                const double c = q + 1 < m ? -r * k_half_[i] : 0.0;
                const double d = b - (q > 0 ? a * cprime_[q - 1] : 0.0);
                if (!(d != 0.0) || !std::isfinite(d)) throw std::runtime_error("DiffusionStepper: singular system");
                denom_[q] = 1.0 / d;
                cprime_[q] = c * denom_[q];
            }
            factored_ = true;
        }
        for (std::size_t q = 0; q < m; ++q) {
            const std::size_t i = q + 1;
            const double a = q > 0 ? -r * k_half_[i - 1] : 0.0;
            dprime_[q] = (rhs[i] - (q > 0 ? a * dprime_[q - 1] : 0.0)) * denom_[q];
        }
        const std::size_t nx = k_half_.size();
        out[nx] = 0.0;
        out[m] = dprime_[m - 1];
        for (std::size_t q = m - 1; q-- > 0;) out[q + 1] = dprime_[q] - cprime_[q] * out[q + 2];
        out[0] = 0.0;
    }

private:
    [[nodiscard]] SymmetricTridiagonal assemble(double identity, const std::span<const double>* mu, double scale) const {
        const std::size_t m = interior();
        const double r = scale / (dx_ * dx_);
        SymmetricTridiagonal t;
        t.diag.resize(m);
        t.off.resize(m - 1);
        for (std::size_t q = 0; q < m; ++q) {
            const std::size_t i = q + 1;
            t.diag[q] = identity + r * (k_half_[i - 1] + k_half_[i]) + (mu ? scale * (*mu)[i] : 0.0);
            if (q + 1 < m) t.off[q] = -r * k_half_[i];
        }
        return t;
    }

    std::vector<double> k_half_;
    double dx_;
    double dt_;
    std::vector<double> cprime_, denom_, dprime_, last_mu_;
    bool factored_ = false;
};

}  // namespace popctl
