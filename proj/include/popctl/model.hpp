#pragma once

#include <memory>

#include "popctl/coefficients.hpp"
#include "popctl/diffusion.hpp"
#include "popctl/grid.hpp"
#include "popctl/quadrature.hpp"

namespace popctl {

/// Coefficients bound to a grid and sampled once; immutable and shareable.
class Model {
public:
    Model(CoefficientSet coeffs, SpaceTimeGrid grid)
        : coeffs_(std::move(coeffs)),
          grid_(std::move(grid)),
          sampled_(std::make_shared<const SampledCoefficients>(SampledCoefficients::sample(coeffs_, grid_))) {}

    [[nodiscard]] const SpaceTimeGrid& grid() const { return grid_; }
    [[nodiscard]] const CoefficientSet& coeffs() const { return coeffs_; }
    [[nodiscard]] const SampledCoefficients& sampled() const { return *sampled_; }

    /// Fresh stepper (each caller owns its scratch).
    [[nodiscard]] DiffusionStepper stepper() const { return {sampled_->k_half, grid_.dx(), grid_.dt()}; }

    /// Same coefficients with β replaced (used by the trace-invariance checks).
    [[nodiscard]] Model with_beta(Rate beta) const {
        CoefficientSet c = coeffs_;
        c.beta = std::move(beta);
        return {std::move(c), grid_};
    }
    [[nodiscard]] Model without_beta() const { return with_beta(Rate::zero()); }
    [[nodiscard]] Model without_mortality() const {
        CoefficientSet c = coeffs_;
        c.mu = Rate::zero();
        return {std::move(c), grid_};
    }

private:
    CoefficientSet coeffs_;
    SpaceTimeGrid grid_;
    std::shared_ptr<const SampledCoefficients> sampled_;
};

}  // namespace popctl
