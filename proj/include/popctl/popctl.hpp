#pragma once

#include "popctl/adjoint.hpp"
#include "popctl/coefficients.hpp"
#include "popctl/config.hpp"
#include "popctl/csv.hpp"
#include "popctl/diffusion.hpp"
#include "popctl/ensemble.hpp"
#include "popctl/experiment.hpp"
#include "popctl/field.hpp"
#include "popctl/forward.hpp"
#include "popctl/grid.hpp"
#include "popctl/hum.hpp"
#include "popctl/inequality.hpp"
#include "popctl/model.hpp"
#include "popctl/quadrature.hpp"
#include "popctl/validation.hpp"
#include "popctl/weights.hpp"
