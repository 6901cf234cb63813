#pragma once

// Hyperparameter estimation, conditioning and constrained mode in one call.

#include <optional>
#include <vector>

#include "bagp/basis.hpp"
#include "bagp/constraint.hpp"
#include "bagp/kernel.hpp"
#include "bagp/mle.hpp"
#include "bagp/posterior.hpp"
#include "bagp/qp.hpp"

namespace bagp {

struct FitOptions {
  MleOptions mle;
  /// Skip maximum likelihood and use `params` as given.
  bool estimate_params = true;
  /// Fixed parameters, or the warm start when estimate_params is set.
  std::optional<KernelParams> params;
  MeanPath path = MeanPath::automatic;
  QpOptions qp;
};

/// Fits kernel parameters (unless fixed), conditions on the data and solves
/// for the constrained mode. An empty basis yields the zero predictor.
FittedModel fit_model(const BasisStructure& basis, const Dataset& data,
                      const std::vector<Monotonicity>& directions, const FitOptions& options = {});

}  // namespace bagp
