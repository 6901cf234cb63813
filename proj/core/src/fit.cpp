#include "bagp/fit.hpp"

#include <algorithm>
#include <chrono>

#include "bagp/error.hpp"

namespace bagp {

FittedModel fit_model(const BasisStructure& basis, const Dataset& data,
                      const std::vector<Monotonicity>& directions, const FitOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  if (data.dimension() != basis.dimension()) {
    throw ValidationError("dataset has " + std::to_string(data.dimension()) +
                          " inputs, model expects " + std::to_string(basis.dimension()));
  }
  FittedModel model;
  model.basis = basis;
  model.directions = directions;
  model.constraints = build_monotone_constraints(basis, directions);

  if (basis.size() == 0) {
    model.params.tau2 = std::max(data.variance(), noise_floor(data.y()));
    model.xi = Vector::Zero(0);
    model.mu = Vector::Zero(0);
    return model;
  }

  if (options.estimate_params) {
    const MleProblem problem(basis, data, options.mle);
    const MleResult mle = fit_params(problem, options.params, options.mle);
    model.params = mle.params;
    model.diagnostics.nll = mle.nll;
    model.diagnostics.mle_evaluations = mle.evaluations;
  } else {
    if (!options.params) throw ArgumentError("fixed-parameter fit needs kernel parameters");
    model.params = *options.params;
    const MleProblem problem(basis, data, options.mle);
    model.diagnostics.nll = nll(problem, problem.pack(model.params));
  }

  const PriorCov prior(basis, model.params);
  const Posterior post = condition(basis, prior, data, model.params.tau2, options.path);
  model.params.tau2 = post.tau2;
  model.diagnostics.tau2_clamped = post.tau2_clamped;
  model.mu = post.mu;

  const MapResult map = map_estimate(post, model.constraints, options.qp);
  model.xi = map.xi;
  model.diagnostics.qp_iterations = map.qp.iterations;
  model.diagnostics.active_constraints = map.qp.active_constraints;
  model.diagnostics.qp_method = map.qp.method;
  model.diagnostics.qp_fell_back = map.qp.fell_back;
  model.diagnostics.kkt = map.qp.kkt;
  model.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

}  // namespace bagp
