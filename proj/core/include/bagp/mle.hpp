#pragma once

// Maximum-likelihood estimation of block variances, length-scales and the
// noise variance. Parameters are optimized in log space, ordered as
// (log sigma2_1..B, log theta for each block variable in layout order, log tau2).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bagp/basis.hpp"
#include "bagp/kernel.hpp"
#include "bagp/optim.hpp"
#include "bagp/posterior.hpp"

namespace bagp {

struct MleOptions {
  /// Space-filling starts in addition to the warm start.
  std::size_t starts = 5;
  std::size_t max_iterations = 200;
  double gradient_tol = 1e-6;
  std::uint64_t seed = 0;
  /// Workers for the independent starts (1 = sequential).
  std::size_t threads = 1;
  double theta_min = 1e-2;
  double theta_max = 10.0;
  /// sigma2 bounds relative to the response scale.
  double sigma2_min = 1e-6;
  double sigma2_max = 1e3;
};

class MleProblem {
 public:
  MleProblem(const BasisStructure& basis, const Dataset& data, const MleOptions& options = {});

  [[nodiscard]] std::size_t parameter_count() const noexcept { return count_; }
  [[nodiscard]] const Vector& lower() const noexcept { return lower_; }
  [[nodiscard]] const Vector& upper() const noexcept { return upper_; }
  /// var(y), or mean(y^2) for constant y, or 1 for y = 0.
  [[nodiscard]] double response_scale() const noexcept { return scale_; }
  [[nodiscard]] double tau2_floor() const noexcept { return floor_; }
  [[nodiscard]] const BasisStructure& basis() const noexcept { return basis_; }

  [[nodiscard]] Vector pack(const KernelParams& params) const;
  [[nodiscard]] KernelParams unpack(const Vector& log_params) const;
  /// Clamps every parameter into its bounds.
  [[nodiscard]] Vector clamp(const Vector& log_params) const;

  /// Negative log-likelihood; fills grad (d nll / d log-param) when non-null.
  double evaluate(const Vector& log_params, Vector* grad) const;

 private:
  BasisStructure basis_;
  Vector y_;
  std::vector<Matrix> phi_;  // per block, |L_j| x n
  std::size_t count_ = 0;
  double scale_ = 1.0;
  double floor_ = 1e-8;
  Vector lower_;
  Vector upper_;
};

double nll(const MleProblem& problem, const Vector& log_params);
Vector nll_grad(const MleProblem& problem, const Vector& log_params);

struct MleStart {
  Vector start;
  Vector optimum;
  double nll = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool warm = false;
  std::string error;
};

struct MleResult {
  KernelParams params;
  Vector log_params;
  double nll = 0.0;
  std::vector<MleStart> starts;
  std::size_t evaluations = 0;
};

/// Best of the warm start (if any) and options.starts space-filling starts.
/// Throws NumericalError when every start fails.
MleResult fit_params(const MleProblem& problem, const std::optional<KernelParams>& warm_start,
                     const MleOptions& options = {});

}  // namespace bagp
