#pragma once

// Sampling the knot values from the posterior truncated to the constraint
// polyhedron: exact Hamiltonian Monte Carlo with wall reflections, and a
// coordinatewise Gibbs sampler as fallback.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>

#include <Eigen/Cholesky>

#include "bagp/basis.hpp"
#include "bagp/constraint.hpp"
#include "bagp/posterior.hpp"

namespace bagp {

enum class SamplerKind { hmc, gibbs };

struct SamplerOptions {
  SamplerKind kind = SamplerKind::hmc;
  /// Discarded leading draws; unset means min(100, N / 10).
  std::optional<std::size_t> burn_in;
  /// Integration time of each Hamiltonian trajectory.
  double travel_time = std::numbers::pi / 2.0;
  /// Wall hits allowed per trajectory before the step is redone by Gibbs.
  std::size_t max_bounces = 10000;
  /// Draws violating a constraint by more than this are rejected.
  double feasibility_tol = 1e-8;
};

struct SamplerDiagnostics {
  std::size_t iterations = 0;
  std::size_t bounces = 0;
  /// HMC steps that were replaced by a Gibbs sweep.
  std::size_t gibbs_fallbacks = 0;
  bool used_gibbs = false;
  double max_violation = 0.0;
};

struct SampleBatch {
  /// One draw per row.
  Matrix draws;
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  SamplerDiagnostics diagnostics;

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(draws.rows()); }
  [[nodiscard]] Vector mean() const;
};

/// Draws N vectors from N(mu, Q^-1) restricted to A x <= b, where Q is
/// given by its Cholesky factor. `start` must satisfy the constraints
/// (strictly, ideally).
SampleBatch sample_truncated(const Vector& mu, const Eigen::LLT<Matrix>& precision_llt,
                             const Matrix& A, const Vector& b, const Vector& start, std::size_t N,
                             std::uint64_t seed, const SamplerOptions& options = {});

/// Posterior knot values given the data and Lambda xi <= 0. The chain starts
/// from `map` pushed slightly into the interior of the constraint set.
SampleBatch sample_truncated(const Posterior& post, const ConstraintSystem& cons, const Vector& map,
                             std::size_t N, std::uint64_t seed,
                             const SamplerOptions& options = {});

/// map + delta * d where d increases by one per grid step along every
/// constraint chain, so every monotonicity row holds with margin delta.
Vector interior_start(const ConstraintSystem& cons, const Vector& map, double delta);

/// Standard normal truncated to [lo, hi].
double truncated_standard_normal(double lo, double hi, std::mt19937_64& rng);

/// Phi(x)^T (average of the draws).
double posterior_mean_predict(const BasisStructure& basis, const SampleBatch& batch,
                              std::span<const double> x);

/// Header xi1..xiL, one draw per row, 17 significant digits.
void write_samples_csv(std::ostream& out, const SampleBatch& batch);

}  // namespace bagp
