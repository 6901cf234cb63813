#pragma once

// Gaussian conditioning of the knot-value vector xi on noisy observations.

#include <cstddef>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bagp/basis.hpp"
#include "bagp/kernel.hpp"

namespace bagp {

/// Observations: rows of X live in [0,1]^D, y has one entry per row.
class Dataset {
 public:
  Dataset() = default;
  /// Throws ValidationError on empty, mismatched, non-finite or out-of-cube input.
  Dataset(Matrix X, Vector y);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  [[nodiscard]] std::size_t dimension() const noexcept { return static_cast<std::size_t>(X_.cols()); }
  [[nodiscard]] const Matrix& X() const noexcept { return X_; }
  [[nodiscard]] const Vector& y() const noexcept { return y_; }
  [[nodiscard]] std::span<const double> row(std::size_t i, std::vector<double>& buffer) const;

  /// Empirical variance of y (denominator n).
  [[nodiscard]] double variance() const;

 private:
  Matrix X_;
  Vector y_;
};

/// Smallest noise variance accepted by condition(): 1e-8 var(y), or
/// 1e-8 mean(y^2) for constant y (and 1e-8 when y is identically zero).
double noise_floor(const Vector& y);

/// How the posterior mean is computed. `direct` uses the n x n system
/// K~ Phi (Phi^T K~ Phi + tau2 I)^-1 Y; `woodbury` solves
/// Sigma^-1 mu = Phi Y / tau2. `automatic` picks direct when n <= |L|.
enum class MeanPath { automatic, direct, woodbury };

struct Posterior {
  Vector mu;
  Matrix sigma_inv;
  /// Cholesky factor of sigma_inv (sigma_inv = L L^T).
  Eigen::LLT<Matrix> sigma_inv_llt;
  MeanPath path_used = MeanPath::direct;
  double tau2 = 0.0;
  bool tau2_clamped = false;

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(mu.size()); }
  /// Sigma = (Sigma^-1)^-1, formed on request.
  [[nodiscard]] Matrix sigma() const;
};

/// Conditions xi ~ N(0, K~) on Y = Phi(X)^T xi + noise(tau2). tau2 below
/// noise_floor(Y) is clamped with a warning.
Posterior condition(const BasisStructure& basis, const PriorCov& prior, const Dataset& data,
                    double tau2, MeanPath path = MeanPath::automatic);

/// Reference implementation through the dense covariance formula
/// Sigma = K~ - K~ Phi (Phi^T K~ Phi + tau2 I)^-1 Phi^T K~; sigma_inv is its
/// inverse. Intended for validation.
Posterior condition_direct(const BasisStructure& basis, const PriorCov& prior,
                           const Dataset& data, double tau2);

double posterior_predict_mean(const BasisStructure& basis, const Posterior& post,
                              std::span<const double> x);

}  // namespace bagp
