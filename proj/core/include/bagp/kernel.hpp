#pragma once

// Matérn 5/2 correlations, per-block tensor kernels and the block-diagonal
// prior covariance of the knot-value vector.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bagp/basis.hpp"

namespace bagp {

enum class Correlation { matern52 };

/// Matérn 5/2 correlation between x and x2 with length-scale theta > 0.
double matern52(double theta, double x, double x2);
/// d/dtheta of matern52 at distance h = |x - x2|.
double matern52_dtheta(double theta, double h);

double correlation(Correlation kind, double theta, double x, double x2);
double correlation_dtheta(Correlation kind, double theta, double h);

/// Variance of one block and the length-scales of its variables, in the
/// block's (ascending) variable order.
struct BlockParams {
  double sigma2 = 1.0;
  std::vector<double> thetas;

  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

struct KernelParams {
  std::vector<BlockParams> blocks;
  double tau2 = 0.0;
  Correlation kind = Correlation::matern52;

  /// sigma2 and theta for every block of the basis, tau2 as given.
  static KernelParams uniform(const BasisStructure& basis, double sigma2, double theta,
                              double tau2);

  /// Throws ArgumentError unless the layout matches the basis and all
  /// values are in range.
  void validate(const BasisStructure& basis) const;

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

/// sigma2 * prod_i r(theta_i; xb_i, xb2_i).
double block_kernel(const BlockParams& params, std::span<const double> xb,
                    std::span<const double> xb2, Correlation kind = Correlation::matern52);

/// Covariance of block j's knot values, without jitter.
Matrix block_knot_covariance(const BasisStructure& basis, std::size_t j, const BlockParams& params,
                             Correlation kind = Correlation::matern52);

/// Derivatives of block_knot_covariance with respect to each theta of the
/// block, in block variable order.
std::vector<Matrix> block_knot_covariance_dtheta(const BasisStructure& basis, std::size_t j,
                                                 const BlockParams& params,
                                                 Correlation kind = Correlation::matern52);

/// Block-diagonal prior covariance of xi with cached Cholesky factors.
class PriorCov {
 public:
  static constexpr double kBaseJitter = 1e-10;
  static constexpr double kJitterGrowth = 100.0;
  static constexpr int kMaxEscalations = 2;

  PriorCov() = default;
  PriorCov(const BasisStructure& basis, const KernelParams& params);

  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] std::size_t block_count() const noexcept { return blocks_.size(); }
  [[nodiscard]] std::size_t block_offset(std::size_t j) const { return offsets_[j]; }
  /// K_j including jitter.
  [[nodiscard]] const Matrix& block(std::size_t j) const { return blocks_[j]; }
  /// Relative jitter (times sigma_j^2) that made block j factorize.
  [[nodiscard]] double jitter(std::size_t j) const { return jitter_[j]; }
  [[nodiscard]] const Eigen::LLT<Matrix>& factor(std::size_t j) const { return llt_[j]; }

  [[nodiscard]] Matrix dense() const;
  [[nodiscard]] Matrix block_inverse(std::size_t j) const;
  [[nodiscard]] double log_det() const;
  /// K~ v, blockwise.
  [[nodiscard]] Vector multiply(const Vector& v) const;

 private:
  std::size_t size_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<Matrix> blocks_;
  std::vector<Eigen::LLT<Matrix>> llt_;
  std::vector<double> jitter_;
};

inline PriorCov prior_cov(const BasisStructure& basis, const KernelParams& params) {
  return PriorCov(basis, params);
}

}  // namespace bagp
