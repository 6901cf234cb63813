#pragma once

// Componentwise monotonicity as linear inequalities on the knot values, the
// constrained mode (MAP) and the fitted predictor.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagp/basis.hpp"
#include "bagp/kernel.hpp"
#include "bagp/posterior.hpp"
#include "bagp/qp.hpp"

namespace bagp {

enum class Monotonicity { increasing, decreasing, none };

const char* to_string(Monotonicity m);
Monotonicity parse_monotonicity(const std::string& text);

/// Non-decreasing in every variable.
std::vector<Monotonicity> default_directions(std::size_t dimension);

/// Rows read xi[lo] - xi[hi] <= 0. Rows are grouped by block; within a block
/// by constrained variable, then by grid line, then along the line.
class ConstraintSystem {
 public:
  struct Row {
    std::size_t lo = 0;
    std::size_t hi = 0;
  };

  ConstraintSystem() = default;

  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
  [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }
  [[nodiscard]] std::size_t columns() const noexcept { return columns_; }
  [[nodiscard]] const std::vector<Row>& rows() const noexcept { return rows_; }
  /// Half-open row range [first, second) of block j.
  [[nodiscard]] std::pair<std::size_t, std::size_t> block_rows(std::size_t j) const {
    return {block_starts_[j], block_starts_[j + 1]};
  }
  /// Index chains along which the coefficients must be non-decreasing.
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& chains() const noexcept {
    return chains_;
  }
  [[nodiscard]] const std::vector<Monotonicity>& directions() const noexcept { return directions_; }

  /// Lambda as a sparse matrix (size() x columns()).
  [[nodiscard]] SparseMatrix matrix() const;
  /// Lambda xi.
  [[nodiscard]] Vector apply(const Vector& xi) const;
  /// max(0, max_r (Lambda xi)_r).
  [[nodiscard]] double max_violation(const Vector& xi) const;

  friend ConstraintSystem build_monotone_constraints(const BasisStructure& basis,
                                                     const std::vector<Monotonicity>& directions);

 private:
  std::size_t columns_ = 0;
  std::vector<Row> rows_;
  std::vector<std::size_t> block_starts_{0};
  std::vector<std::vector<std::size_t>> chains_;
  std::vector<Monotonicity> directions_;
};

/// One direction per input variable (entries of inactive variables are ignored).
ConstraintSystem build_monotone_constraints(const BasisStructure& basis,
                                            const std::vector<Monotonicity>& directions);

/// Pool-adjacent-violators sweeps along every chain, a cheap approximately
/// feasible starting point for the interior-point solver.
Vector isotonic_sweeps(const ConstraintSystem& cons, const Vector& start, std::size_t sweeps = 50);

struct MapResult {
  Vector xi;
  QpResult qp;
};

/// argmin (xi - mu)^T Sigma^-1 (xi - mu) subject to Lambda xi <= 0.
MapResult map_estimate(const Posterior& post, const ConstraintSystem& cons,
                       const QpOptions& options = {});

/// Optional min-max scaling of raw inputs onto [0,1]^D.
struct Normalization {
  std::vector<double> lower;
  std::vector<double> upper;

  [[nodiscard]] std::vector<double> apply(std::span<const double> raw, bool clamp) const;
};

struct FitDiagnostics {
  double nll = 0.0;
  std::size_t qp_iterations = 0;
  std::size_t active_constraints = 0;
  QpMethod qp_method = QpMethod::unconstrained;
  bool qp_fell_back = false;
  KktResidual kkt;
  bool tau2_clamped = false;
  std::size_t mle_evaluations = 0;
  double wall_seconds = 0.0;
};

struct FittedModel {
  BasisStructure basis;
  KernelParams params;
  /// Constrained mode of the knot values.
  Vector xi;
  /// Unconstrained posterior mean of the knot values.
  Vector mu;
  std::vector<Monotonicity> directions;
  ConstraintSystem constraints;
  FitDiagnostics diagnostics;
  std::optional<Normalization> normalization;

  [[nodiscard]] std::size_t dimension() const noexcept { return basis.dimension(); }
};

/// Phi(x)^T xi.
double predict(const FittedModel& model, std::span<const double> x);
/// Phi(x)^T mu (the unconstrained posterior mean).
double predict_mean(const FittedModel& model, std::span<const double> x);

/// Per-block predictors centered to zero mean over the unit cube. Keeps its
/// own copy of the basis and coefficients.
class BlockPredictors {
 public:
  explicit BlockPredictors(const FittedModel& model);

  [[nodiscard]] std::size_t size() const noexcept { return integrals_.size(); }
  /// Integral of block j's uncentered predictor over the cube.
  [[nodiscard]] double integral(std::size_t j) const { return integrals_.at(j); }
  /// Integral of the full predictor.
  [[nodiscard]] double constant() const noexcept { return constant_; }
  /// Centered block predictor j at x.
  [[nodiscard]] double operator()(std::size_t j, std::span<const double> x) const;

 private:
  BasisStructure basis_;
  Vector xi_;
  std::vector<double> integrals_;
  double constant_ = 0.0;
};

inline BlockPredictors block_predictors(const FittedModel& model) { return BlockPredictors(model); }

}  // namespace bagp
