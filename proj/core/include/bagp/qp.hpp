#pragma once

// Strictly convex quadratic programs
//   minimize (x - mu)^T G (x - mu)  subject to  A x <= b
// with G symmetric positive definite.

#include <cstddef>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bagp/basis.hpp"

namespace bagp {

enum class QpMethod { unconstrained, active_set, interior_point };

const char* to_string(QpMethod method);

struct KktResidual {
  /// ||G (x - mu) + A^T lambda||_inf divided by max(1, ||G||_inf max(||x||_inf, ||mu||_inf)).
  double stationarity = 0.0;
  /// max(0, max_i (A x - b)_i), absolute.
  double feasibility = 0.0;
  /// max_i |lambda_i (A x - b)_i| on the same relative scale as stationarity.
  double complementarity = 0.0;
  /// max(0, -min_i lambda_i).
  double dual_feasibility = 0.0;

  [[nodiscard]] double max() const;
};

struct QpOptions {
  double feasibility_tol = 1e-9;
  /// Cap on active-set steps; 0 selects 20 (n + p) + 100.
  std::size_t max_iterations = 0;
  /// Switch to the interior-point solver if the active-set loop hits its cap.
  bool fallback = true;
  std::size_t interior_max_iterations = 200;
  /// Primal starting point for the interior-point fallback.
  std::optional<Vector> fallback_start;
};

struct QpResult {
  Vector x;
  /// One multiplier per row of A (zero for inactive rows).
  Vector lambda;
  QpMethod method = QpMethod::unconstrained;
  std::size_t iterations = 0;
  std::size_t active_constraints = 0;
  bool fell_back = false;
  KktResidual kkt;
};

KktResidual kkt_residual(const Matrix& G, const Vector& mu, const SparseMatrix& A, const Vector& b,
                         const Vector& x, const Vector& lambda);

/// Dual active-set method of Goldfarb and Idnani, started from the
/// unconstrained minimizer mu. Pivots on the most violated constraint, ties
/// to the lowest row index. Returns mu unchanged when it is feasible.
QpResult solve_qp(const Matrix& G, const Eigen::LLT<Matrix>& G_llt, const Vector& mu,
                  const SparseMatrix& A, const Vector& b, const QpOptions& options = {});

/// Primal-dual interior-point method; `start` (any point) seeds the primal
/// iterate.
QpResult solve_qp_interior(const Matrix& G, const Vector& mu, const SparseMatrix& A,
                           const Vector& b, const std::optional<Vector>& start = std::nullopt,
                           const QpOptions& options = {});

}  // namespace bagp
