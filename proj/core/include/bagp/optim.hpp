#pragma once

// Box-constrained smooth minimization (projected BFGS with backtracking).

#include <cstddef>
#include <functional>
#include <string>

#include "bagp/basis.hpp"

namespace bagp {

/// Returns f(x); fills *grad when grad is non-null.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct BoxOptions {
  std::size_t max_iterations = 200;
  /// Stop when the projected gradient's inf-norm falls below this.
  double gradient_tol = 1e-6;
  /// Stop after this many consecutive steps with relative decrease below 1e-14.
  std::size_t stall_limit = 5;
};

struct BoxResult {
  Vector x;
  double f = 0.0;
  Vector gradient;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Projected gradient of f at x for the box [lower, upper].
Vector projected_gradient(const Vector& x, const Vector& grad, const Vector& lower,
                          const Vector& upper);

BoxResult minimize_box(const Objective& f, Vector x0, const Vector& lower, const Vector& upper,
                       const BoxOptions& options = {});

}  // namespace bagp
