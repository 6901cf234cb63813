#include "bagp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bagp/error.hpp"

namespace bagp {

Vector projected_gradient(const Vector& x, const Vector& grad, const Vector& lower,
                          const Vector& upper) {
  return x - (x - grad).cwiseMax(lower).cwiseMin(upper);
}

BoxResult minimize_box(const Objective& f, Vector x0, const Vector& lower, const Vector& upper,
                       const BoxOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw ArgumentError("box bounds have the wrong size");
  if ((lower.array() > upper.array()).any()) throw ArgumentError("box lower bound exceeds upper");

  BoxResult res;
  Vector x = x0.cwiseMax(lower).cwiseMin(upper);
  Vector g(n);
  double fx = f(x, &g);
  ++res.evaluations;
  if (!std::isfinite(fx) || !g.allFinite()) throw NumericalError("objective is not finite at the start");

  Matrix H = Matrix::Identity(n, n);
  std::size_t stalls = 0;
  res.message = "iteration limit";

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    res.iterations = it;
    const Vector pg = projected_gradient(x, g, lower, upper);
    if (n == 0 || pg.cwiseAbs().maxCoeff() <= options.gradient_tol) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      fixed[static_cast<std::size_t>(i)] =
          (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0);
    }
    Vector d = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)]) continue;
      double acc = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (!fixed[static_cast<std::size_t>(k)]) acc -= H(i, k) * g[k];
      }
      d[i] = acc;
    }
    if (d.dot(g) >= 0.0) {
      H.setIdentity();
      d = -pg;
    }

    // Backtracking Armijo search along the projected path.
    double step = 1.0;
    Vector x_new(n);
    Vector g_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = (x + step * d).cwiseMax(lower).cwiseMin(upper);
      const double decrease = g.dot(x_new - x);
      if ((x_new - x).cwiseAbs().maxCoeff() == 0.0) break;
      f_new = f(x_new, &g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!H.isIdentity()) {
        H.setIdentity();
        continue;
      }
      res.message = "line search failed";
      break;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Vector Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    const double rel = (fx - f_new) / std::max(1.0, std::abs(fx));
    stalls = rel < 1e-14 ? stalls + 1 : 0;
    x = x_new;
    g = g_new;
    fx = f_new;
    res.iterations = it + 1;
    if (stalls >= options.stall_limit) {
      res.message = "no further progress";
      break;
    }
  }
  if (!res.converged && projected_gradient(x, g, lower, upper).cwiseAbs().maxCoeff() <=
                            options.gradient_tol) {
    res.converged = true;
  }
  res.x = x;
  res.f = fx;
  res.gradient = g;
  return res;
}

}  // namespace bagp
