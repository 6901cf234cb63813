#include "bagp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "bagp/error.hpp"
#include "bagp/log.hpp"

namespace bagp {

const char* to_string(QpMethod method) {
  switch (method) {
    case QpMethod::unconstrained:
      return "unconstrained";
    case QpMethod::active_set:
      return "active_set";
    case QpMethod::interior_point:
      return "interior_point";
  }
  return "unknown";
}

double KktResidual::max() const {
  return std::max({stationarity, feasibility, complementarity, dual_feasibility});
}

namespace {

double kkt_scale(const Matrix& G, const Vector& mu, const Vector& x) {
  const double g = G.size() == 0 ? 0.0 : G.cwiseAbs().rowwise().sum().maxCoeff();
  const double v = std::max(x.size() ? x.cwiseAbs().maxCoeff() : 0.0,
                            mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0);
  return std::max(1.0, g * v);
}

void check_problem(const Matrix& G, const Vector& mu, const SparseMatrix& A, const Vector& b) {
  if (G.rows() != G.cols() || G.rows() != mu.size()) {
    throw ArgumentError("QP: G must be square and match mu");
  }
  if (A.cols() != mu.size() || A.rows() != b.size()) {
    throw ArgumentError("QP: constraint matrix shape mismatch");
  }
}

}  // namespace

KktResidual kkt_residual(const Matrix& G, const Vector& mu, const SparseMatrix& A, const Vector& b,
                         const Vector& x, const Vector& lambda) {
  KktResidual r;
  const double scale = kkt_scale(G, mu, x);
  Vector grad = G * (x - mu);
  if (A.rows() > 0) grad += A.transpose() * lambda;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() / scale : 0.0;
  if (A.rows() > 0) {
    const Vector slack = A * x - b;
    r.feasibility = std::max(0.0, slack.maxCoeff());
    r.complementarity = (lambda.array() * slack.array()).abs().maxCoeff() / scale;
    r.dual_feasibility = std::max(0.0, -lambda.minCoeff()) / scale;
  }
  return r;
}

namespace {

// Goldfarb–Idnani working state. Constraint i reads c_i(x) = b_i - A_i x >= 0
// with gradient n_i = -A_i^T.
class DualActiveSet {
 public:
  DualActiveSet(const Eigen::LLT<Matrix>& G_llt, const SparseMatrix& A, const Vector& b)
      : A_(A), b_(b), n_(A.cols()) {
    // J = L^-T so that J J^T = G^-1.
    J_ = G_llt.matrixU().solve(Matrix::Identity(n_, n_));
    R_ = Matrix::Zero(n_, n_);
  }

  // d = J^T n_p for the sparse row p.
  Vector project(Eigen::Index p) const {
    Vector d = Vector::Zero(n_);
    for (SparseMatrix::InnerIterator it(A_, p); it; ++it) d -= it.value() * J_.row(it.col()).transpose();
    return d;
  }

  double slack(Eigen::Index p, const Vector& x) const {
    double s = b_[p];
    for (SparseMatrix::InnerIterator it(A_, p); it; ++it) s -= it.value() * x[it.col()];
    return s;
  }

  void add(Vector d, Eigen::Index p, double u) {
    for (Eigen::Index j = n_ - 1; j > q_; --j) {
      const double h = std::hypot(d[j - 1], d[j]);
      if (h == 0.0) continue;
      const double c = d[j - 1] / h;
      const double s = d[j] / h;
      d[j - 1] = h;
      d[j] = 0.0;
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1) = c * t1 + s * t2;
        J_(k, j) = -s * t1 + c * t2;
      }
    }
    R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    active_.push_back(p);
    u_.push_back(u);
    ++q_;
  }

  void drop(Eigen::Index k) {
    for (Eigen::Index col = k; col + 1 < q_; ++col) R_.col(col).head(q_) = R_.col(col + 1).head(q_);
    R_.col(q_ - 1).setZero();
    active_.erase(active_.begin() + k);
    u_.erase(u_.begin() + k);
    --q_;
    for (Eigen::Index j = k; j < q_; ++j) {
      const double h = std::hypot(R_(j, j), R_(j + 1, j));
      if (h == 0.0) continue;
      const double c = R_(j, j) / h;
      const double s = R_(j + 1, j) / h;
      for (Eigen::Index col = j; col < q_; ++col) {
        const double t1 = R_(j, col);
        const double t2 = R_(j + 1, col);
        R_(j, col) = c * t1 + s * t2;
        R_(j + 1, col) = -s * t1 + c * t2;
      }
      R_(j + 1, j) = 0.0;
      for (Eigen::Index row = 0; row < n_; ++row) {
        const double t1 = J_(row, j);
        const double t2 = J_(row, j + 1);
        J_(row, j) = c * t1 + s * t2;
        J_(row, j + 1) = -s * t1 + c * t2;
      }
    }
  }

  Eigen::Index q() const { return q_; }
  const Matrix& J() const { return J_; }
  const Matrix& R() const { return R_; }
  std::vector<Eigen::Index>& active() { return active_; }
  std::vector<double>& u() { return u_; }

 private:
  const SparseMatrix& A_;
  const Vector& b_;
  Eigen::Index n_;
  Eigen::Index q_ = 0;
  Matrix J_;
  Matrix R_;
  std::vector<Eigen::Index> active_;
  std::vector<double> u_;
};

}  // namespace

QpResult solve_qp(const Matrix& G, const Eigen::LLT<Matrix>& G_llt, const Vector& mu,
                  const SparseMatrix& A, const Vector& b, const QpOptions& options) {
  check_problem(G, mu, A, b);
  const Eigen::Index n = mu.size();
  const Eigen::Index p = A.rows();
  QpResult result;
  result.x = mu;
  result.lambda = Vector::Zero(p);

  const double tol = options.feasibility_tol;
  auto most_violated = [&](const Vector& x, const std::vector<bool>& is_active) {
    Eigen::Index best = -1;
    double worst = -tol;
    const Vector slack = b - A * x;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!is_active[static_cast<std::size_t>(i)] && slack[i] < worst) {
        worst = slack[i];
        best = i;
      }
    }
    return best;
  };

  std::vector<bool> is_active(static_cast<std::size_t>(p), false);
  Eigen::Index violated = most_violated(result.x, is_active);
  if (violated < 0) {
    result.method = QpMethod::unconstrained;
    result.kkt = kkt_residual(G, mu, A, b, result.x, result.lambda);
    return result;
  }

  result.method = QpMethod::active_set;
  if (G_llt.info() != Eigen::Success || G_llt.matrixLLT().rows() != n) {
    throw ArgumentError("QP: Cholesky factor of G is not available");
  }
  const std::size_t cap =
      options.max_iterations ? options.max_iterations : static_cast<std::size_t>(20 * (n + p) + 100);
  const double inf = std::numeric_limits<double>::infinity();

  DualActiveSet state(G_llt, A, b);
  Vector x = mu;
  std::size_t iterations = 0;
  bool capped = false;

  while (violated >= 0 && !capped) {
    const Eigen::Index pc = violated;
    double u_plus = 0.0;
    for (;;) {
      if (++iterations > cap) {
        capped = true;
        break;
      }
      const Eigen::Index q = state.q();
      const Vector d = state.project(pc);
      const Vector z = state.J().rightCols(n - q) * d.tail(n - q);
      Vector r = Vector::Zero(q);
      if (q > 0) {
        r = state.R().topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
      }

      double t1 = inf;
      Eigen::Index k = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r[j] > 0.0) {
          const double ratio = state.u()[static_cast<std::size_t>(j)] / r[j];
          if (ratio < t1 || (ratio == t1 && state.active()[static_cast<std::size_t>(j)] <
                                                 state.active()[static_cast<std::size_t>(k)])) {
            t1 = ratio;
            k = j;
          }
        }
      }

      const double d2 = d.tail(n - q).squaredNorm();
      double t2 = inf;
      if (d2 > 1e-20 * d.squaredNorm()) t2 = -state.slack(pc, x) / d2;

      const double t = std::min(t1, t2);
      if (t == inf) throw NumericalError("QP: constraints are infeasible");

      if (t2 == inf) {
        for (Eigen::Index j = 0; j < q; ++j) state.u()[static_cast<std::size_t>(j)] -= t * r[j];
        u_plus += t;
        is_active[static_cast<std::size_t>(state.active()[static_cast<std::size_t>(k)])] = false;
        state.drop(k);
        continue;
      }

      x += t * z;
      for (Eigen::Index j = 0; j < q; ++j) state.u()[static_cast<std::size_t>(j)] -= t * r[j];
      u_plus += t;
      if (t == t2) {
        state.add(d, pc, u_plus);
        is_active[static_cast<std::size_t>(pc)] = true;
        break;
      }
      is_active[static_cast<std::size_t>(state.active()[static_cast<std::size_t>(k)])] = false;
      state.drop(k);
    }
    if (!capped) violated = most_violated(x, is_active);
  }

  if (capped) {
    if (!options.fallback) {
      std::ostringstream msg;
      msg << "QP: active-set method did not converge within " << cap << " steps";
      throw NumericalError(msg.str());
    }
    log::warn("QP: active-set iteration cap reached, switching to interior point");
    QpResult ip = solve_qp_interior(G, mu, A, b, options.fallback_start, options);
    ip.fell_back = true;
    ip.iterations += iterations;
    return ip;
  }

  result.x = x;
  for (std::size_t j = 0; j < state.active().size(); ++j) {
    result.lambda[state.active()[j]] = std::max(0.0, state.u()[j]);
  }
  result.iterations = iterations;
  result.active_constraints = state.active().size();
  result.kkt = kkt_residual(G, mu, A, b, result.x, result.lambda);
  return result;
}

QpResult solve_qp_interior(const Matrix& G, const Vector& mu, const SparseMatrix& A,
                           const Vector& b, const std::optional<Vector>& start,
                           const QpOptions& options) {
  check_problem(G, mu, A, b);
  const Eigen::Index n = mu.size();
  const Eigen::Index p = A.rows();
  QpResult result;
  result.method = QpMethod::interior_point;
  if (p == 0) {
    result.x = mu;
    result.lambda = Vector::Zero(0);
    result.method = QpMethod::unconstrained;
    result.kkt = kkt_residual(G, mu, A, b, result.x, result.lambda);
    return result;
  }

  Vector x = start && start->size() == n ? *start : mu;
  const Matrix Ad = Matrix(A);
  const double scale = kkt_scale(G, mu, x);
  Vector s = (b - Ad * x).cwiseMax(1e-2);
  Vector lambda = Vector::Constant(p, 1.0);
  const Vector Gmu = G * mu;
  const double b_scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  double best_merit = std::numeric_limits<double>::infinity();
  Vector best_x = x;
  Vector best_lambda = lambda;

  std::size_t it = 0;
  for (; it < options.interior_max_iterations; ++it) {
    const Vector r_d = G * x - Gmu + Ad.transpose() * lambda;
    const Vector r_p = Ad * x + s - b;
    const double gap = s.dot(lambda) / static_cast<double>(p);
    const double rd = r_d.cwiseAbs().maxCoeff() / scale;
    const double rp = r_p.cwiseAbs().maxCoeff() / b_scale;
    const double merit = std::max({rd, rp, gap / scale});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_lambda = lambda;
    }
    if (rd <= 1e-11 && rp <= 1e-11 && gap <= 1e-13 * scale) break;

    const Vector D = lambda.cwiseQuotient(s);
    Matrix M = G;
    M.noalias() += Ad.transpose() * D.asDiagonal() * Ad;
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) {
      // Barrier terms dominate near convergence; a relative ridge restores definiteness.
      M.diagonal().array() += 1e-14 * M.diagonal().cwiseAbs().maxCoeff();
      llt.compute(M);
      if (llt.info() != Eigen::Success) throw NumericalError("QP: interior-point system is singular");
    }

    auto newton = [&](const Vector& r_c) {
      const Vector rhs = -r_d - Ad.transpose() * (D.cwiseProduct(r_p) - r_c.cwiseQuotient(s));
      Vector dx = llt.solve(rhs);
      Vector dl = D.cwiseProduct(Ad * dx + r_p) - r_c.cwiseQuotient(s);
      Vector ds = -(r_c + s.cwiseProduct(dl)).cwiseQuotient(lambda);
      return std::tuple{dx, ds, dl};
    };
    auto max_step = [](const Vector& v, const Vector& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
      }
      return a;
    };

    // Mehrotra predictor-corrector.
    auto [dx_a, ds_a, dl_a] = newton(s.cwiseProduct(lambda));
    const double a_aff = std::min(max_step(s, ds_a), max_step(lambda, dl_a));
    const double mu_aff =
        (s + a_aff * ds_a).dot(lambda + a_aff * dl_a) / static_cast<double>(p);
    const double sigma = std::pow(mu_aff / std::max(gap, 1e-300), 3.0);
    const Vector r_c = s.cwiseProduct(lambda) + ds_a.cwiseProduct(dl_a) -
                       Vector::Constant(p, sigma * gap);
    auto [dx, ds, dl] = newton(r_c);
    const double alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lambda, dl)));
    x += alpha * dx;
    s += alpha * ds;
    lambda += alpha * dl;
  }
  if (it == options.interior_max_iterations) {
    // Roundoff can stall the final digits; accept the best iterate if it is close.
    if (best_merit > 1e-9) throw NumericalError("QP: interior-point method did not converge");
    x = best_x;
    lambda = best_lambda;
  }
  result.x = x;
  result.lambda = lambda;
  result.iterations = it;
  const Vector slack = Ad * x - b;
  result.active_constraints =
      static_cast<std::size_t>((slack.array() > -options.feasibility_tol).count());
  result.kkt = kkt_residual(G, mu, A, b, result.x, result.lambda);
  return result;
}

}  // namespace bagp
