#include "bagp/mle.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "bagp/error.hpp"
#include "bagp/metrics.hpp"
#include "bagp/parallel.hpp"

namespace bagp {

MleProblem::MleProblem(const BasisStructure& basis, const Dataset& data, const MleOptions& options)
    : basis_(basis), y_(data.y()) {
  if (data.dimension() != basis.dimension()) {
    throw ArgumentError("dataset dimension does not match the basis");
  }
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    phi_.push_back(basis.block_design_matrix(j, data.X()));
  }
  const double var = data.variance();
  const double energy = y_.squaredNorm() / static_cast<double>(y_.size());
  scale_ = var > 0.0 ? var : (energy > 0.0 ? energy : 1.0);
  floor_ = noise_floor(y_);

  std::size_t thetas = 0;
  for (std::size_t j = 0; j < basis.block_count(); ++j) thetas += basis.block_variables(j).size();
  count_ = basis.block_count() + thetas + 1;
  lower_.resize(static_cast<Eigen::Index>(count_));
  upper_.resize(static_cast<Eigen::Index>(count_));
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < basis.block_count(); ++j, ++k) {
    lower_[k] = std::log(options.sigma2_min * scale_);
    upper_[k] = std::log(options.sigma2_max * scale_);
  }
  for (std::size_t t = 0; t < thetas; ++t, ++k) {
    lower_[k] = std::log(options.theta_min);
    upper_[k] = std::log(options.theta_max);
  }
  lower_[k] = std::log(floor_);
  upper_[k] = std::log(std::max(scale_, floor_));
}

Vector MleProblem::pack(const KernelParams& params) const {
  params.validate(basis_);
  Vector v(static_cast<Eigen::Index>(count_));
  Eigen::Index k = 0;
  for (const auto& b : params.blocks) v[k++] = std::log(b.sigma2);
  for (const auto& b : params.blocks) {
    for (double t : b.thetas) v[k++] = std::log(t);
  }
  v[k] = std::log(std::max(params.tau2, floor_));
  return v;
}

KernelParams MleProblem::unpack(const Vector& log_params) const {
  if (static_cast<std::size_t>(log_params.size()) != count_) {
    throw ArgumentError("parameter vector has the wrong length");
  }
  KernelParams p;
  const std::size_t B = basis_.block_count();
  p.blocks.resize(B);
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < B; ++j) p.blocks[j].sigma2 = std::exp(log_params[k++]);
  for (std::size_t j = 0; j < B; ++j) {
    for (std::size_t i = 0; i < basis_.block_variables(j).size(); ++i) {
      p.blocks[j].thetas.push_back(std::exp(log_params[k++]));
    }
  }
  p.tau2 = std::exp(log_params[k]);
  return p;
}

Vector MleProblem::clamp(const Vector& log_params) const {
  return log_params.cwiseMax(lower_).cwiseMin(upper_);
}

double MleProblem::evaluate(const Vector& log_params, Vector* grad) const {
  if (!log_params.allFinite()) throw ArgumentError("parameters must be finite");
  const KernelParams params = unpack(log_params);
  const auto n = y_.size();
  const std::size_t B = basis_.block_count();

  std::vector<Matrix> K(B);
  Matrix C = Matrix::Zero(n, n);
  C.diagonal().array() += params.tau2;
  for (std::size_t j = 0; j < B; ++j) {
    K[j] = block_knot_covariance(basis_, j, params.blocks[j], params.kind);
    K[j].diagonal().array() += PriorCov::kBaseJitter * params.blocks[j].sigma2;
    C.noalias() += phi_[j].transpose() * K[j] * phi_[j];
  }
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success) throw NumericalError("likelihood covariance is not positive definite");
  const Vector alpha = llt.solve(y_);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double value =
      0.5 * (logdet + y_.dot(alpha) + static_cast<double>(n) * std::log(2.0 * std::numbers::pi));

  if (grad) {
    grad->resize(static_cast<Eigen::Index>(count_));
    const Matrix Cinv = llt.solve(Matrix::Identity(n, n));
    Eigen::Index ks = 0;
    auto kt = static_cast<Eigen::Index>(B);
    for (std::size_t j = 0; j < B; ++j) {
      const Matrix W = phi_[j] * Cinv * phi_[j].transpose();
      const Vector a = phi_[j] * alpha;
      (*grad)[ks++] = 0.5 * ((W.array() * K[j].array()).sum() - a.dot(K[j] * a));
      const auto dK = block_knot_covariance_dtheta(basis_, j, params.blocks[j], params.kind);
      for (std::size_t i = 0; i < dK.size(); ++i) {
        const double theta = params.blocks[j].thetas[i];
        (*grad)[kt++] = 0.5 * theta * ((W.array() * dK[i].array()).sum() - a.dot(dK[i] * a));
      }
    }
    (*grad)[kt] = 0.5 * params.tau2 * (Cinv.trace() - alpha.squaredNorm());
  }
  return value;
}

double nll(const MleProblem& problem, const Vector& log_params) {
  return problem.evaluate(log_params, nullptr);
}

Vector nll_grad(const MleProblem& problem, const Vector& log_params) {
  Vector g;
  problem.evaluate(log_params, &g);
  return g;
}

MleResult fit_params(const MleProblem& problem, const std::optional<KernelParams>& warm_start,
                     const MleOptions& options) {
  const auto P = static_cast<Eigen::Index>(problem.parameter_count());
  const Vector& lo = problem.lower();
  const Vector& hi = problem.upper();

  std::vector<MleStart> starts;
  if (warm_start) {
    MleStart s;
    s.start = problem.clamp(problem.pack(*warm_start));
    s.warm = true;
    starts.push_back(std::move(s));
  } else {
    // Reference start: unit-scale variance, moderate length-scales, small noise.
    const KernelParams ref = KernelParams::uniform(problem.basis(), problem.response_scale(), 0.5,
                                                   1e-2 * problem.response_scale());
    MleStart s;
    s.start = problem.clamp(problem.pack(ref));
    starts.push_back(std::move(s));
  }
  if (options.starts > 0 && P > 0) {
    const Design design = lhd(options.starts, static_cast<std::size_t>(P), options.seed,
                              DesignKind::maximin_lhd, 20);
    for (std::size_t r = 0; r < options.starts; ++r) {
      MleStart s;
      s.start = lo + (hi - lo).cwiseProduct(design.points.row(static_cast<Eigen::Index>(r)).transpose());
      starts.push_back(std::move(s));
    }
  }

  BoxOptions box;
  box.max_iterations = options.max_iterations;
  box.gradient_tol = options.gradient_tol;
  std::vector<std::size_t> evals(starts.size(), 0);
  const Objective f = [&](const Vector& x, Vector* g) { return problem.evaluate(x, g); };

  parallel_for(starts.size(), std::max<std::size_t>(options.threads, 1), [&](std::size_t i) {
    MleStart& s = starts[i];
    try {
      const BoxResult r = minimize_box(f, s.start, lo, hi, box);
      s.optimum = r.x;
      s.nll = r.f;
      s.iterations = r.iterations;
      s.converged = r.converged;
      evals[i] = r.evaluations;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
  });

  MleResult result;
  result.starts = starts;
  for (std::size_t e : evals) result.evaluations += e;
  std::size_t best = starts.size();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!starts[i].error.empty() || !std::isfinite(starts[i].nll)) continue;
    if (best == starts.size() || starts[i].nll < starts[best].nll) best = i;
  }
  if (best == starts.size()) {
    std::string msg = "maximum likelihood failed for every start:";
    for (std::size_t i = 0; i < starts.size(); ++i) msg += " [" + std::to_string(i + 1) + "] " + starts[i].error;
    throw NumericalError(msg);
  }
  result.log_params = starts[best].optimum;
  result.nll = starts[best].nll;
  result.params = problem.unpack(result.log_params);
  return result;
}

}  // namespace bagp
