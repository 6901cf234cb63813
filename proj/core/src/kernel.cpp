#include "bagp/kernel.hpp"

#include <cmath>
#include <string>

#include "bagp/error.hpp"

namespace bagp {

namespace {

const double kSqrt5 = std::sqrt(5.0);

void check_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw ArgumentError("length-scale must be positive and finite");
  }
}

}  // namespace

double matern52(double theta, double x, double x2) {
  check_theta(theta);
  const double a = kSqrt5 * std::abs(x - x2) / theta;
  return (1.0 + a + a * a / 3.0) * std::exp(-a);
}

double matern52_dtheta(double theta, double h) {
  check_theta(theta);
  const double a = kSqrt5 * std::abs(h) / theta;
  return a * a * (1.0 + a) * std::exp(-a) / (3.0 * theta);
}

double correlation(Correlation kind, double theta, double x, double x2) {
  switch (kind) {
    case Correlation::matern52:
      return matern52(theta, x, x2);
  }
  throw ArgumentError("unknown correlation kind");
}

double correlation_dtheta(Correlation kind, double theta, double h) {
  switch (kind) {
    case Correlation::matern52:
      return matern52_dtheta(theta, h);
  }
  throw ArgumentError("unknown correlation kind");
}

KernelParams KernelParams::uniform(const BasisStructure& basis, double sigma2, double theta,
                                   double tau2) {
  KernelParams p;
  p.tau2 = tau2;
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    p.blocks.push_back({sigma2, std::vector<double>(basis.block_variables(j).size(), theta)});
  }
  return p;
}

void KernelParams::validate(const BasisStructure& basis) const {
  if (blocks.size() != basis.block_count()) {
    throw ArgumentError("kernel parameters have " + std::to_string(blocks.size()) +
                        " blocks, basis has " + std::to_string(basis.block_count()));
  }
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (!(blocks[j].sigma2 > 0.0) || !std::isfinite(blocks[j].sigma2)) {
      throw ArgumentError("block variance must be positive and finite");
    }
    if (blocks[j].thetas.size() != basis.block_variables(j).size()) {
      throw ArgumentError("one length-scale per block variable is required");
    }
    for (double t : blocks[j].thetas) check_theta(t);
  }
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) {
    throw ArgumentError("noise variance must be nonnegative and finite");
  }
}

double block_kernel(const BlockParams& params, std::span<const double> xb,
                    std::span<const double> xb2, Correlation kind) {
  if (xb.size() != params.thetas.size() || xb2.size() != params.thetas.size()) {
    throw ArgumentError("block_kernel: point arity does not match the block");
  }
  double k = params.sigma2;
  for (std::size_t i = 0; i < xb.size(); ++i) k *= correlation(kind, params.thetas[i], xb[i], xb2[i]);
  return k;
}

namespace {

// Per-variable correlation matrices between the knots of each block variable.
std::vector<Matrix> axis_correlations(const BasisStructure& basis, std::size_t j,
                                      const BlockParams& params, Correlation kind) {
  const auto& vars = basis.block_variables(j);
  if (params.thetas.size() != vars.size()) {
    throw ArgumentError("one length-scale per block variable is required");
  }
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const Subdivision& s = basis.subdivision(vars[k]);
    const auto m = static_cast<Eigen::Index>(s.size());
    Matrix r(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) {
        r(a, b) = r(b, a) = correlation(kind, params.thetas[k], s[static_cast<std::size_t>(a)],
                                        s[static_cast<std::size_t>(b)]);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Kronecker product in block layout order (last variable fastest).
Matrix kron_all(const std::vector<Matrix>& factors) {
  Matrix out = Matrix::Ones(1, 1);
  for (const Matrix& f : factors) {
    Matrix next(out.rows() * f.rows(), out.cols() * f.cols());
    for (Eigen::Index a = 0; a < out.rows(); ++a) {
      for (Eigen::Index b = 0; b < out.cols(); ++b) {
        next.block(a * f.rows(), b * f.cols(), f.rows(), f.cols()) = out(a, b) * f;
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

Matrix block_knot_covariance(const BasisStructure& basis, std::size_t j, const BlockParams& params,
                             Correlation kind) {
  return params.sigma2 * kron_all(axis_correlations(basis, j, params, kind));
}

std::vector<Matrix> block_knot_covariance_dtheta(const BasisStructure& basis, std::size_t j,
                                                 const BlockParams& params, Correlation kind) {
  std::vector<Matrix> corr = axis_correlations(basis, j, params, kind);
  const auto& vars = basis.block_variables(j);
  std::vector<Matrix> grads;
  grads.reserve(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const Subdivision& s = basis.subdivision(vars[k]);
    const auto m = static_cast<Eigen::Index>(s.size());
    Matrix dr(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        dr(a, b) = correlation_dtheta(kind, params.thetas[k],
                                      s[static_cast<std::size_t>(a)] - s[static_cast<std::size_t>(b)]);
      }
    }
    std::vector<Matrix> factors = corr;
    factors[k] = std::move(dr);
    grads.push_back(params.sigma2 * kron_all(factors));
  }
  return grads;
}

PriorCov::PriorCov(const BasisStructure& basis, const KernelParams& params) {
  params.validate(basis);
  const std::size_t B = basis.block_count();
  offsets_.resize(B);
  blocks_.reserve(B);
  llt_.resize(B);
  jitter_.assign(B, 0.0);
  for (std::size_t j = 0; j < B; ++j) {
    offsets_[j] = basis.block_offset(j);
    const BlockParams& bp = params.blocks[j];
    const Matrix base = block_knot_covariance(basis, j, bp, params.kind);
    double rel = kBaseJitter;
    bool ok = false;
    Matrix k;
    for (int attempt = 0; attempt <= kMaxEscalations; ++attempt, rel *= kJitterGrowth) {
      k = base;
      k.diagonal().array() += rel * bp.sigma2;
      llt_[j].compute(k);
      if (llt_[j].info() == Eigen::Success) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw NumericalError("prior covariance of block " + std::to_string(j + 1) +
                           " is not positive definite after jitter escalation");
    }
    jitter_[j] = rel;
    blocks_.push_back(std::move(k));
  }
  size_ = basis.size();
}

Matrix PriorCov::dense() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(size_));
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const auto off = static_cast<Eigen::Index>(offsets_[j]);
    out.block(off, off, blocks_[j].rows(), blocks_[j].cols()) = blocks_[j];
  }
  return out;
}

Matrix PriorCov::block_inverse(std::size_t j) const {
  const auto m = blocks_[j].rows();
  return llt_[j].solve(Matrix::Identity(m, m));
}

double PriorCov::log_det() const {
  double acc = 0.0;
  for (const auto& f : llt_) acc += 2.0 * f.matrixLLT().diagonal().array().log().sum();
  return acc;
}

Vector PriorCov::multiply(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != size_) throw ArgumentError("vector length mismatch");
  Vector out(v.size());
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const auto off = static_cast<Eigen::Index>(offsets_[j]);
    const auto m = blocks_[j].rows();
    out.segment(off, m).noalias() = blocks_[j] * v.segment(off, m);
  }
  return out;
}

}  // namespace bagp
