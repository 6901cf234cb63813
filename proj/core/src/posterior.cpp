#include "bagp/posterior.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "bagp/error.hpp"
#include "bagp/log.hpp"

namespace bagp {

Dataset::Dataset(Matrix X, Vector y) : X_(std::move(X)), y_(std::move(y)) {
  if (y_.size() == 0) throw ValidationError("dataset is empty");
  if (X_.rows() != y_.size()) throw ValidationError("X and y have different row counts");
  if (X_.cols() == 0) throw ValidationError("dataset has no input columns");
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    if (!std::isfinite(y_[i])) {
      throw ValidationError("response in row " + std::to_string(i + 1) + " is not finite");
    }
    for (Eigen::Index d = 0; d < X_.cols(); ++d) {
      const double v = X_(i, d);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        std::ostringstream msg;
        msg << "input x" << d + 1 << " in row " << i + 1 << " is outside [0,1]: " << v;
        throw ValidationError(msg.str());
      }
    }
  }
}

std::span<const double> Dataset::row(std::size_t i, std::vector<double>& buffer) const {
  buffer.resize(dimension());
  for (std::size_t d = 0; d < dimension(); ++d) {
    buffer[d] = X_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
  }
  return buffer;
}

double Dataset::variance() const {
  const double mean = y_.mean();
  return (y_.array() - mean).square().mean();
}

double noise_floor(const Vector& y) {
  if (y.size() == 0) return 1e-8;
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  if (var > 0.0) return 1e-8 * var;
  const double energy = y.squaredNorm() / static_cast<double>(y.size());
  return energy > 0.0 ? 1e-8 * energy : 1e-8;
}

Matrix Posterior::sigma() const {
  const auto m = static_cast<Eigen::Index>(size());
  return sigma_inv_llt.solve(Matrix::Identity(m, m));
}

namespace {

double clamp_tau2(const Dataset& data, double tau2, bool& clamped) {
  if (!std::isfinite(tau2)) throw ArgumentError("noise variance must be finite");
  const double floor = noise_floor(data.y());
  clamped = tau2 < floor;
  // Values within rounding of the floor come from log-space optimization at its bound.
  if (clamped && tau2 >= floor * (1.0 - 1e-9)) {
    clamped = false;
    return floor;
  }
  if (clamped) {
    std::ostringstream msg;
    msg << "noise variance " << tau2 << " below floor, clamped to " << floor;
    log::warn(msg.str());
    return floor;
  }
  return tau2;
}

void check_shapes(const BasisStructure& basis, const PriorCov& prior, const Dataset& data) {
  if (prior.size() != basis.size()) throw ArgumentError("prior does not match the basis");
  if (data.dimension() != basis.dimension()) {
    throw ArgumentError("dataset dimension does not match the basis");
  }
}

}  // namespace

Posterior condition(const BasisStructure& basis, const PriorCov& prior, const Dataset& data,
                    double tau2, MeanPath path) {
  check_shapes(basis, prior, data);
  Posterior post;
  post.tau2 = clamp_tau2(data, tau2, post.tau2_clamped);
  const auto L = static_cast<Eigen::Index>(basis.size());
  const auto n = static_cast<Eigen::Index>(data.size());

  if (L == 0) {
    post.mu = Vector::Zero(0);
    post.sigma_inv = Matrix::Zero(0, 0);
    post.sigma_inv_llt.compute(post.sigma_inv);
    post.path_used = MeanPath::direct;
    return post;
  }

  const Matrix phi = basis.design_matrix(data.X());  // L x n

  post.sigma_inv = phi * phi.transpose() / post.tau2;
  for (std::size_t j = 0; j < prior.block_count(); ++j) {
    const auto off = static_cast<Eigen::Index>(prior.block_offset(j));
    const Matrix inv = prior.block_inverse(j);
    post.sigma_inv.block(off, off, inv.rows(), inv.cols()) += inv;
  }
  post.sigma_inv = 0.5 * (post.sigma_inv + post.sigma_inv.transpose()).eval();
  post.sigma_inv_llt.compute(post.sigma_inv);
  if (post.sigma_inv_llt.info() != Eigen::Success) {
    throw NumericalError("posterior precision matrix is not positive definite");
  }

  if (path == MeanPath::automatic) path = n <= L ? MeanPath::direct : MeanPath::woodbury;
  post.path_used = path;

  if (path == MeanPath::direct) {
    Matrix kphi(L, n);
    for (Eigen::Index i = 0; i < n; ++i) kphi.col(i) = prior.multiply(phi.col(i));
    Matrix c = phi.transpose() * kphi;
    c.diagonal().array() += post.tau2;
    Eigen::LLT<Matrix> c_llt(c);
    if (c_llt.info() != Eigen::Success) {
      throw NumericalError("observation covariance is not positive definite");
    }
    post.mu = kphi * c_llt.solve(data.y());
  } else {
    post.mu = post.sigma_inv_llt.solve(phi * data.y() / post.tau2);
  }
  return post;
}

Posterior condition_direct(const BasisStructure& basis, const PriorCov& prior,
                           const Dataset& data, double tau2) {
  check_shapes(basis, prior, data);
  Posterior post;
  post.tau2 = clamp_tau2(data, tau2, post.tau2_clamped);
  post.path_used = MeanPath::direct;
  const Matrix phi = basis.design_matrix(data.X());
  const Matrix k = prior.dense();
  const Matrix kphi = k * phi;
  Matrix c = phi.transpose() * kphi;
  c.diagonal().array() += post.tau2;
  Eigen::LLT<Matrix> c_llt(c);
  if (c_llt.info() != Eigen::Success) {
    throw NumericalError("observation covariance is not positive definite");
  }
  post.mu = kphi * c_llt.solve(data.y());
  // K - K Phi C^-1 Phi^T K in Joseph form, (I - G Phi^T) K (I - G Phi^T)^T + tau2 G G^T
  // with gain G = K Phi C^-1, which avoids the cancellation of the plain difference.
  const Matrix gain = c_llt.solve(kphi.transpose()).transpose();
  Matrix m = -gain * phi.transpose();
  m.diagonal().array() += 1.0;
  Matrix sigma = m * k * m.transpose() + post.tau2 * gain * gain.transpose();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  post.sigma_inv = sigma.inverse();
  post.sigma_inv = 0.5 * (post.sigma_inv + post.sigma_inv.transpose()).eval();
  post.sigma_inv_llt.compute(post.sigma_inv);
  if (post.sigma_inv_llt.info() != Eigen::Success) {
    throw NumericalError("direct posterior covariance is not positive definite");
  }
  return post;
}

double posterior_predict_mean(const BasisStructure& basis, const Posterior& post,
                              std::span<const double> x) {
  return basis.evaluate(std::span<const double>(post.mu.data(), post.size()), x);
}

}  // namespace bagp
