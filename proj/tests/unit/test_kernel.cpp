#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Dense>

#include <bagp/error.hpp>
#include <bagp/kernel.hpp>

#include "generators.hpp"

using namespace bagp;
using bagp::testing::Gen;

TEST(Matern52, FrozenValue) {
  EXPECT_NEAR(matern52(1.0, 0.0, 1.0), 0.52399410883182029, 1e-15);
  EXPECT_DOUBLE_EQ(matern52(0.3, 0.4, 0.4), 1.0);
  EXPECT_THROW(matern52(0.0, 0.1, 0.2), ArgumentError);
  EXPECT_THROW(matern52(-1.0, 0.1, 0.2), ArgumentError);
}

TEST(Matern52, SymmetricDecreasingProperty) {
  Gen g(2);
  for (int i = 0; i < 200; ++i) {
    const double theta = g.uniform(0.05, 3.0);
    const double x = g.uniform();
    const double y = g.uniform();
    EXPECT_DOUBLE_EQ(matern52(theta, x, y), matern52(theta, y, x));
    const double h = std::abs(x - y);
    if (h > 1e-6) {
      EXPECT_LT(matern52(theta, 0.0, h), matern52(theta, 0.0, h * 0.5));
      EXPECT_LT(matern52(theta, 0.0, h), matern52(theta * 1.5, 0.0, h));
    }
  }
}

TEST(Matern52, DerivativeMatchesFiniteDifferences) {
  Gen g(4);
  for (int i = 0; i < 100; ++i) {
    const double theta = g.uniform(0.05, 3.0);
    const double h = g.uniform();
    const double e = 1e-6 * theta;
    const double fd = (matern52(theta + e, 0.0, h) - matern52(theta - e, 0.0, h)) / (2 * e);
    EXPECT_NEAR(matern52_dtheta(theta, h), fd, 1e-7 * std::max(1.0, std::abs(fd)));
  }
}

TEST(BlockKernel, ProductOfScalarCorrelations) {
  const BlockParams p{1.7, {0.3, 0.8}};
  const std::vector<double> a{0.1, 0.9};
  const std::vector<double> b{0.4, 0.2};
  const double expected = 1.7 * matern52(0.3, 0.1, 0.4) * matern52(0.8, 0.9, 0.2);
  EXPECT_NEAR(block_kernel(p, a, b), expected, 1e-15);
  EXPECT_THROW(block_kernel(p, std::vector<double>{0.1}, b), ArgumentError);
}

TEST(KnotCovariance, MatchesKernelAtKnots) {
  const BasisStructure basis(Subpartition(2, {{0, 1}}), {Subdivision({0, .4, 1}), Subdivision::unit()});
  const BlockParams p{0.9, {0.5, 0.7}};
  const Matrix K = block_knot_covariance(basis, 0, p);
  ASSERT_EQ(K.rows(), 6);
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      const auto xa = basis.knot_point(0, basis.multi_index(0, a));
      const auto xb = basis.knot_point(0, basis.multi_index(0, b));
      EXPECT_NEAR(K(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)),
                  block_kernel(p, xa, xb), 1e-15);
    }
  }
}

TEST(KnotCovariance, ThetaDerivativesMatchFiniteDifferences) {
  Gen g(9);
  for (int trial = 0; trial < 20; ++trial) {
    const BasisStructure basis = g.basis(3, 3, 4, 0.0);
    const KernelParams params = g.params(basis);
    for (std::size_t j = 0; j < basis.block_count(); ++j) {
      const auto dK = block_knot_covariance_dtheta(basis, j, params.blocks[j]);
      for (std::size_t i = 0; i < dK.size(); ++i) {
        BlockParams up = params.blocks[j];
        BlockParams dn = params.blocks[j];
        const double e = 1e-6 * up.thetas[i];
        up.thetas[i] += e;
        dn.thetas[i] -= e;
        const Matrix fd = (block_knot_covariance(basis, j, up) - block_knot_covariance(basis, j, dn)) / (2 * e);
        EXPECT_LT((fd - dK[i]).cwiseAbs().maxCoeff(), 1e-7);
      }
    }
  }
}

TEST(KernelParams, Validation) {
  const BasisStructure basis(Subpartition(2, {{0}, {1}}), {Subdivision::unit(), Subdivision::unit()});
  KernelParams ok = KernelParams::uniform(basis, 1.0, 0.5, 0.01);
  EXPECT_NO_THROW(ok.validate(basis));
  KernelParams bad = ok;
  bad.blocks.pop_back();
  EXPECT_THROW(bad.validate(basis), ArgumentError);
  bad = ok;
  bad.blocks[0].sigma2 = 0.0;
  EXPECT_THROW(bad.validate(basis), ArgumentError);
  bad = ok;
  bad.blocks[1].thetas[0] = -0.1;
  EXPECT_THROW(bad.validate(basis), ArgumentError);
  bad = ok;
  bad.tau2 = std::nan("");
  EXPECT_THROW(bad.validate(basis), ArgumentError);
}

TEST(PriorCov, BlockDiagonalWithBaseJitter) {
  Gen g(1);
  const BasisStructure basis = g.basis(4, 2, 4, 0.0);
  const KernelParams params = g.params(basis);
  const PriorCov prior(basis, params);
  const Matrix dense = prior.dense();
  ASSERT_EQ(prior.size(), basis.size());
  double logdet = 0.0;
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    EXPECT_DOUBLE_EQ(prior.jitter(j), PriorCov::kBaseJitter);
    Matrix expected = block_knot_covariance(basis, j, params.blocks[j]);
    expected.diagonal().array() += PriorCov::kBaseJitter * params.blocks[j].sigma2;
    EXPECT_LT((prior.block(j) - expected).cwiseAbs().maxCoeff(), 1e-15);
    logdet += std::log(expected.determinant());
  }
  EXPECT_NEAR(prior.log_det(), logdet, 1e-8 * std::abs(logdet) + 1e-8);
  const Vector v = g.normals(basis.size());
  EXPECT_LT((prior.multiply(v) - dense * v).cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    const Matrix I = prior.block(j) * prior.block_inverse(j);
    EXPECT_LT((I - Matrix::Identity(I.rows(), I.cols())).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(PriorCov, JitterEscalatesOnNearSingularBlocks) {
  // Very long length-scale on a fine grid: the correlation matrix is
  // numerically singular and needs more than the base jitter.
  std::vector<double> knots;
  for (int k = 0; k <= 40; ++k) knots.push_back(k / 40.0);
  const BasisStructure basis(Subpartition(1, {{0}}), {Subdivision(knots)});
  const PriorCov prior(basis, KernelParams::uniform(basis, 1.0, 10.0, 0.0));
  EXPECT_GE(prior.jitter(0), PriorCov::kBaseJitter);
  EXPECT_LE(prior.jitter(0), PriorCov::kBaseJitter * PriorCov::kJitterGrowth * PriorCov::kJitterGrowth);
}
