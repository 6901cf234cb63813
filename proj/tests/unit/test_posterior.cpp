#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <bagp/error.hpp>
#include <bagp/posterior.hpp>

#include "generators.hpp"

using namespace bagp;
using bagp::testing::Gen;

namespace {

// D=3, blocks {1,3} and {2}; values frozen from tests/oracles/derive_values.py.
struct MultiBlock {
  BasisStructure basis{Subpartition(3, {{0, 2}, {1}}),
                       {Subdivision({0, .5, 1}), Subdivision({0, .3, 1}), Subdivision::unit()}};
  KernelParams params;
  Dataset data;
  MultiBlock() {
    params.blocks = {{0.7, {0.4, 0.8}}, {1.3, {0.6}}};
    params.tau2 = 0.05;
    Matrix X(5, 3);
    X << 0.1, 0.2, 0.3, 0.5, 0.9, 0.7, 0.8, 0.4, 0.1, 0.3, 0.6, 0.95, 0.95, 0.05, 0.5;
    Vector y(5);
    y << 0.3, 1.1, 0.9, 0.8, 1.2;
    data = Dataset(X, y);
  }
};

}  // namespace

TEST(Dataset, Validation) {
  Matrix X(2, 1);
  X << 0.1, 0.2;
  EXPECT_NO_THROW(Dataset(X, Vector::Ones(2)));
  EXPECT_THROW(Dataset(X, Vector::Ones(3)), ValidationError);
  EXPECT_THROW(Dataset(Matrix(0, 1), Vector(0)), ValidationError);
  Matrix bad = X;
  bad(1, 0) = 1.2;
  EXPECT_THROW(Dataset(bad, Vector::Ones(2)), ValidationError);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(Dataset(bad, Vector::Ones(2)), ValidationError);
  Vector y = Vector::Ones(2);
  y[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Dataset(X, y), ValidationError);
}

TEST(Dataset, VarianceUsesDenominatorN) {
  Matrix X(2, 1);
  X << 0.1, 0.2;
  Vector y(2);
  y << 1.0, 3.0;
  EXPECT_DOUBLE_EQ(Dataset(X, y).variance(), 1.0);
}

TEST(NoiseFloor, RelativeToVarianceWithFallbacks) {
  Vector y(2);
  y << 1.0, 3.0;
  EXPECT_DOUBLE_EQ(noise_floor(y), 1e-8);
  y << 2.0, 2.0;
  EXPECT_DOUBLE_EQ(noise_floor(y), 4e-8);
  y << 0.0, 0.0;
  EXPECT_DOUBLE_EQ(noise_floor(y), 1e-8);
}

TEST(Condition, ScalarOracle) {
  // K = 1, phi = 1, tau2 = 1, y = 2 -> mu = 1, Sigma^-1 = 2.
  const BasisStructure basis(Subpartition(1, {{0}}), {Subdivision::unit()});
  KernelParams p = KernelParams::uniform(basis, 1.0, 0.5, 1.0);
  Matrix X(1, 1);
  X << 0.0;
  Vector y(1);
  y << 2.0;
  const Dataset data(X, y);
  const PriorCov prior(basis, p);
  for (MeanPath path : {MeanPath::direct, MeanPath::woodbury}) {
    const Posterior post = condition(basis, prior, data, 1.0, path);
    // The knot at 1 is correlated with the observed knot at 0.
    const double r = matern52(0.5, 0.0, 1.0);
    EXPECT_NEAR(post.mu[0], 1.0, 1e-9);
    EXPECT_NEAR(post.mu[1], r, 1e-9);
  }
  // Single-knot marginal: Sigma^-1 restricted to the observed coordinate is
  // K^-1 + 1/tau2 in the fully decorrelated limit.
  KernelParams q = KernelParams::uniform(basis, 1.0, 1e-2, 1.0);
  const Posterior post = condition(basis, PriorCov(basis, q), data, 1.0);
  EXPECT_NEAR(post.mu[0], 1.0, 1e-9);
  EXPECT_NEAR(post.sigma_inv(0, 0), 2.0, 1e-6);
}

TEST(Condition, MultiBlockOracle) {
  const MultiBlock mb;
  const std::vector<double> expected{-0.3432789033950337, -0.11867279384919029, 0.19270476717082258,
                                     0.4709787612251678,  0.51408342614350644,  0.6539697710247907,
                                     0.5965381636972229,  0.47378005372540399,  0.71032825972666425};
  const PriorCov prior(mb.basis, mb.params);
  for (MeanPath path : {MeanPath::automatic, MeanPath::direct, MeanPath::woodbury}) {
    const Posterior post = condition(mb.basis, prior, mb.data, mb.params.tau2, path);
    ASSERT_EQ(post.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_NEAR(post.mu[static_cast<Eigen::Index>(i)], expected[i], 1e-9);
    }
  }
}

TEST(Condition, AutomaticPathFollowsSizes) {
  const MultiBlock mb;  // n = 5 <= |L| = 9
  const PriorCov prior(mb.basis, mb.params);
  EXPECT_EQ(condition(mb.basis, prior, mb.data, 0.05).path_used, MeanPath::direct);
  Gen g(4);
  const Dataset big = g.dataset(mb.basis, 20);
  EXPECT_EQ(condition(mb.basis, prior, big, 0.05).path_used, MeanPath::woodbury);
}

TEST(Condition, WoodburyMatchesDenseFormulaProperty) {
  Gen g(31);
  for (int trial = 0; trial < 30; ++trial) {
    const BasisStructure basis = g.basis(1 + g.index(3), 2, 4, 0.0);
    const KernelParams params = g.params(basis, 0.01, 0.3);
    const Dataset data = g.dataset(basis, 2 + g.index(15));
    const PriorCov prior(basis, params);
    const Posterior ref = condition_direct(basis, prior, data, params.tau2);
    const Posterior w = condition(basis, prior, data, params.tau2, MeanPath::woodbury);
    const Posterior d = condition(basis, prior, data, params.tau2, MeanPath::direct);
    const double scale_mu = std::max(1.0, ref.mu.cwiseAbs().maxCoeff());
    EXPECT_LT((w.mu - ref.mu).cwiseAbs().maxCoeff() / scale_mu, 1e-8);
    EXPECT_LT((d.mu - ref.mu).cwiseAbs().maxCoeff() / scale_mu, 1e-8);
    EXPECT_LT((w.sigma_inv - d.sigma_inv).cwiseAbs().maxCoeff(), 1e-12 * d.sigma_inv.cwiseAbs().maxCoeff());
  }
}

TEST(Condition, NoiseClampedToFloor) {
  const MultiBlock mb;
  const PriorCov prior(mb.basis, mb.params);
  const Posterior post = condition(mb.basis, prior, mb.data, 0.0);
  EXPECT_TRUE(post.tau2_clamped);
  EXPECT_DOUBLE_EQ(post.tau2, noise_floor(mb.data.y()));
  EXPECT_THROW((void)condition(mb.basis, prior, mb.data, std::nan("")), ArgumentError);
}

TEST(Condition, PredictMeanIsPhiTransposeMu) {
  const MultiBlock mb;
  const PriorCov prior(mb.basis, mb.params);
  const Posterior post = condition(mb.basis, prior, mb.data, mb.params.tau2);
  const std::vector<double> x{0.25, 0.5, 0.75};
  EXPECT_NEAR(posterior_predict_mean(mb.basis, post, x), mb.basis.phi(x).dot(post.mu), 1e-14);
}
