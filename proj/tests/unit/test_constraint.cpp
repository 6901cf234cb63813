#include <gtest/gtest.h>

#include <bagp/constraint.hpp>
#include <bagp/error.hpp>
#include <bagp/fit.hpp>

#include "generators.hpp"

using namespace bagp;
using bagp::testing::Gen;

TEST(Monotonicity, ParseAndPrint) {
  EXPECT_EQ(parse_monotonicity("increasing"), Monotonicity::increasing);
  EXPECT_EQ(parse_monotonicity("decreasing"), Monotonicity::decreasing);
  EXPECT_EQ(parse_monotonicity("none"), Monotonicity::none);
  EXPECT_STREQ(to_string(Monotonicity::decreasing), "decreasing");
  EXPECT_THROW(parse_monotonicity("sideways"), ValidationError);
  EXPECT_EQ(default_directions(3), std::vector<Monotonicity>(3, Monotonicity::increasing));
}

TEST(Constraints, RowCountsFollowGridLines) {
  // Block {1,2} with 3 x 2 knots: 2 lines of 2 steps along x1, 3 lines of 1 step along x2.
  const BasisStructure basis(Subpartition(3, {{0, 1}}),
                             {Subdivision({0, .5, 1}), Subdivision::unit(), Subdivision()});
  const auto cons = build_monotone_constraints(basis, default_directions(3));
  EXPECT_EQ(cons.size(), 2u * 2u + 3u * 1u);
  EXPECT_EQ(cons.chains().size(), 5u);
  EXPECT_EQ(cons.block_rows(0), std::make_pair(std::size_t{0}, std::size_t{7}));
  // First chain runs along x1 at x2 = 0: local indices 0, 2, 4.
  EXPECT_EQ(cons.chains().front(), (std::vector<std::size_t>{0, 2, 4}));
  const auto none = build_monotone_constraints(
      basis, {Monotonicity::none, Monotonicity::increasing, Monotonicity::none});
  EXPECT_EQ(none.size(), 3u);
  EXPECT_THROW(build_monotone_constraints(basis, default_directions(2)), ArgumentError);
}

TEST(Constraints, MatrixApplyAndViolation) {
  const BasisStructure basis(Subpartition(1, {{0}}), {Subdivision({0, .5, 1})});
  const auto cons = build_monotone_constraints(basis, default_directions(1));
  Vector xi(3);
  xi << 0.0, 2.0, 1.0;
  const Vector r = cons.apply(xi);
  EXPECT_DOUBLE_EQ(r[0], -2.0);
  EXPECT_DOUBLE_EQ(r[1], 1.0);
  EXPECT_DOUBLE_EQ(cons.max_violation(xi), 1.0);
  EXPECT_LT((Vector(cons.matrix() * xi) - r).cwiseAbs().maxCoeff(), 1e-15);
  const auto dec = build_monotone_constraints(basis, {Monotonicity::decreasing});
  EXPECT_DOUBLE_EQ(dec.max_violation(xi), 2.0);
}

TEST(Constraints, KnotMonotonicityImpliesMonotonePredictorProperty) {
  Gen g(42);
  for (int trial = 0; trial < 60; ++trial) {
    const BasisStructure basis = g.basis(3, 2, 4, 0.0);
    std::vector<Monotonicity> dirs;
    for (std::size_t v = 0; v < 3; ++v) {
      dirs.push_back(g.coin() ? Monotonicity::increasing : Monotonicity::decreasing);
    }
    const auto cons = build_monotone_constraints(basis, dirs);
    // Knot values of a random function monotone in the requested directions.
    Vector xi(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.block_count(); ++j) {
      const auto& vars = basis.block_variables(j);
      std::vector<double> a(vars.size());
      for (auto& w : a) w = g.uniform(0.0, 2.0);
      const double b = g.uniform(0.0, 2.0);
      for (std::size_t l = 0; l < basis.block_size(j); ++l) {
        const auto t = basis.knot_point(j, basis.multi_index(j, l));
        double v = 0.0;
        double prod = b;
        for (std::size_t c = 0; c < vars.size(); ++c) {
          const double u = dirs[vars[c]] == Monotonicity::increasing ? t[c] : 1.0 - t[c];
          v += a[c] * u * u * u;
          prod *= u;
        }
        xi[static_cast<Eigen::Index>(basis.block_offset(j) + l)] = v + prod;
      }
    }
    ASSERT_LE(cons.max_violation(xi), 0.0);
    for (int line = 0; line < 10; ++line) {
      auto x = g.point(3);
      const std::size_t axis = g.index(3);
      double prev = -std::numeric_limits<double>::infinity();
      const double sign = dirs[axis] == Monotonicity::increasing ? 1.0 : -1.0;
      for (int s = 0; s <= 50; ++s) {
        x[axis] = s / 50.0;
        const double v = sign * basis.phi(x).dot(xi);
        EXPECT_GE(v, prev - 1e-12);
        prev = v;
      }
    }
  }
}

TEST(IsotonicSweeps, ProducesFeasiblePoint) {
  const BasisStructure basis(Subpartition(1, {{0}}), {Subdivision({0, .25, .5, .75, 1})});
  const auto cons = build_monotone_constraints(basis, default_directions(1));
  Vector v(5);
  v << 3, 1, 2, 0, 4;
  const Vector out = isotonic_sweeps(cons, v);
  EXPECT_LE(cons.max_violation(out), 0.0);
  // Pool-adjacent-violators on a single chain is the Euclidean projection.
  Vector expected(5);
  expected << 1.5, 1.5, 1.5, 1.5, 4;
  EXPECT_LT((out - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MapEstimate, FeasibleAndMonotoneOnData) {
  Gen g(6);
  for (int trial = 0; trial < 10; ++trial) {
    const BasisStructure basis = g.basis(2, 2, 5, 0.0);
    const Dataset data = g.dataset(basis, 15);
    FitOptions opts;
    opts.estimate_params = false;
    opts.params = g.params(basis, 1e-3, 1e-2);
    const FittedModel model = fit_model(basis, data, default_directions(2), opts);
    EXPECT_LE(model.constraints.max_violation(model.xi), 1e-9);
    EXPECT_LE(model.diagnostics.kkt.max(), 1e-8);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      auto x = g.point(2);
      double prev = -std::numeric_limits<double>::infinity();
      for (int s = 0; s <= 100; ++s) {
        x[axis] = s / 100.0;
        const double v = predict(model, x);
        EXPECT_GE(v - prev, -1e-9);
        prev = v;
      }
    }
  }
}

TEST(BlockPredictors, CenteredAndSumToPredictor) {
  Gen g(19);
  const BasisStructure basis = g.basis(4, 2, 3, 0.0);
  FittedModel model;
  model.basis = basis;
  model.xi = g.normals(basis.size());
  const BlockPredictors bp(model);
  for (int p = 0; p < 20; ++p) {
    const auto x = g.point(4);
    double total = bp.constant();
    for (std::size_t j = 0; j < bp.size(); ++j) total += bp(j, x);
    EXPECT_NEAR(total, predict(model, x), 1e-12);
  }
  EXPECT_NEAR(bp.constant(), [&] {
    double s = 0.0;
    for (std::size_t j = 0; j < basis.block_count(); ++j) {
      s += basis.block_mass(j).dot(model.xi.segment(static_cast<Eigen::Index>(basis.block_offset(j)),
                                                    static_cast<Eigen::Index>(basis.block_size(j))));
    }
    return s;
  }(), 1e-14);
}

TEST(Normalization, MinMaxWithClamp) {
  Normalization n{{0.0, 10.0}, {2.0, 10.0}};
  const auto a = n.apply(std::vector<double>{1.0, 10.0}, false);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);  // zero-width column maps to the centre
  const auto b = n.apply(std::vector<double>{3.0, 10.0}, true);
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  EXPECT_DOUBLE_EQ(n.apply(std::vector<double>{3.0, 10.0}, false)[0], 1.5);
  EXPECT_THROW((void)n.apply(std::vector<double>{1.0}, false), ValidationError);
}
