#pragma once

// Prediction metrics, Latin hypercube designs and monotone test functions.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "bagp/basis.hpp"

namespace bagp {

enum class DesignKind { random_lhd, maximin_lhd, uniform };

const char* to_string(DesignKind kind);
DesignKind parse_design_kind(const std::string& text);

struct Design {
  /// n x D points in [0,1]^D.
  Matrix points;
  std::uint64_t seed = 0;
  DesignKind kind = DesignKind::random_lhd;
};

/// Latin hypercube (or uniform) design. Column values fall one per stratum
/// [(k-1)/n, k/n) with uniform jitter; maximin keeps the best of `restarts`
/// random designs by minimum pairwise distance.
Design lhd(std::size_t n, std::size_t D, std::uint64_t seed,
           DesignKind kind = DesignKind::random_lhd, std::size_t restarts = 50);

/// Smallest squared Euclidean distance between two rows. Returns early with
/// some value below `stop_below` as soon as one pair is that close.
double min_squared_distance(const Matrix& points,
                            double stop_below = -std::numeric_limits<double>::infinity());

/// 1 - sum (y - yhat)^2 / sum (y - mean y)^2. Throws for constant y.
double q2(const Vector& y_true, const Vector& y_pred);
/// sum (y - yhat)^2 / sum y^2. Throws for y identically zero.
double bending_energy(const Vector& y_true, const Vector& y_pred);

/// sum_{j=1}^{D/2} atan(5 (1 - j/(d+1)) (x_{2j-1} + 2 x_{2j})) with d = D/2.
double toy_block_arctan(std::size_t D, std::span<const double> x);
/// 2 x1 x3 + sin(x2 x4) + atan(3 x5 + 5 x6); later coordinates are ignored.
double toy_6d(std::span<const double> x);

}  // namespace bagp
