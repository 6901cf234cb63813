#include "bagp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "bagp/error.hpp"

namespace bagp {

const char* to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::random_lhd:
      return "lhd";
    case DesignKind::maximin_lhd:
      return "maximin";
    case DesignKind::uniform:
      return "uniform";
  }
  return "lhd";
}

DesignKind parse_design_kind(const std::string& text) {
  if (text == "lhd" || text == "random-lhd" || text == "random") return DesignKind::random_lhd;
  if (text == "maximin" || text == "maximin-lhd") return DesignKind::maximin_lhd;
  if (text == "uniform") return DesignKind::uniform;
  throw ValidationError("unknown design kind '" + text + "'");
}

namespace {

Matrix random_lhd(std::size_t n, std::size_t D, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < D; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (static_cast<double>(perm[i]) + unif(rng)) / static_cast<double>(n);
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = std::min(v, 1.0);
    }
  }
  return pts;
}

}  // namespace

double min_squared_distance(const Matrix& points, double stop_below) {
  const Eigen::Index n = points.rows();
  const Eigen::Index D = points.cols();
  double best = std::numeric_limits<double>::infinity();
  if (n < 2) return best;
  // Sweep along the first coordinate so that far-apart pairs are skipped.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return points(a, 0) < points(b, 0); });
  for (std::size_t a = 0; a + 1 < order.size(); ++a) {
    const Eigen::Index i = order[a];
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const Eigen::Index j = order[b];
      const double dx = points(j, 0) - points(i, 0);
      double acc = dx * dx;
      if (acc >= best) break;
      for (Eigen::Index d = 1; d < D && acc < best; ++d) {
        const double t = points(i, d) - points(j, d);
        acc += t * t;
      }
      if (acc < best) {
        best = acc;
        if (best < stop_below) return best;
      }
    }
  }
  return best;
}

Design lhd(std::size_t n, std::size_t D, std::uint64_t seed, DesignKind kind,
           std::size_t restarts) {
  if (n == 0 || D == 0) throw ArgumentError("design needs n >= 1 and D >= 1");
  Design design;
  design.seed = seed;
  design.kind = kind;
  std::mt19937_64 rng(seed);
  switch (kind) {
    case DesignKind::uniform: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      design.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
      for (Eigen::Index i = 0; i < design.points.size(); ++i) design.points.data()[i] = unif(rng);
      break;
    }
    case DesignKind::random_lhd:
      design.points = random_lhd(n, D, rng);
      break;
    case DesignKind::maximin_lhd: {
      design.points = random_lhd(n, D, rng);
      double best = min_squared_distance(design.points);
      for (std::size_t r = 1; r < std::max<std::size_t>(restarts, 1); ++r) {
        Matrix candidate = random_lhd(n, D, rng);
        const double dist = min_squared_distance(candidate, best);
        if (dist > best) {
          best = dist;
          design.points = std::move(candidate);
        }
      }
      break;
    }
  }
  return design;
}

double q2(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() != y_pred.size()) throw ArgumentError("q2: length mismatch");
  if (y_true.size() < 2) throw ArgumentError("q2: at least two values are required");
  const double mean = y_true.mean();
  const double sst = (y_true.array() - mean).square().sum();
  if (!(sst > 0.0)) throw ArgumentError("q2: undefined for constant responses");
  return 1.0 - (y_true - y_pred).squaredNorm() / sst;
}

double bending_energy(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() != y_pred.size()) throw ArgumentError("bending_energy: length mismatch");
  const double energy = y_true.squaredNorm();
  if (!(energy > 0.0)) throw ArgumentError("bending_energy: undefined for zero responses");
  return (y_true - y_pred).squaredNorm() / energy;
}

double toy_block_arctan(std::size_t D, std::span<const double> x) {
  if (D == 0 || D % 2 != 0) throw ArgumentError("toy_block_arctan needs an even dimension");
  if (x.size() < D) throw ArgumentError("toy_block_arctan: point has too few coordinates");
  const double d = static_cast<double>(D / 2);
  double acc = 0.0;
  for (std::size_t j = 1; j <= D / 2; ++j) {
    const double w = 5.0 * (1.0 - static_cast<double>(j) / (d + 1.0));
    acc += std::atan(w * (x[2 * j - 2] + 2.0 * x[2 * j - 1]));
  }
  return acc;
}

double toy_6d(std::span<const double> x) {
  if (x.size() < 6) throw ArgumentError("toy_6d needs at least six coordinates");
  return 2.0 * x[0] * x[2] + std::sin(x[1] * x[3]) + std::atan(3.0 * x[4] + 5.0 * x[5]);
}

}  // namespace bagp
