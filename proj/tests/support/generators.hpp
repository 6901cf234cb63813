#pragma once

// Hand-rolled random generators for property tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <bagp/basis.hpp>
#include <bagp/constraint.hpp>
#include <bagp/kernel.hpp>
#include <bagp/maxmod.hpp>
#include <bagp/posterior.hpp>

namespace bagp::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  bool coin(double p = 0.5) { return uniform() < p; }

  Vector normals(std::size_t n) {
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = normal();
    return v;
  }

  Matrix points(std::size_t n, std::size_t D) {
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = uniform();
    return X;
  }

  std::vector<double> point(std::size_t D) {
    std::vector<double> x(D);
    for (auto& v : x) v = uniform();
    return x;
  }

  /// Knots 0 = t_0 < ... < t_{m-1} = 1 with random interior positions.
  Subdivision subdivision(std::size_t m) {
    std::vector<double> k{0.0, 1.0};
    while (k.size() < m) {
      const double t = uniform(0.02, 0.98);
      if (std::all_of(k.begin(), k.end(), [&](double u) { return std::abs(u - t) > 0.01; })) {
        k.push_back(t);
      }
    }
    std::sort(k.begin(), k.end());
    return Subdivision(k);
  }

  /// Random basis over D variables: each variable is inactive with
  /// probability p_inactive, blocks have at most max_block variables and each
  /// active variable gets between 2 and max_knots knots.
  BasisStructure basis(std::size_t D, std::size_t max_block, std::size_t max_knots,
                       double p_inactive = 0.2) {
    std::vector<std::size_t> vars;
    for (std::size_t v = 0; v < D; ++v) {
      if (!coin(p_inactive)) vars.push_back(v);
    }
    if (vars.empty()) vars.push_back(index(D));
    std::shuffle(vars.begin(), vars.end(), rng_);
    std::vector<Subpartition::Block> blocks;
    std::size_t pos = 0;
    while (pos < vars.size()) {
      const std::size_t len = std::min(vars.size() - pos, 1 + index(max_block));
      blocks.emplace_back(vars.begin() + static_cast<std::ptrdiff_t>(pos),
                          vars.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
    std::vector<Subdivision> subs(D);
    for (std::size_t v : vars) subs[v] = subdivision(2 + index(max_knots - 1));
    return BasisStructure(Subpartition(D, blocks), subs);
  }

  /// A random admissible move from `basis`.
  Move move(const BasisStructure& basis, std::size_t merge_cap = 4) {
    const Subpartition& p = basis.partition();
    std::vector<Move> options;
    for (std::size_t v = 0; v < basis.dimension(); ++v) {
      Move m;
      if (!p.is_active(v)) {
        m.kind = MoveKind::activate;
        m.variable = v;
        options.push_back(m);
      } else {
        for (int tries = 0; tries < 20; ++tries) {
          const double t = uniform(0.01, 0.99);
          if (basis.subdivision(v).can_insert(t)) {
            m.kind = MoveKind::refine;
            m.variable = v;
            m.knot = t;
            options.push_back(m);
            break;
          }
        }
      }
    }
    for (std::size_t a = 0; a < p.size(); ++a) {
      for (std::size_t b = a + 1; b < p.size(); ++b) {
        if (p.block(a).size() + p.block(b).size() > merge_cap) continue;
        Move m;
        m.kind = MoveKind::merge;
        m.first = p.block(a);
        m.second = p.block(b);
        options.push_back(m);
      }
    }
    return options.at(index(options.size()));
  }

  KernelParams params(const BasisStructure& basis, double tau2_lo = 1e-3, double tau2_hi = 0.5) {
    KernelParams p;
    for (std::size_t j = 0; j < basis.block_count(); ++j) {
      BlockParams bp;
      bp.sigma2 = uniform(0.3, 2.0);
      for (std::size_t i = 0; i < basis.block_variables(j).size(); ++i) {
        bp.thetas.push_back(uniform(0.15, 1.5));
      }
      p.blocks.push_back(bp);
    }
    p.tau2 = uniform(tau2_lo, tau2_hi);
    return p;
  }

  Dataset dataset(const BasisStructure& basis, std::size_t n) {
    Matrix X = points(n, basis.dimension());
    Vector y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t v = 0; v < basis.dimension(); ++v) {
        acc += std::sin(1.0 + static_cast<double>(v) * X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)));
      }
      y[static_cast<Eigen::Index>(i)] = acc + 0.1 * normal();
    }
    return Dataset(std::move(X), std::move(y));
  }

 private:
  std::mt19937_64 rng_;
};

/// Phi(x)^T coeffs from brute-force tensor evaluation of the 1D hats.
inline double brute_evaluate(const BasisStructure& basis, const Vector& coeffs,
                             const std::vector<double>& x) {
  double total = 0.0;
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    const auto& vars = basis.block_variables(j);
    for (std::size_t l = 0; l < basis.block_size(j); ++l) {
      const MultiIndex idx = basis.multi_index(j, l);
      double w = 1.0;
      for (std::size_t c = 0; c < vars.size(); ++c) {
        w *= basis_eval_1d(basis.subdivision(vars[c]), x[vars[c]])[idx[c]];
      }
      total += w * coeffs[static_cast<Eigen::Index>(basis.block_offset(j) + l)];
    }
  }
  return total;
}

}  // namespace bagp::testing
