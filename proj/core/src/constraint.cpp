#include "bagp/constraint.hpp"

#include <algorithm>
#include <cmath>

#include "bagp/error.hpp"

namespace bagp {

const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::increasing:
      return "increasing";
    case Monotonicity::decreasing:
      return "decreasing";
    case Monotonicity::none:
      return "none";
  }
  return "none";
}

Monotonicity parse_monotonicity(const std::string& text) {
  if (text == "increasing" || text == "+") return Monotonicity::increasing;
  if (text == "decreasing" || text == "-") return Monotonicity::decreasing;
  if (text == "none" || text == "0") return Monotonicity::none;
  throw ValidationError("unknown monotonicity '" + text + "'");
}

std::vector<Monotonicity> default_directions(std::size_t dimension) {
  return std::vector<Monotonicity>(dimension, Monotonicity::increasing);
}

ConstraintSystem build_monotone_constraints(const BasisStructure& basis,
                                            const std::vector<Monotonicity>& directions) {
  if (directions.size() != basis.dimension()) {
    throw ArgumentError("one monotonicity direction per input variable is required");
  }
  ConstraintSystem cons;
  cons.columns_ = basis.size();
  cons.directions_ = directions;
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    const auto& vars = basis.block_variables(j);
    const std::size_t off = basis.block_offset(j);
    const std::size_t size = basis.block_size(j);
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const Monotonicity dir = directions[vars[k]];
      if (dir == Monotonicity::none) continue;
      const std::size_t m = basis.subdivision(vars[k]).size();
      for (std::size_t local = 0; local < size; ++local) {
        MultiIndex idx = basis.multi_index(j, local);
        if (idx[k] != 0) continue;
        std::vector<std::size_t> chain(m);
        for (std::size_t t = 0; t < m; ++t) {
          idx[k] = t;
          chain[t] = off + basis.local_index(j, idx);
        }
        if (dir == Monotonicity::decreasing) std::reverse(chain.begin(), chain.end());
        for (std::size_t t = 0; t + 1 < m; ++t) cons.rows_.push_back({chain[t], chain[t + 1]});
        cons.chains_.push_back(std::move(chain));
      }
    }
    cons.block_starts_.push_back(cons.rows_.size());
  }
  return cons;
}

SparseMatrix ConstraintSystem::matrix() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(rows_[r].lo), 1.0);
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(rows_[r].hi), -1.0);
  }
  SparseMatrix A(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(columns_));
  A.setFromTriplets(triplets.begin(), triplets.end());
  return A;
}

Vector ConstraintSystem::apply(const Vector& xi) const {
  if (static_cast<std::size_t>(xi.size()) != columns_) {
    throw ArgumentError("coefficient vector does not match the constraint system");
  }
  Vector out(static_cast<Eigen::Index>(rows_.size()));
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    out[static_cast<Eigen::Index>(r)] = xi[static_cast<Eigen::Index>(rows_[r].lo)] -
                                        xi[static_cast<Eigen::Index>(rows_[r].hi)];
  }
  return out;
}

double ConstraintSystem::max_violation(const Vector& xi) const {
  const Vector v = apply(xi);
  return v.size() ? std::max(0.0, v.maxCoeff()) : 0.0;
}

namespace {

// Unweighted pool-adjacent-violators on values[chain[0..m)] (non-decreasing).
void pav(Vector& values, const std::vector<std::size_t>& chain) {
  std::vector<double> level;
  std::vector<std::size_t> count;
  level.reserve(chain.size());
  count.reserve(chain.size());
  for (std::size_t idx : chain) {
    level.push_back(values[static_cast<Eigen::Index>(idx)]);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double merged =
          (level[level.size() - 2] * static_cast<double>(count[count.size() - 2]) +
           level.back() * static_cast<double>(count.back())) /
          static_cast<double>(count[count.size() - 2] + count.back());
      count[count.size() - 2] += count.back();
      level.pop_back();
      count.pop_back();
      level.back() = merged;
    }
  }
  std::size_t pos = 0;
  for (std::size_t b = 0; b < level.size(); ++b) {
    for (std::size_t c = 0; c < count[b]; ++c) values[static_cast<Eigen::Index>(chain[pos++])] = level[b];
  }
}

}  // namespace

Vector isotonic_sweeps(const ConstraintSystem& cons, const Vector& start, std::size_t sweeps) {
  Vector values = start;
  for (std::size_t s = 0; s < sweeps; ++s) {
    for (const auto& chain : cons.chains()) pav(values, chain);
    if (cons.max_violation(values) <= 0.0) break;
  }
  return values;
}

MapResult map_estimate(const Posterior& post, const ConstraintSystem& cons,
                       const QpOptions& options) {
  if (cons.columns() != post.size()) {
    throw ArgumentError("constraint system does not match the posterior");
  }
  MapResult out;
  const SparseMatrix A = cons.matrix();
  const Vector b = Vector::Zero(A.rows());
  QpOptions opts = options;
  if (!opts.fallback_start && !cons.empty()) opts.fallback_start = isotonic_sweeps(cons, post.mu);
  out.qp = solve_qp(post.sigma_inv, post.sigma_inv_llt, post.mu, A, b, opts);
  out.xi = out.qp.x;
  if (!out.xi.allFinite()) throw NumericalError("MAP estimate is not finite");
  return out;
}

std::vector<double> Normalization::apply(std::span<const double> raw, bool clamp) const {
  if (raw.size() != lower.size()) throw ValidationError("point dimension does not match the model");
  std::vector<double> out(raw.size());
  for (std::size_t d = 0; d < raw.size(); ++d) {
    const double width = upper[d] - lower[d];
    double v = width > 0.0 ? (raw[d] - lower[d]) / width : 0.5;
    if (clamp) v = std::clamp(v, 0.0, 1.0);
    out[d] = v;
  }
  return out;
}

double predict(const FittedModel& model, std::span<const double> x) {
  return model.basis.evaluate(std::span<const double>(model.xi.data(), static_cast<std::size_t>(model.xi.size())), x);
}

double predict_mean(const FittedModel& model, std::span<const double> x) {
  return model.basis.evaluate(std::span<const double>(model.mu.data(), static_cast<std::size_t>(model.mu.size())), x);
}

BlockPredictors::BlockPredictors(const FittedModel& model) : basis_(model.basis), xi_(model.xi) {
  integrals_.resize(basis_.block_count());
  for (std::size_t j = 0; j < basis_.block_count(); ++j) {
    const auto off = static_cast<Eigen::Index>(basis_.block_offset(j));
    const Vector e = basis_.block_mass(j);
    integrals_[j] = e.dot(xi_.segment(off, e.size()));
    constant_ += integrals_[j];
  }
}

double BlockPredictors::operator()(std::size_t j, std::span<const double> x) const {
  return basis_.block_value(j, std::span<const double>(xi_.data(), static_cast<std::size_t>(xi_.size())), x) -
         integrals_.at(j);
}

}  // namespace bagp
