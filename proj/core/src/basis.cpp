#include "bagp/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "bagp/error.hpp"

namespace bagp {

// ---------------------------------------------------------------- Subdivision

Subdivision::Subdivision(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.empty()) return;
  if (knots_.size() < 2) throw ArgumentError("subdivision needs at least two knots");
  for (double& t : knots_) {
    if (!std::isfinite(t)) throw ArgumentError("subdivision knot is not finite");
    if (std::abs(t) <= kSnapTolerance) t = 0.0;
    if (std::abs(t - 1.0) <= kSnapTolerance) t = 1.0;
  }
  if (knots_.front() != 0.0 || knots_.back() != 1.0) {
    throw ArgumentError("subdivision must start at 0 and end at 1");
  }
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    if (!(knots_[k] > knots_[k - 1])) {
      throw ArgumentError("subdivision knots must be strictly increasing");
    }
  }
}

Subdivision Subdivision::unit() { return Subdivision({0.0, 1.0}); }

Subdivision Subdivision::uniform(std::size_t m) {
  if (m < 2) throw ArgumentError("uniform subdivision needs m >= 2");
  std::vector<double> knots(m);
  for (std::size_t k = 0; k < m; ++k) {
    knots[k] = static_cast<double>(k) / static_cast<double>(m - 1);
  }
  return Subdivision(std::move(knots));
}

bool Subdivision::contains(double t, double tol) const {
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t - tol);
  return it != knots_.end() && std::abs(*it - t) <= tol;
}

bool Subdivision::is_subset_of(const Subdivision& other) const {
  return std::all_of(knots_.begin(), knots_.end(),
                     [&](double t) { return other.contains(t); });
}

bool Subdivision::can_insert(double t) const {
  if (empty() || !(t > 0.0 && t < 1.0)) return false;
  return !contains(t, kMinKnotGap);
}

Subdivision Subdivision::with_knot(double t) const {
  if (!can_insert(t)) {
    std::ostringstream msg;
    msg << "cannot insert knot " << t << " into subdivision";
    throw ArgumentError(msg.str());
  }
  std::vector<double> knots = knots_;
  knots.insert(std::upper_bound(knots.begin(), knots.end(), t), t);
  return Subdivision(std::move(knots));
}

std::size_t Subdivision::cell(double x) const {
  // upper_bound over the interior knots keeps x == 1 in the last cell
  auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, x);
  return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

// ------------------------------------------------------------------ 1D hats

double hat_eval(double u, double v, double w, double x) {
  if (!(u < v && v < w)) throw ArgumentError("hat_eval requires u < v < w");
  if (x >= u && x <= v) return (x - u) / (v - u);
  if (x > v && x <= w) return (w - x) / (w - v);
  return 0.0;
}

HatPair locate_hats(const Subdivision& s, double x) {
  if (s.empty()) throw ArgumentError("cannot evaluate an empty subdivision");
  if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("hat basis evaluated outside [0,1]");
  const std::size_t k = s.cell(x);
  const double lo = s[k];
  const double hi = s[k + 1];
  const double right = (x - lo) / (hi - lo);
  return {k, 1.0 - right, right};
}

std::vector<double> basis_eval_1d(const Subdivision& s, double x) {
  const HatPair h = locate_hats(s, x);
  std::vector<double> values(s.size(), 0.0);
  values[h.index] = h.left;
  values[h.index + 1] = h.right;
  return values;
}

Matrix SymTridiagonal::dense() const {
  const auto m = diagonal.size();
  Matrix out = Matrix::Zero(m, m);
  out.diagonal() = diagonal;
  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    out(k, k + 1) = off_diagonal[k];
    out(k + 1, k) = off_diagonal[k];
  }
  return out;
}

double SymTridiagonal::operator()(std::size_t a, std::size_t b) const {
  if (a == b) return diagonal[static_cast<Eigen::Index>(a)];
  if (a + 1 == b) return off_diagonal[static_cast<Eigen::Index>(a)];
  if (b + 1 == a) return off_diagonal[static_cast<Eigen::Index>(b)];
  return 0.0;
}

SymTridiagonal gram_1d(const Subdivision& s) {
  if (s.empty()) throw ArgumentError("gram_1d of an empty subdivision");
  const std::size_t m = s.size();
  SymTridiagonal g{Vector::Zero(static_cast<Eigen::Index>(m)),
                   Vector::Zero(static_cast<Eigen::Index>(m - 1))};
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double h = s[k + 1] - s[k];
    g.diagonal[static_cast<Eigen::Index>(k)] += h / 3.0;
    g.diagonal[static_cast<Eigen::Index>(k + 1)] += h / 3.0;
    g.off_diagonal[static_cast<Eigen::Index>(k)] = h / 6.0;
  }
  return g;
}

Vector mass_1d(const Subdivision& s) {
  if (s.empty()) throw ArgumentError("mass_1d of an empty subdivision");
  const std::size_t m = s.size();
  Vector e = Vector::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double h = s[k + 1] - s[k];
    e[static_cast<Eigen::Index>(k)] += h / 2.0;
    e[static_cast<Eigen::Index>(k + 1)] += h / 2.0;
  }
  return e;
}

// ---------------------------------------------------------------- Subpartition

Subpartition::Subpartition(std::size_t dimension, std::vector<Block> blocks)
    : dimension_(dimension), blocks_(std::move(blocks)) {
  std::vector<bool> seen(dimension_, false);
  for (Block& b : blocks_) {
    if (b.empty()) throw ArgumentError("subpartition blocks must be nonempty");
    std::sort(b.begin(), b.end());
    for (std::size_t var : b) {
      if (var >= dimension_) throw ArgumentError("block variable index out of range");
      if (seen[var]) throw ArgumentError("subpartition blocks must be disjoint");
      seen[var] = true;
    }
  }
  std::sort(blocks_.begin(), blocks_.end(),
            [](const Block& a, const Block& b) { return a.front() < b.front(); });
}

std::optional<std::size_t> Subpartition::block_of(std::size_t var) const {
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    if (std::binary_search(blocks_[j].begin(), blocks_[j].end(), var)) return j;
  }
  return std::nullopt;
}

std::vector<std::size_t> Subpartition::active_variables() const {
  std::vector<std::size_t> vars;
  for (const Block& b : blocks_) vars.insert(vars.end(), b.begin(), b.end());
  std::sort(vars.begin(), vars.end());
  return vars;
}

Subpartition Subpartition::with_singleton(std::size_t var) const {
  std::vector<Block> blocks = blocks_;
  blocks.push_back({var});
  return Subpartition(dimension_, std::move(blocks));
}

Subpartition Subpartition::merged(std::size_t a, std::size_t b) const {
  if (a == b || a >= blocks_.size() || b >= blocks_.size()) {
    throw ArgumentError("merge needs two distinct existing blocks");
  }
  std::vector<Block> blocks;
  Block fused = blocks_[a];
  fused.insert(fused.end(), blocks_[b].begin(), blocks_[b].end());
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    if (j != a && j != b) blocks.push_back(blocks_[j]);
  }
  blocks.push_back(std::move(fused));
  return Subpartition(dimension_, std::move(blocks));
}

// -------------------------------------------------------------- BasisStructure

BasisStructure::BasisStructure(Subpartition partition, std::vector<Subdivision> subdivisions)
    : partition_(std::move(partition)), subdivisions_(std::move(subdivisions)) {
  if (subdivisions_.size() != partition_.dimension()) {
    throw ArgumentError("one subdivision per input variable is required");
  }
  for (std::size_t var = 0; var < subdivisions_.size(); ++var) {
    const bool active = partition_.is_active(var);
    if (active && subdivisions_[var].empty()) {
      throw ArgumentError("active variable " + std::to_string(var + 1) +
                          " has an empty subdivision");
    }
    if (!active && !subdivisions_[var].empty()) {
      throw ArgumentError("inactive variable " + std::to_string(var + 1) +
                          " has a nonempty subdivision");
    }
  }
  rebuild_layout();
}

BasisStructure BasisStructure::empty(std::size_t dimension) {
  return BasisStructure(Subpartition(dimension), std::vector<Subdivision>(dimension));
}

void BasisStructure::rebuild_layout() {
  const std::size_t B = partition_.size();
  offsets_.assign(B + 1, 0);
  strides_.assign(B, {});
  for (std::size_t j = 0; j < B; ++j) {
    const auto& vars = partition_.block(j);
    std::vector<std::size_t> strides(vars.size());
    std::size_t stride = 1;
    for (std::size_t k = vars.size(); k-- > 0;) {
      strides[k] = stride;
      stride *= subdivisions_[vars[k]].size();
    }
    strides_[j] = std::move(strides);
    offsets_[j + 1] = offsets_[j] + stride;
  }
}

MultiIndex BasisStructure::multi_index(std::size_t j, std::size_t local) const {
  if (local >= block_size(j)) throw ArgumentError("local basis index out of range");
  const auto& vars = partition_.block(j);
  MultiIndex idx(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) {
    idx[k] = local / strides_[j][k];
    local %= strides_[j][k];
  }
  return idx;
}

std::size_t BasisStructure::local_index(std::size_t j, const MultiIndex& idx) const {
  const auto& vars = partition_.block(j);
  if (idx.size() != vars.size()) throw ArgumentError("multi-index length differs from block size");
  std::size_t local = 0;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    if (idx[k] >= subdivisions_[vars[k]].size()) {
      throw ArgumentError("multi-index component out of range");
    }
    local += idx[k] * strides_[j][k];
  }
  return local;
}

std::vector<double> BasisStructure::knot_point(std::size_t j, const MultiIndex& idx) const {
  (void)local_index(j, idx);  // validates
  const auto& vars = partition_.block(j);
  std::vector<double> point(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) point[k] = subdivisions_[vars[k]][idx[k]];
  return point;
}

void BasisStructure::check_point(std::span<const double> x) const {
  if (x.size() != dimension()) throw ArgumentError("point dimension does not match the basis");
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("point outside the unit cube");
  }
}

namespace {

// Calls visit(local_index, weight) for the 2^|B| tensor-product corners
// around x inside block j.
template <typename Visit>
void for_each_block_corner(const std::vector<std::size_t>& vars,
                           const std::vector<std::size_t>& strides,
                           const std::vector<Subdivision>& subdivisions,
                           std::span<const double> x, Visit&& visit) {
  const std::size_t d = vars.size();
  HatPair pairs[16];
  std::vector<HatPair> heap;
  HatPair* h = pairs;
  if (d > 16) {
    heap.resize(d);
    h = heap.data();
  }
  std::size_t base = 0;
  for (std::size_t k = 0; k < d; ++k) {
    h[k] = locate_hats(subdivisions[vars[k]], x[vars[k]]);
    base += h[k].index * strides[k];
  }
  const std::size_t corners = std::size_t{1} << d;
  for (std::size_t mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    std::size_t local = base;
    for (std::size_t k = 0; k < d; ++k) {
      if (mask & (std::size_t{1} << k)) {
        w *= h[k].right;
        local += strides[k];
      } else {
        w *= h[k].left;
      }
    }
    if (w != 0.0) visit(local, w);
  }
}

}  // namespace

Vector BasisStructure::phi(std::span<const double> x) const {
  check_point(x);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(size()));
  for (std::size_t j = 0; j < block_count(); ++j) {
    const std::size_t off = offsets_[j];
    for_each_block_corner(partition_.block(j), strides_[j], subdivisions_, x,
                          [&](std::size_t local, double w) {
                            out[static_cast<Eigen::Index>(off + local)] += w;
                          });
  }
  return out;
}

void BasisStructure::phi_sparse(std::span<const double> x,
                                std::vector<std::pair<std::size_t, double>>& out) const {
  check_point(x);
  for (std::size_t j = 0; j < block_count(); ++j) {
    const std::size_t off = offsets_[j];
    for_each_block_corner(partition_.block(j), strides_[j], subdivisions_, x,
                          [&](std::size_t local, double w) { out.emplace_back(off + local, w); });
  }
}

double BasisStructure::block_value(std::size_t j, std::span<const double> coeffs,
                                   std::span<const double> x) const {
  if (coeffs.size() != size()) throw ArgumentError("coefficient vector has the wrong length");
  check_point(x);
  const std::size_t off = offsets_[j];
  double acc = 0.0;
  for_each_block_corner(partition_.block(j), strides_[j], subdivisions_, x,
                        [&](std::size_t local, double w) { acc += w * coeffs[off + local]; });
  return acc;
}

double BasisStructure::evaluate(std::span<const double> coeffs, std::span<const double> x) const {
  if (coeffs.size() != size()) throw ArgumentError("coefficient vector has the wrong length");
  check_point(x);
  double acc = 0.0;
  for (std::size_t j = 0; j < block_count(); ++j) {
    const std::size_t off = offsets_[j];
    for_each_block_corner(partition_.block(j), strides_[j], subdivisions_, x,
                          [&](std::size_t local, double w) { acc += w * coeffs[off + local]; });
  }
  return acc;
}

Matrix BasisStructure::design_matrix(const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != dimension()) {
    throw ArgumentError("design matrix input has the wrong number of columns");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(size()), X.rows());
  std::vector<double> row(dimension());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (std::size_t d = 0; d < dimension(); ++d) row[d] = X(i, static_cast<Eigen::Index>(d));
    check_point(row);
    for (std::size_t j = 0; j < block_count(); ++j) {
      const std::size_t off = offsets_[j];
      for_each_block_corner(partition_.block(j), strides_[j], subdivisions_, row,
                            [&](std::size_t local, double w) {
                              out(static_cast<Eigen::Index>(off + local), i) += w;
                            });
    }
  }
  return out;
}

Matrix BasisStructure::block_design_matrix(std::size_t j, const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != dimension()) {
    throw ArgumentError("design matrix input has the wrong number of columns");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(block_size(j)), X.rows());
  std::vector<double> row(dimension());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (std::size_t d = 0; d < dimension(); ++d) row[d] = X(i, static_cast<Eigen::Index>(d));
    check_point(row);
    for_each_block_corner(partition_.block(j), strides_[j], subdivisions_, row,
                          [&](std::size_t local, double w) {
                            out(static_cast<Eigen::Index>(local), i) += w;
                          });
  }
  return out;
}

SparseMatrix BasisStructure::block_gram(std::size_t j) const {
  const auto& vars = partition_.block(j);
  const std::size_t d = vars.size();
  std::vector<SymTridiagonal> grams;
  grams.reserve(d);
  for (std::size_t var : vars) grams.push_back(gram_1d(subdivisions_[var]));

  const std::size_t n = block_size(j);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n * std::min<std::size_t>(n, static_cast<std::size_t>(std::pow(3.0, d))));

  std::size_t neighbours = 1;
  for (std::size_t k = 0; k < d; ++k) neighbours *= 3;

  for (std::size_t row = 0; row < n; ++row) {
    const MultiIndex idx = multi_index(j, row);
    for (std::size_t code = 0; code < neighbours; ++code) {
      std::size_t c = code;
      double value = 1.0;
      std::size_t col = 0;
      bool valid = true;
      for (std::size_t k = 0; k < d && valid; ++k) {
        const int shift = static_cast<int>(c % 3) - 1;
        c /= 3;
        const long other = static_cast<long>(idx[k]) + shift;
        if (other < 0 || other >= static_cast<long>(subdivisions_[vars[k]].size())) {
          valid = false;
          break;
        }
        value *= grams[k](idx[k], static_cast<std::size_t>(other));
        col += static_cast<std::size_t>(other) * strides_[j][k];
      }
      if (valid && value != 0.0) {
        triplets.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
      }
    }
  }
  SparseMatrix psi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  psi.setFromTriplets(triplets.begin(), triplets.end());
  return psi;
}

Vector BasisStructure::block_mass(std::size_t j) const {
  const auto& vars = partition_.block(j);
  std::vector<Vector> masses;
  masses.reserve(vars.size());
  for (std::size_t var : vars) masses.push_back(mass_1d(subdivisions_[var]));
  const std::size_t n = block_size(j);
  Vector e(static_cast<Eigen::Index>(n));
  for (std::size_t local = 0; local < n; ++local) {
    const MultiIndex idx = multi_index(j, local);
    double v = 1.0;
    for (std::size_t k = 0; k < vars.size(); ++k) v *= masses[k][static_cast<Eigen::Index>(idx[k])];
    e[static_cast<Eigen::Index>(local)] = v;
  }
  return e;
}

// ---------------------------------------------------------------- free functions

Vector phi_eval(const BasisStructure& basis, std::span<const double> x) { return basis.phi(x); }

std::vector<double> knot_point(const BasisStructure& basis, std::size_t block,
                               const MultiIndex& idx) {
  if (block >= basis.block_count()) throw ArgumentError("block index out of range");
  return basis.knot_point(block, idx);
}

bool inclusion_check(const Subpartition& old_partition,
                     const std::vector<Subdivision>& old_subdivisions,
                     const Subpartition& new_partition,
                     const std::vector<Subdivision>& new_subdivisions) {
  if (old_partition.dimension() != new_partition.dimension()) return false;
  if (old_subdivisions.size() != new_subdivisions.size()) return false;
  for (std::size_t var : old_partition.active_variables()) {
    const Subdivision& now = new_subdivisions[var];
    if (now.empty() || !old_subdivisions[var].is_subset_of(now)) return false;
  }
  for (const auto& block : old_partition.blocks()) {
    const auto host = new_partition.block_of(block.front());
    if (!host) return false;
    const auto& target = new_partition.block(*host);
    if (!std::includes(target.begin(), target.end(), block.begin(), block.end())) return false;
  }
  return true;
}

bool inclusion_check(const BasisStructure& old_basis, const BasisStructure& new_basis) {
  return inclusion_check(old_basis.partition(), old_basis.subdivisions(), new_basis.partition(),
                         new_basis.subdivisions());
}

Vector change_of_basis(const BasisStructure& old_basis, const BasisStructure& new_basis,
                       const Vector& coeffs) {
  if (static_cast<std::size_t>(coeffs.size()) != old_basis.size()) {
    throw ArgumentError("coefficient vector does not match the old basis");
  }
  if (!inclusion_check(old_basis, new_basis)) {
    throw StructuralError("change_of_basis: old basis is not included in the new one");
  }

  // Each old block function lives in exactly one new block; its new
  // coefficients are its values at the new block's knots. Blocks that host
  // no old block (freshly activated variables) stay at zero.
  Vector out = Vector::Zero(static_cast<Eigen::Index>(new_basis.size()));
  const std::size_t D = new_basis.dimension();
  std::vector<double> point(D, 0.0);
  std::span<const double> old_coeffs(coeffs.data(), static_cast<std::size_t>(coeffs.size()));

  for (std::size_t jo = 0; jo < old_basis.block_count(); ++jo) {
    const auto& old_vars = old_basis.block_variables(jo);
    const std::size_t jn = *new_basis.partition().block_of(old_vars.front());
    const auto& new_vars = new_basis.block_variables(jn);
    const std::size_t off = new_basis.block_offset(jn);
    for (std::size_t local = 0; local < new_basis.block_size(jn); ++local) {
      const MultiIndex idx = new_basis.multi_index(jn, local);
      for (std::size_t k = 0; k < new_vars.size(); ++k) {
        point[new_vars[k]] = new_basis.subdivision(new_vars[k])[idx[k]];
      }
      out[static_cast<Eigen::Index>(off + local)] += old_basis.block_value(jo, old_coeffs, point);
    }
  }
  return out;
}

}  // namespace bagp
