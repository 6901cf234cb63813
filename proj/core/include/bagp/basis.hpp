#pragma once

// Piecewise-linear ("hat") bases on [0,1]^D organised in disjoint blocks of
// variables. A BasisStructure fixes the coefficient layout used everywhere
// else in the library: blocks in canonical order, and inside a block the
// multi-indices in lexicographic order with the last variable varying fastest.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace bagp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Ordered knots of one variable. Empty means the variable is inactive;
/// otherwise the knots start at 0, end at 1 and are strictly increasing.
class Subdivision {
 public:
  /// Knots closer than this to an existing knot (or to 0/1) are snapped onto it.
  static constexpr double kSnapTolerance = 1e-12;
  /// A refinement knot closer than this to an existing knot is rejected.
  static constexpr double kMinKnotGap = 1e-9;

  Subdivision() = default;
  explicit Subdivision(std::vector<double> knots);

  /// The two-knot subdivision (0, 1) given to freshly activated variables.
  static Subdivision unit();
  /// m equispaced knots, m >= 2.
  static Subdivision uniform(std::size_t m);

  [[nodiscard]] bool empty() const noexcept { return knots_.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return knots_.size(); }
  [[nodiscard]] std::span<const double> knots() const noexcept { return knots_; }
  [[nodiscard]] double operator[](std::size_t k) const { return knots_[k]; }

  [[nodiscard]] bool contains(double t, double tol = kSnapTolerance) const;
  [[nodiscard]] bool is_subset_of(const Subdivision& other) const;

  /// True when t lies strictly inside (0,1) and at least kMinKnotGap away
  /// from every existing knot.
  [[nodiscard]] bool can_insert(double t) const;
  /// Copy with t inserted in order; throws ArgumentError when !can_insert(t).
  [[nodiscard]] Subdivision with_knot(double t) const;

  /// Index k of the cell [t_k, t_{k+1}] holding x (k <= size()-2).
  [[nodiscard]] std::size_t cell(double x) const;

  friend bool operator==(const Subdivision&, const Subdivision&) = default;

 private:
  std::vector<double> knots_;
};

/// Hat function with support [u, w] peaking at v; throws unless u < v < w.
double hat_eval(double u, double v, double w, double x);

/// The two (possibly) nonzero one-dimensional hats at a point: entries
/// `index` and `index + 1` of the basis.
struct HatPair {
  std::size_t index = 0;
  double left = 0.0;
  double right = 0.0;
};

HatPair locate_hats(const Subdivision& s, double x);

/// All m hat values at x in [0,1]. The boundary hats use the virtual knots
/// -1 and 2, which only matters outside [0,1].
std::vector<double> basis_eval_1d(const Subdivision& s, double x);

/// Symmetric tridiagonal matrix stored by diagonals.
struct SymTridiagonal {
  Vector diagonal;
  Vector off_diagonal;  // size() == diagonal.size() - 1

  [[nodiscard]] Matrix dense() const;
  [[nodiscard]] double operator()(std::size_t a, std::size_t b) const;
};

/// Exact Gram matrix of the 1D hats over [0,1].
SymTridiagonal gram_1d(const Subdivision& s);
/// Exact integrals of the 1D hats over [0,1]; entries sum to 1.
Vector mass_1d(const Subdivision& s);

/// Disjoint blocks of 0-based variable indices, kept in canonical order:
/// members ascending within a block, blocks sorted by their smallest member.
class Subpartition {
 public:
  using Block = std::vector<std::size_t>;

  Subpartition() = default;
  explicit Subpartition(std::size_t dimension, std::vector<Block> blocks = {});

  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] std::size_t size() const noexcept { return blocks_.size(); }
  [[nodiscard]] bool empty() const noexcept { return blocks_.empty(); }
  [[nodiscard]] const std::vector<Block>& blocks() const noexcept { return blocks_; }
  [[nodiscard]] const Block& block(std::size_t j) const { return blocks_.at(j); }

  [[nodiscard]] std::optional<std::size_t> block_of(std::size_t var) const;
  [[nodiscard]] bool is_active(std::size_t var) const { return block_of(var).has_value(); }
  [[nodiscard]] std::vector<std::size_t> active_variables() const;

  /// Adds {var} as a new singleton block.
  [[nodiscard]] Subpartition with_singleton(std::size_t var) const;
  /// Replaces blocks a and b by their union.
  [[nodiscard]] Subpartition merged(std::size_t a, std::size_t b) const;

  friend bool operator==(const Subpartition&, const Subpartition&) = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<Block> blocks_;
};

/// Per-variable knot indices (0-based) for the variables of one block.
using MultiIndex = std::vector<std::size_t>;

class BasisStructure {
 public:
  BasisStructure() = default;
  BasisStructure(Subpartition partition, std::vector<Subdivision> subdivisions);

  /// Basis with no active variable; the associated predictor is zero.
  static BasisStructure empty(std::size_t dimension);

  [[nodiscard]] std::size_t dimension() const noexcept { return partition_.dimension(); }
  [[nodiscard]] const Subpartition& partition() const noexcept { return partition_; }
  [[nodiscard]] const std::vector<Subdivision>& subdivisions() const noexcept {
    return subdivisions_;
  }
  [[nodiscard]] const Subdivision& subdivision(std::size_t var) const {
    return subdivisions_.at(var);
  }

  /// Total number of basis functions |L|.
  [[nodiscard]] std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  [[nodiscard]] std::size_t block_count() const noexcept { return partition_.size(); }
  [[nodiscard]] std::size_t block_size(std::size_t j) const { return offsets_[j + 1] - offsets_[j]; }
  [[nodiscard]] std::size_t block_offset(std::size_t j) const { return offsets_[j]; }
  [[nodiscard]] const Subpartition::Block& block_variables(std::size_t j) const {
    return partition_.block(j);
  }

  [[nodiscard]] MultiIndex multi_index(std::size_t j, std::size_t local) const;
  [[nodiscard]] std::size_t local_index(std::size_t j, const MultiIndex& idx) const;

  /// Coordinates (one per block variable) of the knot where the hat of idx peaks.
  [[nodiscard]] std::vector<double> knot_point(std::size_t j, const MultiIndex& idx) const;

  /// Dense Phi(x) of length size().
  [[nodiscard]] Vector phi(std::span<const double> x) const;

  /// Nonzero entries of Phi(x) as (global index, value); appends to `out`.
  void phi_sparse(std::span<const double> x,
                  std::vector<std::pair<std::size_t, double>>& out) const;

  /// Phi(x)^T coeffs restricted to block j (coeffs spans the whole vector).
  [[nodiscard]] double block_value(std::size_t j, std::span<const double> coeffs,
                                   std::span<const double> x) const;

  /// Phi(x)^T coeffs.
  [[nodiscard]] double evaluate(std::span<const double> coeffs, std::span<const double> x) const;

  /// Phi(X) with one column per row of X (|L| x n).
  [[nodiscard]] Matrix design_matrix(const Matrix& X) const;
  /// Rows [offset_j, offset_j + |L_j|) of design_matrix(X).
  [[nodiscard]] Matrix block_design_matrix(std::size_t j, const Matrix& X) const;

  /// Psi_j: Gram matrix of the block's tensor hats (at most 3^|B_j| nonzeros per row).
  [[nodiscard]] SparseMatrix block_gram(std::size_t j) const;
  /// E_j: integrals of the block's tensor hats over the unit cube.
  [[nodiscard]] Vector block_mass(std::size_t j) const;

  friend bool operator==(const BasisStructure& a, const BasisStructure& b) {
    return a.partition_ == b.partition_ && a.subdivisions_ == b.subdivisions_;
  }

 private:
  void rebuild_layout();
  void check_point(std::span<const double> x) const;

  Subpartition partition_;
  std::vector<Subdivision> subdivisions_;
  std::vector<std::size_t> offsets_;               // B + 1 entries
  std::vector<std::vector<std::size_t>> strides_;  // per block, per variable
};

/// phi_eval(basis, x) == basis.phi(x).
Vector phi_eval(const BasisStructure& basis, std::span<const double> x);

std::vector<double> knot_point(const BasisStructure& basis, std::size_t block,
                               const MultiIndex& idx);

/// True iff span(old) is a subspace of span(new): every active old
/// subdivision is contained in the new one and every old block sits inside
/// some new block.
bool inclusion_check(const Subpartition& old_partition,
                     const std::vector<Subdivision>& old_subdivisions,
                     const Subpartition& new_partition,
                     const std::vector<Subdivision>& new_subdivisions);
bool inclusion_check(const BasisStructure& old_basis, const BasisStructure& new_basis);

/// Coefficients in `new_basis` of the function Phi_old^T coeffs. Throws
/// StructuralError when the bases are not nested.
Vector change_of_basis(const BasisStructure& old_basis, const BasisStructure& new_basis,
                       const Vector& coeffs);

}  // namespace bagp
