#pragma once

// Greedy selection of active variables, knots and blocks.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bagp/basis.hpp"
#include "bagp/constraint.hpp"
#include "bagp/fit.hpp"
#include "bagp/posterior.hpp"

namespace bagp {

enum class MoveKind { activate, refine, merge };

struct Move {
  MoveKind kind = MoveKind::activate;
  /// Variable (0-based) for activate and refine.
  std::size_t variable = 0;
  /// Inserted knot for refine.
  double knot = 0.0;
  /// Variables of the two merged blocks (0-based, ascending).
  Subpartition::Block first;
  Subpartition::Block second;

  /// Human-readable form with 1-based variables, e.g. "refine(2,0.5)".
  [[nodiscard]] std::string describe() const;
};

struct Candidate {
  Move move;
  BasisStructure basis;
  /// |L*| - |L|; a merge of two-knot singletons adds no functions and is scored with 1.
  std::size_t size_delta = 0;
};

/// How kernel parameters are obtained for scored candidates.
enum class ParamMode {
  /// Maximum likelihood for every candidate, warm-started from the incumbent.
  refit,
  /// Incumbent parameters for scoring, maximum likelihood only for the winner.
  fast,
  /// fast when D > 40, refit otherwise.
  automatic
};

struct MaxModConfig {
  double alpha = 1.4;
  double gamma = 0.5;
  /// Unset means 1e-4 var(y).
  std::optional<double> eps1;
  double eps2 = 1e-3;
  std::size_t max_iterations = 30;
  std::vector<double> refine_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  /// Golden-section search of the winning refine knot on the criterion.
  bool golden_polish = false;
  std::size_t merge_cap = 4;
  ParamMode param_mode = ParamMode::automatic;
  /// Space-filling MLE restarts per candidate on top of the warm start.
  std::size_t candidate_restarts = 0;
  MleOptions mle;
  MeanPath path = MeanPath::automatic;
  QpOptions qp;
  /// Unset means non-decreasing in every variable.
  std::optional<std::vector<Monotonicity>> directions;
  /// Candidate evaluations run on this many workers; 0 means default_thread_count().
  std::size_t threads = 0;
  /// Stop when SE improved by less than plateau_tol (relative) over plateau_window iterations.
  bool plateau = false;
  std::size_t plateau_window = 3;
  double plateau_tol = 1e-2;
};

struct HistoryRow {
  std::size_t iteration = 0;
  Move move;
  double l2mod = 0.0;
  double se = 0.0;
  double criterion = 0.0;
  /// SE / var(y), the second stopping variable.
  double c2 = 0.0;
  std::size_t basis_size = 0;
  std::string partition;
  std::size_t candidates = 0;
  std::size_t failed = 0;
  double wall_seconds = 0.0;
};

struct MaxModState {
  BasisStructure basis;
  FittedModel model;
  std::size_t iteration = 0;
  std::vector<HistoryRow> history;
  MaxModConfig config;
};

struct MaxModResult {
  MaxModState state;
  FittedModel model;
  std::string stop_reason;
};

/// All moves from `basis`: activates by variable, refines by (variable, t),
/// merges by block pair, in that order.
std::vector<Candidate> enumerate_candidates(const BasisStructure& basis, const MaxModConfig& config);

/// Structural move applied to a basis.
Candidate apply_move(const BasisStructure& basis, const Move& move);

/// Squared L2 distance over the unit cube between Phi_old^T old_xi and
/// Phi_new^T new_xi; the old basis must be included in the new one.
double l2mod(const BasisStructure& old_basis, const Vector& old_xi,
             const BasisStructure& new_basis, const Vector& new_xi);
double l2mod(const FittedModel& old_model, const FittedModel& new_model);

/// Sum of squared residuals of the constrained mode at the data.
double se(const FittedModel& model, const Dataset& data);

/// L2Mod / (delta^alpha SE^gamma), SE floored at se_floor.
double criterion(double l2mod_value, std::size_t size_delta, double se_value, double alpha,
                 double gamma, double se_floor = 0.0);

/// Compact partition text with 1-based variables, e.g. "{1,3}{2}".
std::string describe_partition(const Subpartition& partition);

/// Kernel parameters for `target` seeded from those of an included basis.
KernelParams transfer_params(const BasisStructure& source, const KernelParams& params,
                             const BasisStructure& target, double response_scale);

using IterationObserver = std::function<void(const MaxModState&)>;

MaxModResult run_maxmod(const Dataset& data, const MaxModConfig& config = {},
                        const IterationObserver& observer = {});

/// iteration,move,l2mod,se,criterion,c2,basis_size,partition,candidates,failed,wall_seconds
void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history);

}  // namespace bagp
