#pragma once

// Reproduction harness for the two synthetic benchmark suites: fixed-structure
// monotone regression in growing dimension, and block recovery by MaxMod.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bagp/maxmod.hpp"
#include "bagp/metrics.hpp"
#include "bagp/mle.hpp"

namespace bagp {

struct HdMonotoneConfig {
  std::vector<std::size_t> dimensions{10, 20};
  std::size_t replicates = 10;
  /// Knots per variable; blocks are the consecutive pairs {1,2}, {3,4}, ...
  std::size_t knots = 6;
  /// Training size is n_per_dimension * D.
  std::size_t n_per_dimension = 3;
  std::size_t test_points = 10000;
  /// Posterior draws for the constrained mean; 0 skips sampling.
  std::size_t sample_draws = 0;
  std::uint64_t seed = 1;
  DesignKind train_design = DesignKind::random_lhd;
  DesignKind test_design = DesignKind::maximin_lhd;
  MleOptions mle;
  /// Replicates run concurrently on this many workers (0 = default).
  std::size_t threads = 0;
};

struct HdMonotoneRow {
  std::size_t dimension = 0;
  std::size_t replicate = 0;
  std::size_t n = 0;
  std::size_t basis_size = 0;
  /// Unconstrained posterior mean.
  double q2_mean = 0.0;
  /// Constrained mode.
  double q2_mode = 0.0;
  /// Constrained posterior mean; present when draws were requested.
  std::optional<double> q2_constrained_mean;
  /// Parameter estimation plus mode, wall clock.
  double fit_seconds = 0.0;
  double sample_seconds = 0.0;
};

struct HdMonotoneSummary {
  std::size_t dimension = 0;
  std::size_t n = 0;
  std::size_t basis_size = 0;
  std::size_t replicates = 0;
  double q2_mean_avg = 0.0, q2_mean_sd = 0.0;
  double q2_mode_avg = 0.0, q2_mode_sd = 0.0;
  std::optional<double> q2_constrained_mean_avg, q2_constrained_mean_sd;
  double fit_seconds_avg = 0.0;
  double fit_seconds_max = 0.0;
  double total_seconds = 0.0;
};

struct HdMonotoneReport {
  HdMonotoneConfig config;
  std::vector<HdMonotoneRow> rows;
  std::vector<HdMonotoneSummary> summaries;
};

HdMonotoneReport run_hd_monotone(const HdMonotoneConfig& config);

struct BlockRecoveryConfig {
  std::size_t replicates = 10;
  std::size_t n = 42;
  /// Irrelevant variables appended after the six active ones.
  std::size_t dummies = 0;
  std::size_t iterations = 15;
  std::size_t test_points = 10000;
  std::uint64_t seed = 1;
  DesignKind train_design = DesignKind::maximin_lhd;
  DesignKind test_design = DesignKind::maximin_lhd;
  /// Stopping thresholds are ignored; every run makes `iterations` moves
  /// unless no candidate remains.
  MaxModConfig maxmod;
  std::size_t threads = 0;
};

struct RecoveryStep {
  std::size_t iteration = 0;
  std::string move;
  std::string partition;
  double q2 = 0.0;
  /// Dummy variables active after this move.
  std::size_t active_dummies = 0;
};

struct RecoveryRun {
  std::size_t replicate = 0;
  std::vector<RecoveryStep> steps;
  /// First iteration whose partition equals the true one.
  std::optional<std::size_t> recovered_at;
  /// First iteration at which a dummy variable is active.
  std::optional<std::size_t> first_dummy_at;
  std::string stop_reason;
  double seconds = 0.0;
};

struct BlockRecoveryReport {
  BlockRecoveryConfig config;
  std::vector<RecoveryRun> runs;

  /// Runs that reached the true partition within `iterations` moves.
  [[nodiscard]] std::size_t recovered(std::size_t iterations) const;
  /// Runs with no dummy active during the first `iterations` moves.
  [[nodiscard]] std::size_t dummy_free(std::size_t iterations) const;
  /// Median Q^2 across runs after `iteration` moves (runs that stopped
  /// earlier contribute their last value).
  [[nodiscard]] double median_q2(std::size_t iteration) const;
};

/// The partition {1,3}{2,4}{5,6} in describe_partition() form.
inline const char* const kToyPartition = "{1,3}{2,4}{5,6}";

BlockRecoveryReport run_block_recovery(const BlockRecoveryConfig& config);

void write_markdown(std::ostream& out, const HdMonotoneReport& report);
void write_csv(std::ostream& out, const HdMonotoneReport& report);
void write_markdown(std::ostream& out, const BlockRecoveryReport& report);
void write_csv(std::ostream& out, const BlockRecoveryReport& report);

}  // namespace bagp
