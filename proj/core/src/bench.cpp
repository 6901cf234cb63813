#include "bagp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bagp/error.hpp"
#include "bagp/fit.hpp"
#include "bagp/parallel.hpp"
#include "bagp/sampler.hpp"

namespace bagp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <class F>
Vector evaluate(const Matrix& X, F&& f) {
  Vector y(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index d = 0; d < X.cols(); ++d) row[static_cast<std::size_t>(d)] = X(i, d);
    y[i] = f(std::span<const double>(row));
  }
  return y;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

std::size_t workers(std::size_t requested) {
  return requested == 0 ? default_thread_count() : requested;
}

BasisStructure paired_basis(std::size_t D, std::size_t knots) {
  std::vector<Subpartition::Block> blocks;
  for (std::size_t j = 0; j + 1 < D; j += 2) blocks.push_back({j, j + 1});
  if (D % 2 == 1) blocks.push_back({D - 1});
  return BasisStructure(Subpartition(D, blocks), std::vector<Subdivision>(D, Subdivision::uniform(knots)));
}

std::string pct(double avg, double sd) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * avg << " ± " << 100.0 * sd;
  return s.str();
}

}  // namespace

HdMonotoneReport run_hd_monotone(const HdMonotoneConfig& config) {
  if (config.replicates == 0 || config.knots < 2 || config.n_per_dimension == 0 ||
      config.test_points < 2) {
    throw ArgumentError("hd-monotone: replicates, knots, n and test size must be positive");
  }
  HdMonotoneReport report;
  report.config = config;
  for (std::size_t D : config.dimensions) {
    if (D < 2 || D % 2 != 0) throw ArgumentError("hd-monotone: dimensions must be even and at least 2");
    const auto t_dim = Clock::now();
    const auto target = [D](std::span<const double> x) { return toy_block_arctan(D, x); };
    const Design test = lhd(config.test_points, D, mix(config.seed, 1000 + D), config.test_design);
    const Vector y_test = evaluate(test.points, target);
    const BasisStructure basis = paired_basis(D, config.knots);
    const Matrix phi_test = basis.design_matrix(test.points).transpose();
    const std::size_t n = config.n_per_dimension * D;

    std::vector<HdMonotoneRow> rows(config.replicates);
    parallel_for(config.replicates, workers(config.threads), [&](std::size_t rep) {
      HdMonotoneRow& row = rows[rep];
      row.dimension = D;
      row.replicate = rep + 1;
      row.n = n;
      row.basis_size = basis.size();
      const std::uint64_t s = mix(config.seed, D * 1000 + rep);
      const Design train = lhd(n, D, s, config.train_design);
      const Dataset data(train.points, evaluate(train.points, target));
      FitOptions opts;
      opts.mle = config.mle;
      opts.mle.seed = s;
      opts.mle.threads = 1;
      const auto t0 = Clock::now();
      const FittedModel model = fit_model(basis, data, default_directions(D), opts);
      row.fit_seconds = seconds_since(t0);
      row.q2_mode = q2(y_test, phi_test * model.xi);
      row.q2_mean = q2(y_test, phi_test * model.mu);
      if (config.sample_draws > 0) {
        const auto t1 = Clock::now();
        const PriorCov prior(basis, model.params);
        const Posterior post = condition(basis, prior, data, model.params.tau2);
        const SampleBatch batch = sample_truncated(post, model.constraints, model.xi,
                                                   config.sample_draws, s);
        row.q2_constrained_mean = q2(y_test, phi_test * batch.mean());
        row.sample_seconds = seconds_since(t1);
      }
    });

    HdMonotoneSummary sum;
    sum.dimension = D;
    sum.n = n;
    sum.basis_size = basis.size();
    sum.replicates = config.replicates;
    std::vector<double> mean, mode, cmean, fit;
    for (const auto& r : rows) {
      mean.push_back(r.q2_mean);
      mode.push_back(r.q2_mode);
      fit.push_back(r.fit_seconds);
      if (r.q2_constrained_mean) cmean.push_back(*r.q2_constrained_mean);
    }
    std::tie(sum.q2_mean_avg, sum.q2_mean_sd) = mean_sd(mean);
    std::tie(sum.q2_mode_avg, sum.q2_mode_sd) = mean_sd(mode);
    if (!cmean.empty()) {
      const auto [a, b] = mean_sd(cmean);
      sum.q2_constrained_mean_avg = a;
      sum.q2_constrained_mean_sd = b;
    }
    sum.fit_seconds_avg = mean_sd(fit).first;
    sum.fit_seconds_max = *std::max_element(fit.begin(), fit.end());
    sum.total_seconds = seconds_since(t_dim);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.summaries.push_back(sum);
  }
  return report;
}

std::size_t BlockRecoveryReport::recovered(std::size_t iterations) const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [&](const RecoveryRun& r) {
    return r.recovered_at && *r.recovered_at <= iterations;
  }));
}

std::size_t BlockRecoveryReport::dummy_free(std::size_t iterations) const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [&](const RecoveryRun& r) {
    return !r.first_dummy_at || *r.first_dummy_at > iterations;
  }));
}

double BlockRecoveryReport::median_q2(std::size_t iteration) const {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (r.steps.empty() || iteration == 0) continue;
    v.push_back(r.steps[std::min(iteration, r.steps.size()) - 1].q2);
  }
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

BlockRecoveryReport run_block_recovery(const BlockRecoveryConfig& config) {
  if (config.replicates == 0 || config.n < 2 || config.iterations == 0 || config.test_points < 2) {
    throw ArgumentError("block-recovery: replicates, n, iterations and test size must be positive");
  }
  const std::size_t D = 6 + config.dummies;
  const auto target = [](std::span<const double> x) { return toy_6d(x); };
  const Design test = lhd(config.test_points, D, mix(config.seed, 7), config.test_design);
  const Vector y_test = evaluate(test.points, target);

  BlockRecoveryReport report;
  report.config = config;
  report.runs.resize(config.replicates);
  parallel_for(config.replicates, workers(config.threads), [&](std::size_t rep) {
    RecoveryRun& run = report.runs[rep];
    run.replicate = rep + 1;
    const std::uint64_t s = mix(config.seed, 500 + rep);
    const Design train = lhd(config.n, D, s, config.train_design);
    const Dataset data(train.points, evaluate(train.points, target));
    MaxModConfig cfg = config.maxmod;
    cfg.max_iterations = config.iterations;
    cfg.eps1 = 0.0;
    cfg.eps2 = 0.0;
    cfg.plateau = false;
    cfg.threads = 1;
    cfg.mle.seed = s;
    const auto t0 = Clock::now();
    const MaxModResult result = run_maxmod(data, cfg, [&](const MaxModState& state) {
      RecoveryStep step;
      step.iteration = state.iteration;
      step.move = state.history.back().move.describe();
      step.partition = state.history.back().partition;
      const Matrix phi = state.model.basis.design_matrix(test.points);
      step.q2 = q2(y_test, phi.transpose() * state.model.xi);
      for (std::size_t v = 6; v < D; ++v) {
        if (state.basis.partition().is_active(v)) ++step.active_dummies;
      }
      if (!run.recovered_at && step.partition == kToyPartition) run.recovered_at = step.iteration;
      if (!run.first_dummy_at && step.active_dummies > 0) run.first_dummy_at = step.iteration;
      run.steps.push_back(std::move(step));
    });
    run.stop_reason = result.stop_reason;
    run.seconds = seconds_since(t0);
  });
  return report;
}

void write_markdown(std::ostream& out, const HdMonotoneReport& report) {
  out << "| D | n | m | baGP mean Q² (%) | bacGP mode Q² (%) | bacGP mean Q² (%) | fit time (s) | total (s) |\n"
      << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : report.summaries) {
    out << "| " << s.dimension << " | " << s.n << " | " << s.basis_size << " | "
        << pct(s.q2_mean_avg, s.q2_mean_sd) << " | " << pct(s.q2_mode_avg, s.q2_mode_sd) << " | "
        << (s.q2_constrained_mean_avg ? pct(*s.q2_constrained_mean_avg, *s.q2_constrained_mean_sd)
                                      : std::string("n/a"))
        << " | " << std::fixed << std::setprecision(3) << s.fit_seconds_avg << " | "
        << std::setprecision(1) << s.total_seconds << " |\n";
    out.unsetf(std::ios::floatfield);
  }
}

void write_csv(std::ostream& out, const HdMonotoneReport& report) {
  out << "dimension,replicate,n,basis_size,q2_mean,q2_mode,q2_constrained_mean,fit_seconds,sample_seconds\n";
  out << std::setprecision(10);
  for (const auto& r : report.rows) {
    out << r.dimension << ',' << r.replicate << ',' << r.n << ',' << r.basis_size << ',' << r.q2_mean
        << ',' << r.q2_mode << ',';
    if (r.q2_constrained_mean) out << *r.q2_constrained_mean;
    out << ',' << r.fit_seconds << ',' << r.sample_seconds << '\n';
  }
}

void write_markdown(std::ostream& out, const BlockRecoveryReport& report) {
  const auto& c = report.config;
  out << "| D | n | replicates | recovered within " << c.iterations << " | dummy-free through 11 |"
      << " median Q² at 12 |\n|---|---|---|---|---|---|\n";
  out << "| " << 6 + c.dummies << " | " << c.n << " | " << report.runs.size() << " | "
      << report.recovered(c.iterations) << "/" << report.runs.size() << " | ";
  if (c.dummies > 0) {
    out << report.dummy_free(11) << "/" << report.runs.size();
  } else {
    out << "n/a";
  }
  out << " | " << std::setprecision(4) << report.median_q2(12) << " |\n\n";
  out << "| iteration | median Q² |\n|---|---|\n";
  for (std::size_t k = 1; k <= c.iterations; ++k) {
    out << "| " << k << " | " << std::setprecision(4) << report.median_q2(k) << " |\n";
  }
}

void write_csv(std::ostream& out, const BlockRecoveryReport& report) {
  out << "replicate,iteration,move,partition,q2,active_dummies\n" << std::setprecision(10);
  for (const auto& r : report.runs) {
    for (const auto& s : r.steps) {
      out << r.replicate << ',' << s.iteration << ",\"" << s.move << "\",\"" << s.partition << "\","
          << s.q2 << ',' << s.active_dummies << '\n';
    }
  }
}

}  // namespace bagp
