#include "bagp/maxmod.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "bagp/error.hpp"
#include "bagp/log.hpp"
#include "bagp/parallel.hpp"

namespace bagp {

namespace {

std::string block_text(const Subpartition::Block& block) {
  std::string s = "[";
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(block[i] + 1);
  }
  return s + "]";
}

std::string knot_text(double t) {
  std::ostringstream out;
  out << std::setprecision(12) << t;
  return out.str();
}

double response_scale(const Dataset& data) {
  const double var = data.variance();
  if (var > 0.0) return var;
  const double energy = data.y().squaredNorm() / static_cast<double>(data.size());
  return energy > 0.0 ? energy : 1.0;
}

std::size_t block_index_of(const Subpartition& p, const Subpartition::Block& b) {
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p.block(j) == b) return j;
  }
  throw StructuralError("block " + block_text(b) + " is not part of the partition");
}

}  // namespace

std::string Move::describe() const {
  switch (kind) {
    case MoveKind::activate:
      return "activate(" + std::to_string(variable + 1) + ")";
    case MoveKind::refine:
      return "refine(" + std::to_string(variable + 1) + "," + knot_text(knot) + ")";
    case MoveKind::merge:
      return "merge(" + block_text(first) + "," + block_text(second) + ")";
  }
  return "";
}

std::string describe_partition(const Subpartition& partition) {
  std::string s;
  for (const auto& b : partition.blocks()) {
    s += "{";
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(b[i] + 1);
    }
    s += "}";
  }
  return s.empty() ? "{}" : s;
}

Candidate apply_move(const BasisStructure& basis, const Move& move) {
  const Subpartition& p = basis.partition();
  std::vector<Subdivision> subs = basis.subdivisions();
  Subpartition next;
  switch (move.kind) {
    case MoveKind::activate:
      if (move.variable >= basis.dimension()) throw ArgumentError("activate: variable out of range");
      if (p.is_active(move.variable)) throw StructuralError("activate: variable is already active");
      subs[move.variable] = Subdivision::unit();
      next = p.with_singleton(move.variable);
      break;
    case MoveKind::refine:
      if (move.variable >= basis.dimension()) throw ArgumentError("refine: variable out of range");
      if (!p.is_active(move.variable)) throw StructuralError("refine: variable is inactive");
      subs[move.variable] = subs[move.variable].with_knot(move.knot);
      next = p;
      break;
    case MoveKind::merge: {
      const std::size_t a = block_index_of(p, move.first);
      const std::size_t b = block_index_of(p, move.second);
      if (a == b) throw StructuralError("merge: a block cannot be merged with itself");
      next = p.merged(a, b);
      break;
    }
  }
  Candidate c;
  c.move = move;
  c.basis = BasisStructure(std::move(next), std::move(subs));
  const std::size_t before = basis.size();
  const std::size_t after = c.basis.size();
  c.size_delta = after > before ? after - before : 1;
  return c;
}

std::vector<Candidate> enumerate_candidates(const BasisStructure& basis, const MaxModConfig& config) {
  std::vector<Candidate> out;
  const Subpartition& p = basis.partition();
  const std::size_t D = basis.dimension();
  for (std::size_t i = 0; i < D; ++i) {
    if (!p.is_active(i)) {
      Move m;
      m.kind = MoveKind::activate;
      m.variable = i;
      out.push_back(apply_move(basis, m));
    }
  }
  std::vector<double> grid = config.refine_grid;
  std::sort(grid.begin(), grid.end());
  for (std::size_t i = 0; i < D; ++i) {
    if (!p.is_active(i)) continue;
    std::vector<double> used;
    for (double t : grid) {
      if (!basis.subdivision(i).can_insert(t)) continue;
      if (std::any_of(used.begin(), used.end(),
                      [&](double u) { return std::abs(u - t) < Subdivision::kMinKnotGap; })) {
        continue;
      }
      used.push_back(t);
      Move m;
      m.kind = MoveKind::refine;
      m.variable = i;
      m.knot = t;
      out.push_back(apply_move(basis, m));
    }
  }
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t b = a + 1; b < p.size(); ++b) {
      if (p.block(a).size() + p.block(b).size() > config.merge_cap) continue;
      Move m;
      m.kind = MoveKind::merge;
      m.first = p.block(a);
      m.second = p.block(b);
      out.push_back(apply_move(basis, m));
    }
  }
  return out;
}

double l2mod(const BasisStructure& old_basis, const Vector& old_xi,
             const BasisStructure& new_basis, const Vector& new_xi) {
  if (static_cast<std::size_t>(old_xi.size()) != old_basis.size() ||
      static_cast<std::size_t>(new_xi.size()) != new_basis.size()) {
    throw ArgumentError("l2mod: coefficient length does not match the basis");
  }
  const Vector eta = change_of_basis(old_basis, new_basis, old_xi) - new_xi;
  double quad = 0.0;
  double total = 0.0;
  double squares = 0.0;
  for (std::size_t j = 0; j < new_basis.block_count(); ++j) {
    const auto off = static_cast<Eigen::Index>(new_basis.block_offset(j));
    const auto len = static_cast<Eigen::Index>(new_basis.block_size(j));
    const Vector ej = eta.segment(off, len);
    const SparseMatrix psi = new_basis.block_gram(j);
    quad += ej.dot(psi * ej);
    const double m = new_basis.block_mass(j).dot(ej);
    total += m;
    squares += m * m;
  }
  return std::max(0.0, quad + total * total - squares);
}

double l2mod(const FittedModel& old_model, const FittedModel& new_model) {
  return l2mod(old_model.basis, old_model.xi, new_model.basis, new_model.xi);
}

double se(const FittedModel& model, const Dataset& data) {
  if (data.dimension() != model.dimension()) throw ArgumentError("se: dimension mismatch");
  if (model.basis.size() == 0) return data.y().squaredNorm();
  const Matrix phi = model.basis.design_matrix(data.X());
  return (phi.transpose() * model.xi - data.y()).squaredNorm();
}

double criterion(double l2mod_value, std::size_t size_delta, double se_value, double alpha,
                 double gamma, double se_floor) {
  if (size_delta == 0) throw ArgumentError("criterion: size delta must be at least 1");
  if (!(l2mod_value >= 0.0) || !(se_value >= 0.0)) {
    throw ArgumentError("criterion: L2Mod and SE must be nonnegative");
  }
  if (l2mod_value == 0.0) return 0.0;
  const double s = std::max(se_value, se_floor);
  if (!(s > 0.0) && gamma > 0.0) throw ArgumentError("criterion: SE is zero and no floor is set");
  const double denom = std::pow(static_cast<double>(size_delta), alpha) * std::pow(s, gamma);
  return l2mod_value / denom;
}

KernelParams transfer_params(const BasisStructure& source, const KernelParams& params,
                             const BasisStructure& target, double response_scale) {
  constexpr double kNewTheta = 0.5;
  KernelParams out;
  out.kind = params.kind;
  out.tau2 = source.block_count() == 0 ? 1e-2 * response_scale : params.tau2;
  const Subpartition& sp = source.partition();
  for (std::size_t j = 0; j < target.block_count(); ++j) {
    const auto& vars = target.block_variables(j);
    BlockParams bp;
    bp.sigma2 = 0.0;
    std::vector<std::size_t> seen;
    for (std::size_t v : vars) {
      double theta = kNewTheta;
      if (const auto k = sp.block_of(v)) {
        const auto& svars = sp.block(*k);
        const auto pos = std::find(svars.begin(), svars.end(), v) - svars.begin();
        theta = params.blocks.at(*k).thetas.at(static_cast<std::size_t>(pos));
        if (std::find(seen.begin(), seen.end(), *k) == seen.end()) {
          seen.push_back(*k);
          bp.sigma2 += params.blocks.at(*k).sigma2;
        }
      }
      bp.thetas.push_back(theta);
    }
    if (seen.empty()) bp.sigma2 = response_scale;
    out.blocks.push_back(std::move(bp));
  }
  return out;
}

namespace {

struct Scored {
  bool ok = false;
  std::string error;
  FittedModel model;
  double l2 = 0.0;
  double se = 0.0;
  double value = 0.0;
};

class Runner {
 public:
  Runner(const Dataset& data, const MaxModConfig& config)
      : data_(data), config_(config), scale_(response_scale(data)) {
    var_ = data.variance() > 0.0 ? data.variance() : scale_;
    se_floor_ = 1e-12 * data.y().squaredNorm();
    directions_ = config.directions.value_or(default_directions(data.dimension()));
    if (directions_.size() != data.dimension()) {
      throw ArgumentError("maxmod: expected one direction per input variable");
    }
    fast_ = config.param_mode == ParamMode::fast ||
            (config.param_mode == ParamMode::automatic && data.dimension() > 40);
    threads_ = config.threads == 0 ? default_thread_count() : config.threads;
  }

  double variance() const { return var_; }
  double se_floor() const { return se_floor_; }
  const std::vector<Monotonicity>& directions() const { return directions_; }

  FittedModel empty_model() const {
    FitOptions opts;
    opts.mle = config_.mle;
    return fit_model(BasisStructure::empty(data_.dimension()), data_, directions_, opts);
  }

  // Fit a candidate basis; `full` runs the configured multi-start MLE.
  FittedModel fit(const FittedModel& incumbent, const BasisStructure& basis, bool estimate,
                  std::size_t starts, std::uint64_t seed) const {
    FitOptions opts;
    opts.mle = config_.mle;
    opts.mle.starts = starts;
    opts.mle.seed = seed;
    opts.mle.threads = 1;
    opts.estimate_params = estimate;
    opts.params = transfer_params(incumbent.basis, incumbent.params, basis, scale_);
    opts.path = config_.path;
    opts.qp = config_.qp;
    return fit_model(basis, data_, directions_, opts);
  }

  Scored score(const FittedModel& incumbent, const Candidate& c, std::uint64_t seed) const {
    Scored s;
    try {
      s.model = fit(incumbent, c.basis, !fast_, config_.candidate_restarts, seed);
      s.l2 = l2mod(incumbent, s.model);
      s.se = se(s.model, data_);
      s.value = criterion(s.l2, c.size_delta, s.se, config_.alpha, config_.gamma, se_floor_);
      if (!std::isfinite(s.value)) throw NumericalError("criterion is not finite");
      s.ok = true;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    return s;
  }

  bool fast() const { return fast_; }
  std::size_t threads() const { return threads_; }

 private:
  const Dataset& data_;
  const MaxModConfig& config_;
  double scale_ = 1.0;
  double var_ = 1.0;
  double se_floor_ = 0.0;
  std::vector<Monotonicity> directions_;
  bool fast_ = false;
  std::size_t threads_ = 1;
};

// Golden-section search of the refine knot within the gap around the winner.
void polish_refine(const Runner& runner, const FittedModel& incumbent, Candidate& best,
                   Scored& best_score, std::uint64_t seed) {
  const Subdivision& s = incumbent.basis.subdivision(best.move.variable);
  const double t0 = best.move.knot;
  const std::size_t k = s.cell(t0);
  const double gap = Subdivision::kMinKnotGap * 10.0;
  double a = std::max(s[k] + gap, t0 - 0.05);
  double b = std::min(s[k + 1] - gap, t0 + 0.05);
  if (!(b > a)) return;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  auto eval = [&](double t, Candidate& cand) -> Scored {
    Move m = best.move;
    m.knot = t;
    try {
      cand = apply_move(incumbent.basis, m);
    } catch (const std::exception& e) {
      Scored bad;
      bad.error = e.what();
      return bad;
    }
    return runner.score(incumbent, cand, seed);
  };
  Candidate cc;
  Candidate cd;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  Scored fc = eval(c, cc);
  Scored fd = eval(d, cd);
  for (int it = 0; it < 10; ++it) {
    const double vc = fc.ok ? fc.value : -1.0;
    const double vd = fd.ok ? fd.value : -1.0;
    if (vc >= vd) {
      b = d;
      d = c;
      fd = std::move(fc);
      cd = std::move(cc);
      c = b - r * (b - a);
      fc = eval(c, cc);
    } else {
      a = c;
      c = d;
      fc = std::move(fd);
      cc = std::move(cd);
      d = a + r * (b - a);
      fd = eval(d, cd);
    }
  }
  for (auto* pair : {&fc, &fd}) {
    if (pair->ok && pair->value > best_score.value) {
      best_score = std::move(*pair);
      best = (pair == &fc) ? cc : cd;
    }
  }
}

}  // namespace

MaxModResult run_maxmod(const Dataset& data, const MaxModConfig& config,
                        const IterationObserver& observer) {
  if (data.size() == 0) throw ValidationError("maxmod needs at least one observation");
  if (!(config.alpha >= 0.0) || !(config.gamma >= 0.0)) {
    throw ArgumentError("maxmod: alpha and gamma must be nonnegative");
  }
  const Runner runner(data, config);
  const double eps1 = config.eps1.value_or(1e-4 * runner.variance());
  const double eps2 = config.eps2;

  MaxModState state;
  state.config = config;
  state.model = runner.empty_model();
  state.basis = state.model.basis;

  double c1 = std::numeric_limits<double>::infinity();
  double c2 = std::numeric_limits<double>::infinity();
  std::string stop;
  std::vector<double> se_trace{se(state.model, data)};

  do {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Candidate> cands = enumerate_candidates(state.basis, config);
    if (cands.empty()) {
      stop = "no_candidates";
      break;
    }
    const std::uint64_t seed_base = config.mle.seed + 7919u * (state.iteration + 1);
    std::vector<Scored> scores(cands.size());
    parallel_for(cands.size(), runner.threads(), [&](std::size_t i) {
      scores[i] = runner.score(state.model, cands[i], seed_base + i);
    });

    std::size_t failed = 0;
    std::size_t best = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (!scores[i].ok) {
        ++failed;
        log::debug("candidate " + cands[i].move.describe() + " failed: " + scores[i].error);
        continue;
      }
      if (best == cands.size() || scores[i].value > scores[best].value) best = i;
    }
    if (best == cands.size()) {
      throw NumericalError("every MaxMod candidate failed at iteration " +
                           std::to_string(state.iteration + 1) + ": " + scores.front().error);
    }

    Candidate chosen = cands[best];
    Scored win = std::move(scores[best]);
    if (config.golden_polish && chosen.move.kind == MoveKind::refine) {
      polish_refine(runner, state.model, chosen, win, seed_base);
    }
    if (runner.fast()) {
      // Scoring used the incumbent's parameters; estimate them for the winner.
      FittedModel refit = runner.fit(state.model, chosen.basis, true, config.mle.starts, seed_base);
      win.l2 = l2mod(state.model, refit);
      win.se = se(refit, data);
      win.model = std::move(refit);
    }

    HistoryRow row;
    row.iteration = state.iteration + 1;
    row.move = chosen.move;
    row.l2mod = win.l2;
    row.se = win.se;
    row.criterion = win.value;
    row.c2 = win.se / runner.variance();
    row.basis_size = chosen.basis.size();
    row.partition = describe_partition(chosen.basis.partition());
    row.candidates = cands.size();
    row.failed = failed;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    state.basis = chosen.basis;
    state.model = std::move(win.model);
    state.history.push_back(row);
    ++state.iteration;
    c1 = row.l2mod;
    c2 = row.c2;
    se_trace.push_back(row.se);
    log::info("iteration " + std::to_string(row.iteration) + ": " + row.move.describe() + " " +
              row.partition);
    if (observer) observer(state);

    if (!(c1 > eps1)) {
      stop = "l2mod_below_eps1";
    } else if (!(c2 > eps2)) {
      stop = "se_below_eps2";
    } else if (state.iteration >= config.max_iterations) {
      stop = "max_iterations";
    } else if (config.plateau && se_trace.size() > config.plateau_window) {
      const double past = se_trace[se_trace.size() - 1 - config.plateau_window];
      const double now = se_trace.back();
      if (past > 0.0 && (past - now) / past < config.plateau_tol) stop = "plateau";
    }
  } while (stop.empty());

  MaxModResult result;
  result.model = state.model;
  result.state = std::move(state);
  result.stop_reason = stop;
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "iteration,move,l2mod,se,criterion,c2,basis_size,partition,candidates,failed,wall_seconds\n";
  out << std::setprecision(17);
  for (const auto& r : history) {
    out << r.iteration << ",\"" << r.move.describe() << "\"," << r.l2mod << ',' << r.se << ','
        << r.criterion << ',' << r.c2 << ',' << r.basis_size << ",\"" << r.partition << "\","
        << r.candidates << ',' << r.failed << ',' << r.wall_seconds << '\n';
  }
}

}  // namespace bagp
