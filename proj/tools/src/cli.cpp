#include "bagp/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "bagp/bench.hpp"
#include "bagp/csv.hpp"
#include "bagp/error.hpp"
#include "bagp/fit.hpp"
#include "bagp/log.hpp"
#include "bagp/maxmod.hpp"
#include "bagp/metrics.hpp"
#include "bagp/parallel.hpp"
#include "bagp/sampler.hpp"
#include "bagp/serialize.hpp"

namespace bagp::cli {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ------------------------------------------------------------------ files

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Table load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_table(in, path);
}

void save(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << text;
  if (!f) throw ValidationError("failed writing '" + path + "'");
}

std::string sibling(const std::string& path, const std::string& extension) {
  std::filesystem::path p(path);
  p.replace_extension(extension);
  return p.string();
}

// ------------------------------------------------------------------ parsing helpers

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream s(text);
  while (std::getline(s, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    parts.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return parts;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> v;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || !std::isfinite(x)) {
      throw ValidationError(what + ": '" + part + "' is not a number");
    }
    v.push_back(x);
  }
  return v;
}

std::vector<std::size_t> parse_counts(const std::string& text, const std::string& what) {
  std::vector<std::size_t> v;
  for (double x : parse_doubles(text, what)) {
    if (x < 1 || x != std::floor(x)) throw ValidationError(what + ": expected positive integers");
    v.push_back(static_cast<std::size_t>(x));
  }
  return v;
}

std::vector<Monotonicity> parse_directions(const std::string& text, std::size_t D) {
  if (text.empty()) return default_directions(D);
  const auto parts = split(text, ',');
  if (parts.size() == 1) return std::vector<Monotonicity>(D, parse_monotonicity(parts[0]));
  if (parts.size() != D) {
    throw ValidationError("--directions lists " + std::to_string(parts.size()) + " entries for " +
                          std::to_string(D) + " variables");
  }
  std::vector<Monotonicity> out;
  for (const auto& p : parts) out.push_back(parse_monotonicity(p));
  return out;
}

// "1,3;2" or "{1,3}{2}", 1-based. Empty means one block per variable.
Subpartition parse_blocks(const std::string& text, std::size_t D) {
  std::vector<Subpartition::Block> blocks;
  if (text.empty()) {
    for (std::size_t v = 0; v < D; ++v) blocks.push_back({v});
    return Subpartition(D, blocks);
  }
  std::string t;
  for (char c : text) {
    if (c == '{') continue;
    t += c == '}' ? ';' : c;
  }
  for (const auto& part : split(t, ';')) {
    if (part.empty()) continue;
    Subpartition::Block b;
    for (std::size_t v : parse_counts(part, "--blocks")) {
      if (v > D) throw ValidationError("--blocks: variable " + std::to_string(v) + " exceeds dimension");
      b.push_back(v - 1);
    }
    blocks.push_back(std::move(b));
  }
  try {
    return Subpartition(D, blocks);
  } catch (const ArgumentError& e) {
    throw ValidationError(std::string("--blocks: ") + e.what());
  }
}

BasisStructure make_basis(const Subpartition& partition, const std::string& knots_text) {
  const std::size_t D = partition.dimension();
  auto knots = parse_counts(knots_text, "--knots");
  if (knots.size() == 1) knots.assign(D, knots[0]);
  if (knots.size() != D) throw ValidationError("--knots needs one value or one per variable");
  std::vector<Subdivision> subs(D);
  for (std::size_t v = 0; v < D; ++v) {
    if (knots[v] < 2) throw ValidationError("--knots: at least two knots per variable");
    if (partition.is_active(v)) subs[v] = Subdivision::uniform(knots[v]);
  }
  return BasisStructure(partition, subs);
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BAGP_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ValidationError("BAGP_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return default_thread_count();
}

struct Training {
  Dataset data;
  std::optional<Normalization> normalization;
};

Training load_training(const std::string& path, bool normalize_inputs,
                       const std::optional<Normalization>& fixed = std::nullopt) {
  RawDataset raw = split_response(load_table(path));
  Training t;
  if (fixed) {
    if (fixed->lower.size() != static_cast<std::size_t>(raw.X.cols())) {
      throw ValidationError("data has " + std::to_string(raw.X.cols()) + " inputs, model expects " +
                            std::to_string(fixed->lower.size()));
    }
    raw.X = normalize(*fixed, raw.X, false);
    t.normalization = fixed;
  } else if (normalize_inputs) {
    t.normalization = fit_normalization(raw.X);
    raw.X = normalize(*t.normalization, raw.X, false);
  }
  try {
    t.data = Dataset(std::move(raw.X), std::move(raw.y));
  } catch (const ValidationError& e) {
    if (normalize_inputs || fixed) throw;
    throw ValidationError(std::string(e.what()) + " (pass --normalize to rescale inputs)");
  }
  return t;
}

FittedModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

Vector predictions(const BasisStructure& basis, const Matrix& X, const Vector& coeffs) {
  if (basis.size() == 0) return Vector::Zero(X.rows());
  return basis.design_matrix(X).transpose() * coeffs;
}

json kkt_json(const KktResidual& k) {
  return {{"stationarity", k.stationarity},
          {"feasibility", k.feasibility},
          {"complementarity", k.complementarity},
          {"dual_feasibility", k.dual_feasibility}};
}

json params_json(const BasisStructure& basis, const KernelParams& p) {
  json blocks = json::array();
  for (std::size_t j = 0; j < p.blocks.size(); ++j) {
    json thetas = json::object();
    const auto& vars = basis.block_variables(j);
    for (std::size_t i = 0; i < vars.size(); ++i) thetas[std::to_string(vars[i] + 1)] = p.blocks[j].thetas[i];
    blocks.push_back({{"sigma2", p.blocks[j].sigma2}, {"thetas", thetas}});
  }
  return {{"blocks", blocks}, {"tau2", p.tau2}};
}

// ------------------------------------------------------------------ config and manifests

json typed_value(const std::string& v) {
  if (v.empty()) return v;
  std::size_t used = 0;
  try {
    if (v.find_first_not_of("0123456789") == std::string::npos) {
      const unsigned long long u = std::stoull(v, &used);
      if (used == v.size()) return u;
    }
    if (v[0] == '-' && v.size() > 1 && v.find_first_not_of("0123456789", 1) == std::string::npos) {
      const long long i = std::stoll(v, &used);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  return v;
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_min() == 0; }

std::string option_key(const CLI::Option* opt) {
  const auto& l = opt->get_lnames();
  return l.empty() ? opt->get_name() : l.front();
}

json resolved_config(const CLI::App& sub) {
  json c = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string key = option_key(opt);
    if (key == "help" || key == "config") continue;
    if (is_flag(opt)) {
      c[key] = opt->count() > 0 && opt->as<bool>();
      continue;
    }
    if (opt->count() > 0) {
      c[key] = typed_value(opt->results().back());
    } else {
      const std::string d = opt->get_default_str();
      c[key] = d.empty() ? json(nullptr) : typed_value(d);
    }
  }
  return c;
}

// Splices the entries of a --config JSON file (a flat object, or a manifest
// whose "config" member is one) in front of the command-line options, which
// therefore take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
  std::size_t at = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size() && sub == nullptr; ++i) {
    for (const CLI::App* s : app.get_subcommands({})) {
      if (s->get_name() == args[i]) {
        at = i;
        sub = s;
        break;
      }
    }
  }
  if (sub == nullptr) return args;
  std::vector<std::string> rest;
  std::optional<std::string> path;
  for (std::size_t i = at + 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return args;
  json doc;
  try {
    doc = json::parse(read_file(*path));
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + *path + "': " + e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc.contains("command")) {
    if (doc.at("command") != sub->get_name()) {
      throw ValidationError("config '" + *path + "' is a manifest for '" + doc.at("command").get<std::string>() +
                            "', not '" + sub->get_name() + "'");
    }
    doc = doc.at("config");
  }
  if (!doc.is_object()) throw ValidationError("config '" + *path + "' must be a JSON object");

  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(at) + 1);
  for (const auto& [key, value] : doc.items()) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw ValidationError("unknown config key '" + key + "' for command '" + sub->get_name() + "'");
    }
    if (value.is_null()) continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number()) {
      text = value.dump();
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        text += (i ? "," : "") + (value[i].is_string() ? value[i].get<std::string>() : value[i].dump());
      }
    } else {
      throw ValidationError("config key '" + key + "' has an unsupported value");
    }
    out.push_back("--" + key + "=" + text);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

void write_manifest(const std::string& path, const CLI::App& sub, json outputs, json report,
                    double seconds, std::ostream& out, std::optional<std::size_t> threads = std::nullopt) {
  json m;
  m["command"] = sub.get_name();
  m["version"] = BAGP_VERSION;
  m["model_schema_version"] = kModelSchemaVersion;
  json config = resolved_config(sub);
  if (threads) config["threads"] = *threads;
  m["config"] = std::move(config);
  m["outputs"] = std::move(outputs);
  m["report"] = std::move(report);
  m["wall_seconds"] = seconds;
  save(path, m.dump(2) + "\n", out);
}

// ------------------------------------------------------------------ commands

struct FitArgs {
  std::string data, output, manifest, directions, blocks, knots = "2", path = "auto";
  bool normalize = false, fixed = false;
  double sigma2 = 1.0, theta = 0.5, tau2 = 1e-4;
  std::size_t starts = 5, mle_iterations = 200, threads = 0;
  std::uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto t0 = Clock::now();
  const Training tr = load_training(a.data, a.normalize);
  const std::size_t D = tr.data.dimension();
  const BasisStructure basis = make_basis(parse_blocks(a.blocks, D), a.knots);
  const auto dirs = parse_directions(a.directions, D);
  FitOptions fo;
  fo.mle.starts = a.starts;
  fo.mle.max_iterations = a.mle_iterations;
  fo.mle.seed = a.seed;
  const std::size_t threads = resolve_threads(a.threads);
  fo.mle.threads = threads;
  fo.path = a.path == "direct" ? MeanPath::direct : a.path == "woodbury" ? MeanPath::woodbury : MeanPath::automatic;
  if (a.fixed) {
    fo.estimate_params = false;
    fo.params = KernelParams::uniform(basis, a.sigma2, a.theta, a.tau2);
  }
  FittedModel model = fit_model(basis, tr.data, dirs, fo);
  model.normalization = tr.normalization;
  save(a.output, model_to_json(model) + "\n", out);

  json report;
  report["basis_size"] = basis.size();
  report["partition"] = describe_partition(basis.partition());
  report["nll"] = model.diagnostics.nll;
  report["kkt"] = kkt_json(model.diagnostics.kkt);
  report["qp_method"] = to_string(model.diagnostics.qp_method);
  report["qp_iterations"] = model.diagnostics.qp_iterations;
  report["active_constraints"] = model.diagnostics.active_constraints;
  report["tau2_clamped"] = model.diagnostics.tau2_clamped;
  report["params"] = params_json(basis, model.params);
  if (tr.data.variance() > 0.0) {
    report["q2_train"] = q2(tr.data.y(), predictions(basis, tr.data.X(), model.xi));
  }
  const double t = since(t0);
  report["fit_seconds"] = model.diagnostics.wall_seconds;
  const std::string manifest = a.manifest.empty() ? sibling(a.output, ".manifest.json") : a.manifest;
  write_manifest(manifest, sub, {{"model", a.output}, {"manifest", manifest}}, report, t, out, threads);
  if (a.output != "-") {
    out << "fit: " << basis.size() << " basis functions, nll " << model.diagnostics.nll << ", model written to "
        << a.output << "\n";
  }
  return kExitOk;
}

struct MaxModArgs {
  std::string data, output, history, manifest, directions, refine_grid = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  std::string param_mode = "auto";
  bool normalize = false, golden_polish = false, plateau = false, quiet = false;
  double alpha = 1.4, gamma = 0.5, eps1 = 0.0, eps2 = 1e-3, plateau_tol = 1e-2;
  std::size_t max_iterations = 30, merge_cap = 4, candidate_restarts = 0, starts = 5, mle_iterations = 200,
              threads = 0, plateau_window = 3;
  std::uint64_t seed = 0;
  CLI::Option* eps1_opt = nullptr;
};

int cmd_maxmod(const MaxModArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto t0 = Clock::now();
  const Training tr = load_training(a.data, a.normalize);
  const std::size_t D = tr.data.dimension();
  MaxModConfig cfg;
  cfg.alpha = a.alpha;
  cfg.gamma = a.gamma;
  if (a.eps1_opt->count() > 0) cfg.eps1 = a.eps1;
  cfg.eps2 = a.eps2;
  if (a.max_iterations == 0) throw ValidationError("--max-iterations must be at least 1");
  cfg.max_iterations = a.max_iterations;
  cfg.refine_grid = parse_doubles(a.refine_grid, "--refine-grid");
  cfg.golden_polish = a.golden_polish;
  cfg.merge_cap = a.merge_cap;
  cfg.param_mode = a.param_mode == "refit" ? ParamMode::refit : a.param_mode == "fast" ? ParamMode::fast
                                                                                        : ParamMode::automatic;
  cfg.candidate_restarts = a.candidate_restarts;
  cfg.mle.starts = a.starts;
  cfg.mle.max_iterations = a.mle_iterations;
  cfg.mle.seed = a.seed;
  cfg.directions = parse_directions(a.directions, D);
  const std::size_t threads = resolve_threads(a.threads);
  cfg.threads = threads;
  cfg.plateau = a.plateau;
  cfg.plateau_window = a.plateau_window;
  cfg.plateau_tol = a.plateau_tol;

  const MaxModResult result = run_maxmod(tr.data, cfg, [&](const MaxModState& s) {
    if (a.quiet) return;
    const HistoryRow& r = s.history.back();
    out << "iteration " << r.iteration << ": " << r.move.describe() << " -> " << r.partition << ", |L| = "
        << r.basis_size << ", criterion " << r.criterion << ", c2 " << r.c2 << "\n";
  });
  FittedModel model = result.model;
  model.normalization = tr.normalization;
  save(a.output, model_to_json(model) + "\n", out);
  const std::string history = a.history.empty() ? sibling(a.output, ".history.csv") : a.history;
  std::ostringstream h;
  write_history_csv(h, result.state.history);
  save(history, h.str(), out);

  json report;
  report["stop_reason"] = result.stop_reason;
  report["iterations"] = result.state.iteration;
  report["partition"] = describe_partition(model.basis.partition());
  report["basis_size"] = model.basis.size();
  report["nll"] = model.diagnostics.nll;
  report["kkt"] = kkt_json(model.diagnostics.kkt);
  report["params"] = params_json(model.basis, model.params);
  if (!result.state.history.empty()) report["c2"] = result.state.history.back().c2;
  const std::string manifest = a.manifest.empty() ? sibling(a.output, ".manifest.json") : a.manifest;
  write_manifest(manifest, sub, {{"model", a.output}, {"history", history}, {"manifest", manifest}}, report,
                 since(t0), out, threads);
  if (!a.quiet) out << "maxmod: stopped (" << result.stop_reason << ") with partition " << report["partition"].get<std::string>() << "\n";
  return kExitOk;
}

struct PredictArgs {
  std::string model, points, output = "-", manifest;
  bool blocks = false, clamp = false, mean = false;
};

int cmd_predict(const PredictArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto t0 = Clock::now();
  FittedModel model = load_model(a.model);
  Table t = load_table(a.points);
  Matrix X = t.values;
  if (!t.header.empty()) {
    const auto it = std::find(t.header.begin(), t.header.end(), "y");
    if (it != t.header.end()) {
      const auto col = static_cast<Eigen::Index>(it - t.header.begin());
      Matrix keep(X.rows(), X.cols() - 1);
      for (Eigen::Index c = 0, k = 0; c < X.cols(); ++c) {
        if (c != col) keep.col(k++) = X.col(c);
      }
      X = keep;
    }
  }
  const std::size_t D = model.dimension();
  if (static_cast<std::size_t>(X.cols()) != D) {
    throw ValidationError("points have " + std::to_string(X.cols()) + " input columns, model expects " +
                          std::to_string(D));
  }
  if (model.normalization) {
    X = normalize(*model.normalization, X, a.clamp);
  } else if (a.clamp) {
    X = X.cwiseMax(0.0).cwiseMin(1.0);
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      if (!(X(i, c) >= 0.0 && X(i, c) <= 1.0)) {
        throw ValidationError("point row " + std::to_string(i + 1) + ", x" + std::to_string(c + 1) +
                              " is outside the unit cube (pass --clamp)");
      }
    }
  }
  if (a.mean) model.xi = model.mu;
  const Vector y = predictions(model.basis, X, model.xi);
  std::vector<std::string> header{"y"};
  Matrix values = y;
  if (a.blocks) {
    const BlockPredictors bp(model);
    values.conservativeResize(X.rows(), static_cast<Eigen::Index>(1 + bp.size()));
    std::vector<double> row(D);
    for (std::size_t j = 0; j < bp.size(); ++j) header.push_back("block" + std::to_string(j + 1));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (std::size_t d = 0; d < D; ++d) row[d] = X(i, static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < bp.size(); ++j) values(i, static_cast<Eigen::Index>(j + 1)) = bp(j, row);
    }
  }
  std::ostringstream s;
  write_table(s, values, header);
  save(a.output, s.str(), out);
  const std::string manifest =
      !a.manifest.empty() ? a.manifest : a.output == "-" ? std::string() : sibling(a.output, ".manifest.json");
  if (!manifest.empty()) {
    write_manifest(manifest, sub, {{"predictions", a.output}, {"manifest", manifest}},
                   {{"rows", X.rows()}, {"columns", header}}, since(t0), out);
  }
  return kExitOk;
}

struct SampleArgs {
  std::string model, data, output, manifest, sampler = "hmc";
  std::size_t draws = 0, burn_in = 0;
  std::uint64_t seed = 0;
  CLI::Option* burn_in_opt = nullptr;
};

int cmd_sample(const SampleArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto t0 = Clock::now();
  if (a.draws == 0) throw ValidationError("--draws must be at least 1");
  const FittedModel model = load_model(a.model);
  const Training tr = load_training(a.data, false, model.normalization);
  if (tr.data.dimension() != model.dimension()) {
    throw ValidationError("data has " + std::to_string(tr.data.dimension()) + " inputs, model expects " +
                          std::to_string(model.dimension()));
  }
  if (model.basis.size() == 0) throw ValidationError("the model has no active variable to sample");
  const PriorCov prior(model.basis, model.params);
  const Posterior post = condition(model.basis, prior, tr.data, model.params.tau2);
  SamplerOptions so;
  so.kind = a.sampler == "gibbs" ? SamplerKind::gibbs : SamplerKind::hmc;
  if (a.burn_in_opt->count() > 0) so.burn_in = a.burn_in;
  const SampleBatch batch = sample_truncated(post, model.constraints, model.xi, a.draws, a.seed, so);
  std::ostringstream s;
  write_samples_csv(s, batch);
  save(a.output, s.str(), out);
  const auto& d = batch.diagnostics;
  const json report{{"draws", batch.size()},
                    {"burn_in", batch.burn_in},
                    {"iterations", d.iterations},
                    {"bounces", d.bounces},
                    {"gibbs_fallbacks", d.gibbs_fallbacks},
                    {"used_gibbs", d.used_gibbs},
                    {"max_violation", d.max_violation}};
  const std::string manifest = a.manifest.empty() ? sibling(a.output, ".manifest.json") : a.manifest;
  write_manifest(manifest, sub, {{"samples", a.output}, {"manifest", manifest}}, report, since(t0), out);
  if (a.output != "-") out << "sample: " << batch.size() << " draws written to " << a.output << "\n";
  return kExitOk;
}

struct CheckArgs {
  std::string model, samples;
  double tol = 1e-8;
};

int cmd_check(const CheckArgs& a, const CLI::App& sub, std::ostream& out) {
  const FittedModel model = load_model(a.model);
  json report;
  const double mode_violation = model.constraints.max_violation(model.xi);
  report["constraints"] = model.constraints.size();
  report["mode_violation"] = mode_violation;
  bool ok = mode_violation <= a.tol;
  if (!a.samples.empty()) {
    const Table t = load_table(a.samples);
    if (static_cast<std::size_t>(t.values.cols()) != model.basis.size()) {
      throw ValidationError("samples have " + std::to_string(t.values.cols()) + " columns, model has " +
                            std::to_string(model.basis.size()) + " coefficients");
    }
    std::size_t bad = 0;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      const double v = model.constraints.max_violation(t.values.row(i).transpose());
      worst = std::max(worst, v);
      if (v > a.tol) ++bad;
    }
    report["rows"] = t.values.rows();
    report["infeasible_rows"] = bad;
    report["max_violation"] = worst;
    ok = ok && bad == 0;
  }
  report["pass"] = ok;
  json m{{"command", sub.get_name()}, {"version", BAGP_VERSION}, {"config", resolved_config(sub)}, {"report", report}};
  out << m.dump(2) << "\n";
  return ok ? kExitOk : kExitNumerical;
}

struct BenchArgs {
  std::string suite, dims = "10,20", out_dir = ".";
  std::size_t replicates = 10, knots = 6, n_per_dim = 3, test_points = 10000, draws = 0, n = 42, dummies = 0,
              iterations = 15, starts = 5, threads = 0;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto t0 = Clock::now();
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  const std::size_t threads = resolve_threads(a.threads);
  std::ostringstream md, csv;
  json report;
  if (a.suite == "hd-monotone") {
    HdMonotoneConfig c;
    c.dimensions = parse_counts(a.dims, "--dims");
    c.replicates = a.replicates;
    c.knots = a.knots;
    c.n_per_dimension = a.n_per_dim;
    c.test_points = a.test_points;
    c.sample_draws = a.draws;
    c.seed = a.seed;
    c.mle.starts = a.starts;
    c.threads = threads;
    const HdMonotoneReport r = run_hd_monotone(c);
    write_markdown(md, r);
    write_csv(csv, r);
    for (const auto& s : r.summaries) {
      json row{{"dimension", s.dimension}, {"n", s.n}, {"basis_size", s.basis_size},
               {"q2_mean", {s.q2_mean_avg, s.q2_mean_sd}}, {"q2_mode", {s.q2_mode_avg, s.q2_mode_sd}},
               {"fit_seconds_avg", s.fit_seconds_avg}, {"total_seconds", s.total_seconds}};
      if (s.q2_constrained_mean_avg) row["q2_constrained_mean"] = {*s.q2_constrained_mean_avg, *s.q2_constrained_mean_sd};
      report["summaries"].push_back(row);
    }
  } else {
    BlockRecoveryConfig c;
    c.replicates = a.replicates;
    c.n = a.n;
    c.dummies = a.dummies;
    c.iterations = a.iterations;
    c.test_points = a.test_points;
    c.seed = a.seed;
    c.maxmod.mle.starts = a.starts;
    c.threads = threads;
    const BlockRecoveryReport r = run_block_recovery(c);
    write_markdown(md, r);
    write_csv(csv, r);
    report["recovered"] = r.recovered(a.iterations);
    report["replicates"] = r.runs.size();
    if (a.dummies > 0) report["dummy_free_through_11"] = r.dummy_free(11);
    json med = json::array();
    for (std::size_t k = 1; k <= a.iterations; ++k) med.push_back(r.median_q2(k));
    report["median_q2"] = med;
  }
  const std::string md_path = (dir / (a.suite + ".md")).string();
  const std::string csv_path = (dir / (a.suite + ".csv")).string();
  const std::string manifest = (dir / (a.suite + ".manifest.json")).string();
  save(md_path, md.str(), out);
  save(csv_path, csv.str(), out);
  write_manifest(manifest, sub, {{"markdown", md_path}, {"csv", csv_path}, {"manifest", manifest}}, report,
                 since(t0), out, threads);
  out << md.str();
  return kExitOk;
}

struct DesignArgs {
  std::string kind = "maximin", function = "none", output = "-", manifest;
  std::size_t n = 0, dim = 0, restarts = 50;
  std::uint64_t seed = 0;
};

int cmd_gen_design(const DesignArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto t0 = Clock::now();
  if (a.n == 0 || a.dim == 0) throw ValidationError("--n and --dim must be positive");
  const Design d = lhd(a.n, a.dim, a.seed, parse_design_kind(a.kind), a.restarts);
  std::ostringstream s;
  if (a.function == "none") {
    write_table(s, d.points, input_header(a.dim));
  } else {
    Vector y(d.points.rows());
    std::vector<double> row(a.dim);
    for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
      for (std::size_t c = 0; c < a.dim; ++c) row[c] = d.points(i, static_cast<Eigen::Index>(c));
      y[i] = a.function == "block-arctan" ? toy_block_arctan(a.dim, row) : toy_6d(row);
    }
    write_dataset(s, d.points, y);
  }
  save(a.output, s.str(), out);
  const std::string manifest =
      !a.manifest.empty() ? a.manifest : a.output == "-" ? std::string() : sibling(a.output, ".manifest.json");
  if (!manifest.empty()) {
    write_manifest(manifest, sub, {{"design", a.output}, {"manifest", manifest}},
                   {{"min_distance", std::sqrt(min_squared_distance(d.points))}}, since(t0), out);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"bagp: block-additive Gaussian processes under monotonicity constraints"};
  app.set_version_flag("--version", std::string(BAGP_VERSION));
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  const auto add_config = [](CLI::App* s) {
    // Consumed before parsing; declared so it shows in --help.
    s->add_option("--config", "JSON file of option values (or a manifest to replay)");
  };

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "Estimate parameters and fit the constrained mode");
  fit->add_option("--data", fa.data, "Training CSV with columns x1..xD and y")->required()->check(CLI::ExistingFile);
  fit->add_option("--output", fa.output, "Model JSON to write")->required();
  fit->add_option("--manifest", fa.manifest, "Manifest path (default: next to the model)");
  fit->add_flag("--normalize", fa.normalize, "Min-max normalize inputs and record the bounds");
  fit->add_option("--directions", fa.directions, "increasing, decreasing or none, one or per variable");
  fit->add_option("--blocks", fa.blocks, "Partition such as 1,3;2 or {1,3}{2} (default: one block per variable)");
  fit->add_option("--knots", fa.knots, "Uniform knots per variable: one count or one per variable");
  fit->add_flag("--fixed", fa.fixed, "Skip maximum likelihood and use --sigma2/--theta/--tau2");
  fit->add_option("--sigma2", fa.sigma2, "Block variance for --fixed")->check(CLI::PositiveNumber);
  fit->add_option("--theta", fa.theta, "Length-scale for --fixed")->check(CLI::PositiveNumber);
  fit->add_option("--tau2", fa.tau2, "Noise variance for --fixed")->check(CLI::PositiveNumber);
  fit->add_option("--starts", fa.starts, "Space-filling likelihood starts besides the reference start");
  fit->add_option("--mle-iterations", fa.mle_iterations, "Optimizer iterations per start");
  fit->add_option("--seed", fa.seed, "Seed for the likelihood starts");
  fit->add_option("--path", fa.path, "Posterior mean path")->check(CLI::IsMember({"auto", "direct", "woodbury"}));
  fit->add_option("--threads", fa.threads, "Worker threads (0: BAGP_THREADS or all cores)");
  add_config(fit);

  MaxModArgs ma;
  CLI::App* maxmod = app.add_subcommand("maxmod", "Select the partition and knots by MaxMod");
  maxmod->add_option("--data", ma.data, "Training CSV with columns x1..xD and y")->required()->check(CLI::ExistingFile);
  maxmod->add_option("--output", ma.output, "Final model JSON")->required();
  maxmod->add_option("--history", ma.history, "Per-iteration CSV (default: next to the model)");
  maxmod->add_option("--manifest", ma.manifest, "Manifest path (default: next to the model)");
  maxmod->add_flag("--normalize", ma.normalize, "Min-max normalize inputs and record the bounds");
  maxmod->add_option("--directions", ma.directions, "increasing, decreasing or none, one or per variable");
  maxmod->add_option("--alpha", ma.alpha, "Exponent on the basis size increase");
  maxmod->add_option("--gamma", ma.gamma, "Exponent on the squared error");
  ma.eps1_opt = maxmod->add_option("--eps1", ma.eps1, "Stop when L2Mod falls below (default 1e-4 var(y))");
  maxmod->add_option("--eps2", ma.eps2, "Stop when SE / VAR(y) falls below");
  maxmod->add_option("--max-iterations", ma.max_iterations, "Iteration cap M");
  maxmod->add_option("--refine-grid", ma.refine_grid, "Candidate knot positions, comma separated");
  maxmod->add_flag("--golden-polish", ma.golden_polish, "Polish the winning knot by golden-section search");
  maxmod->add_option("--merge-cap", ma.merge_cap, "Largest block a merge may create");
  maxmod->add_option("--param-mode", ma.param_mode, "Candidate parameters: refit, fast or auto")
      ->check(CLI::IsMember({"auto", "refit", "fast"}));
  maxmod->add_option("--candidate-restarts", ma.candidate_restarts, "Extra likelihood starts per candidate");
  maxmod->add_option("--starts", ma.starts, "Likelihood starts for the first fit and fast-mode winners");
  maxmod->add_option("--mle-iterations", ma.mle_iterations, "Optimizer iterations per start");
  maxmod->add_option("--seed", ma.seed, "Seed for the likelihood starts");
  maxmod->add_option("--threads", ma.threads, "Worker threads (0: BAGP_THREADS or all cores)");
  maxmod->add_flag("--plateau", ma.plateau, "Stop when SE stops improving");
  maxmod->add_option("--plateau-window", ma.plateau_window, "Iterations watched by the plateau rule");
  maxmod->add_option("--plateau-tol", ma.plateau_tol, "Relative SE improvement counted as progress");
  maxmod->add_flag("--quiet", ma.quiet, "No per-iteration output");
  add_config(maxmod);

  PredictArgs pa;
  CLI::App* predict = app.add_subcommand("predict", "Evaluate a fitted model");
  predict->add_option("--model", pa.model, "Model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--points", pa.points, "CSV of input points")->required()->check(CLI::ExistingFile);
  predict->add_option("--output", pa.output, "Predictions CSV, - for stdout");
  predict->add_option("--manifest", pa.manifest, "Manifest path (default: next to the output file)");
  predict->add_flag("--blocks", pa.blocks, "Add one centered column per block");
  predict->add_flag("--clamp", pa.clamp, "Clamp points into the training domain");
  predict->add_flag("--mean", pa.mean, "Use the unconstrained posterior mean instead of the mode");
  add_config(predict);

  SampleArgs sa;
  CLI::App* sample = app.add_subcommand("sample", "Draw knot values from the constrained posterior");
  sample->add_option("--model", sa.model, "Model JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("--data", sa.data, "Training CSV the model was fitted on")->required()->check(CLI::ExistingFile);
  sample->add_option("--draws", sa.draws, "Number of draws N")->required();
  sample->add_option("--seed", sa.seed, "Sampler seed");
  sample->add_option("--sampler", sa.sampler, "hmc or gibbs")->check(CLI::IsMember({"hmc", "gibbs"}));
  sa.burn_in_opt = sample->add_option("--burn-in", sa.burn_in, "Discarded draws (default min(100, N/10))");
  sample->add_option("--output", sa.output, "Samples CSV")->required();
  sample->add_option("--manifest", sa.manifest, "Manifest path (default: next to the samples)");
  add_config(sample);

  CheckArgs ca;
  CLI::App* check = app.add_subcommand("check", "Verify that a model and its draws satisfy the constraints");
  check->add_option("--model", ca.model, "Model JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--samples", ca.samples, "Samples CSV from `bagp sample`")->check(CLI::ExistingFile);
  check->add_option("--tol", ca.tol, "Largest accepted violation")->check(CLI::NonNegativeNumber);
  add_config(check);

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "Run a synthetic benchmark suite");
  bench->add_option("suite,--suite", ba.suite, "hd-monotone or block-recovery")
      ->required()
      ->check(CLI::IsMember({"hd-monotone", "block-recovery"}));
  bench->add_option("--dims", ba.dims, "hd-monotone: even dimensions, comma separated");
  bench->add_option("--replicates", ba.replicates, "Replicates per setting");
  bench->add_option("--knots", ba.knots, "hd-monotone: knots per variable");
  bench->add_option("--n-per-dim", ba.n_per_dim, "hd-monotone: training points per dimension");
  bench->add_option("--test-points", ba.test_points, "Size of the Q2 test design");
  bench->add_option("--draws", ba.draws, "hd-monotone: posterior draws for the constrained mean (0 skips)");
  bench->add_option("--n", ba.n, "block-recovery: training points");
  bench->add_option("--dummies", ba.dummies, "block-recovery: irrelevant variables appended");
  bench->add_option("--iterations", ba.iterations, "block-recovery: MaxMod iterations");
  bench->add_option("--starts", ba.starts, "Likelihood starts");
  bench->add_option("--seed", ba.seed, "Base seed");
  bench->add_option("--out-dir", ba.out_dir, "Directory for the markdown, CSV and manifest");
  bench->add_option("--threads", ba.threads, "Replicates run concurrently (0: BAGP_THREADS or all cores)");
  add_config(bench);

  DesignArgs da;
  CLI::App* design = app.add_subcommand("gen-design", "Write a Latin hypercube design, optionally with a response");
  design->add_option("--n", da.n, "Number of points")->required();
  design->add_option("--dim", da.dim, "Dimension")->required();
  design->add_option("--kind", da.kind, "maximin, random or uniform")
      ->check(CLI::IsMember({"maximin", "random", "uniform"}));
  design->add_option("--restarts", da.restarts, "Random designs compared by the maximin rule");
  design->add_option("--seed", da.seed, "Design seed");
  design->add_option("--function", da.function, "Response: none, block-arctan or toy6d")
      ->check(CLI::IsMember({"none", "block-arctan", "toy6d"}));
  design->add_option("--output", da.output, "CSV path, - for stdout");
  design->add_option("--manifest", da.manifest, "Manifest path (default: next to the output file)");
  add_config(design);

  try {
    std::vector<std::string> expanded = expand_config(args, app);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
    log::set_level(log_level == "debug"  ? log::Level::debug
                   : log_level == "info" ? log::Level::info
                   : log_level == "error" ? log::Level::error
                   : log_level == "off"   ? log::Level::off
                                          : log::Level::warn);
    if (fit->parsed()) return cmd_fit(fa, *fit, out);
    if (maxmod->parsed()) return cmd_maxmod(ma, *maxmod, out);
    if (predict->parsed()) return cmd_predict(pa, *predict, out);
    if (sample->parsed()) return cmd_sample(sa, *sample, out);
    if (check->parsed()) return cmd_check(ca, *check, out);
    if (bench->parsed()) return cmd_bench(ba, *bench, out);
    if (design->parsed()) return cmd_gen_design(da, *design, out);
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ArgumentError& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitValidation;
  } catch (const StructuralError& e) {
    err << "invalid structure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "invalid JSON: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bagp::cli
