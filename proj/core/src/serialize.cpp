#include "bagp/serialize.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "bagp/error.hpp"

namespace bagp {

using nlohmann::json;

namespace {

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from(const json& a, const char* what) {
  if (!a.is_array()) throw ValidationError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ValidationError(std::string(what) + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string("model document is missing '") + key + "'");
  }
  return obj.at(key);
}

}  // namespace

std::string model_to_json(const FittedModel& model, int indent) {
  const BasisStructure& basis = model.basis;
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["dimension"] = basis.dimension();

  json blocks = json::array();
  json params = json::array();
  for (std::size_t j = 0; j < basis.block_count(); ++j) {
    json vars = json::array();
    json thetas = json::object();
    for (std::size_t i = 0; i < basis.block_variables(j).size(); ++i) {
      const std::size_t v = basis.block_variables(j)[i];
      vars.push_back(v + 1);
      thetas[std::to_string(v + 1)] = model.params.blocks.at(j).thetas.at(i);
    }
    blocks.push_back(vars);
    params.push_back({{"sigma2", model.params.blocks.at(j).sigma2}, {"thetas", thetas}});
  }
  doc["blocks"] = blocks;

  json subs = json::object();
  for (std::size_t v = 0; v < basis.dimension(); ++v) {
    const Subdivision& s = basis.subdivision(v);
    if (s.empty()) continue;
    subs[std::to_string(v + 1)] = std::vector<double>(s.knots().begin(), s.knots().end());
  }
  doc["subdivisions"] = subs;
  doc["params"] = {{"kernel", "matern52"}, {"blocks", params}, {"tau2", model.params.tau2}};
  doc["xi"] = vector_json(model.xi);
  doc["mu"] = vector_json(model.mu);

  json dirs = json::array();
  for (Monotonicity m : model.directions) dirs.push_back(to_string(m));
  doc["directions"] = dirs;

  if (model.normalization) {
    doc["normalization"] = {{"lower", model.normalization->lower},
                            {"upper", model.normalization->upper}};
  } else {
    doc["normalization"] = nullptr;
  }
  doc["diagnostics"] = {{"nll", model.diagnostics.nll},
                        {"qp_method", to_string(model.diagnostics.qp_method)},
                        {"qp_iterations", model.diagnostics.qp_iterations},
                        {"active_constraints", model.diagnostics.active_constraints},
                        {"kkt", {{"stationarity", model.diagnostics.kkt.stationarity},
                                {"feasibility", model.diagnostics.kkt.feasibility},
                                {"complementarity", model.diagnostics.kkt.complementarity},
                                {"dual_feasibility", model.diagnostics.kkt.dual_feasibility}}},
                        {"tau2_clamped", model.diagnostics.tau2_clamped}};
  // dump() emits the shortest representation that round-trips each double.
  return doc.dump(indent);
}

FittedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
  try {
    const int version = field(doc, "schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw ValidationError("unsupported model schema version " + std::to_string(version));
    }
    const auto D = field(doc, "dimension").get<std::size_t>();
    if (D == 0) throw ValidationError("model dimension must be positive");

    std::vector<Subpartition::Block> blocks;
    for (const auto& b : field(doc, "blocks")) {
      Subpartition::Block block;
      for (const auto& v : b) {
        const auto var = v.get<std::size_t>();
        if (var < 1 || var > D) throw ValidationError("block variable out of range");
        block.push_back(var - 1);
      }
      blocks.push_back(std::move(block));
    }
    std::vector<Subdivision> subs(D);
    for (const auto& [key, knots] : field(doc, "subdivisions").items()) {
      const std::size_t var = std::stoul(key);
      if (var < 1 || var > D) throw ValidationError("subdivision variable out of range");
      subs[var - 1] = Subdivision(knots.get<std::vector<double>>());
    }

    FittedModel model;
    try {
      model.basis = BasisStructure(Subpartition(D, blocks), std::move(subs));
    } catch (const std::exception& e) {
      throw ValidationError(std::string("inconsistent model structure: ") + e.what());
    }

    const json& params = field(doc, "params");
    const json& pblocks = field(params, "blocks");
    if (pblocks.size() != model.basis.block_count()) {
      throw ValidationError("one parameter entry per block is required");
    }
    for (std::size_t j = 0; j < model.basis.block_count(); ++j) {
      BlockParams bp;
      bp.sigma2 = field(pblocks[j], "sigma2").get<double>();
      const json& thetas = field(pblocks[j], "thetas");
      for (std::size_t v : model.basis.block_variables(j)) {
        const std::string key = std::to_string(v + 1);
        if (!thetas.contains(key)) throw ValidationError("missing length-scale for variable " + key);
        bp.thetas.push_back(thetas.at(key).get<double>());
      }
      model.params.blocks.push_back(std::move(bp));
    }
    model.params.tau2 = field(params, "tau2").get<double>();
    try {
      model.params.validate(model.basis);
    } catch (const ArgumentError& e) {
      throw ValidationError(e.what());
    }

    model.xi = vector_from(field(doc, "xi"), "xi");
    model.mu = doc.contains("mu") ? vector_from(doc.at("mu"), "mu") : model.xi;
    if (static_cast<std::size_t>(model.xi.size()) != model.basis.size() ||
        static_cast<std::size_t>(model.mu.size()) != model.basis.size()) {
      throw ValidationError("coefficient vectors do not match the basis size");
    }
    for (const auto& d : field(doc, "directions")) {
      model.directions.push_back(parse_monotonicity(d.get<std::string>()));
    }
    if (model.directions.size() != D) throw ValidationError("one direction per variable is required");
    model.constraints = build_monotone_constraints(model.basis, model.directions);

    if (doc.contains("normalization") && !doc.at("normalization").is_null()) {
      Normalization n;
      n.lower = field(doc.at("normalization"), "lower").get<std::vector<double>>();
      n.upper = field(doc.at("normalization"), "upper").get<std::vector<double>>();
      if (n.lower.size() != D || n.upper.size() != D) {
        throw ValidationError("normalization bounds must have one entry per variable");
      }
      model.normalization = std::move(n);
    }
    if (doc.contains("diagnostics")) {
      const json& dg = doc.at("diagnostics");
      if (dg.contains("nll")) model.diagnostics.nll = dg.at("nll").get<double>();
      if (dg.contains("tau2_clamped")) model.diagnostics.tau2_clamped = dg.at("tau2_clamped").get<bool>();
      if (dg.contains("qp_method")) {
        const auto m = dg.at("qp_method").get<std::string>();
        bool known = false;
        for (QpMethod q : {QpMethod::unconstrained, QpMethod::active_set, QpMethod::interior_point}) {
          if (m == to_string(q)) {
            model.diagnostics.qp_method = q;
            known = true;
          }
        }
        if (!known) throw ValidationError("model JSON: unknown qp_method '" + m + "'");
      }
      if (dg.contains("qp_iterations")) model.diagnostics.qp_iterations = dg.at("qp_iterations").get<std::size_t>();
      if (dg.contains("active_constraints")) {
        model.diagnostics.active_constraints = dg.at("active_constraints").get<std::size_t>();
      }
      if (dg.contains("kkt")) {
        const json& k = dg.at("kkt");
        model.diagnostics.kkt.stationarity = k.value("stationarity", 0.0);
        model.diagnostics.kkt.feasibility = k.value("feasibility", 0.0);
        model.diagnostics.kkt.complementarity = k.value("complementarity", 0.0);
        model.diagnostics.kkt.dual_feasibility = k.value("dual_feasibility", 0.0);
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace bagp
