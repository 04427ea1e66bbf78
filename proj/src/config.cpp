#include "pqlap/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace pqlap {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + "." + key + ": unknown key");
}

double number(const json& obj, const std::string& where, const std::string& key, double fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(where + "." + key + ": missing required key");
    return fallback;
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

int integer(const json& obj, const std::string& where, const std::string& key, int fallback, int min_value) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  const auto i = v.get<long long>();
  if (i < min_value || i > 1000000000) throw ConfigError(where + "." + key + ": must be >= " + std::to_string(min_value));
  return static_cast<int>(i);
}

std::string text(const json& obj, const std::string& where, const std::string& key, const std::string& fallback,
                 const std::vector<std::string>& choices) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  const auto s = v.get<std::string>();
  if (std::find(choices.begin(), choices.end(), s) == choices.end()) {
    std::string all;
    for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
    throw ConfigError(where + "." + key + ": '" + s + "' is not one of " + all);
  }
  return s;
}

bool flag(const json& obj, const std::string& where, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return obj.at(key).get<bool>();
}

void family(const json& obj, const std::string& where, const std::vector<std::string>& names,
            const std::string& fallback, std::vector<std::string> (*keys)(const std::string&), std::string& name,
            ParamMap& params) {
  reject_unknown(obj, where, {"name", "params"});
  name = text(obj, where, "name", fallback, names);
  params.clear();
  if (!obj.contains("params")) return;
  const auto& p = obj.at("params");
  const auto allowed = keys(name);
  reject_unknown(p, where + ".params", std::set<std::string>(allowed.begin(), allowed.end()));
  for (const auto& [key, value] : p.items()) {
    if (!value.is_number()) throw ConfigError(where + ".params." + key + ": expected a number");
    params[key] = value.get<double>();
  }
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

RunConfig parse_config(const std::string& source) {
  json root;
  try {
    root = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON at " + line_column(source, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  reject_unknown(root, "config", {"problem", "mesh", "solver", "estimates", "output"});
  if (!root.contains("problem")) throw ConfigError("config.problem: missing required block");

  RunConfig cfg;
  const json empty = json::object();
  const auto& pb = root.at("problem");
  reject_unknown(pb, "problem", {"p", "q", "domain", "variant", "regime", "weight", "convection"});
  cfg.spec.p = number(pb, "problem", "p", 0, true);
  cfg.spec.q = number(pb, "problem", "q", 0, true);

  const auto& dom = pb.contains("domain") ? pb.at("domain") : empty;
  reject_unknown(dom, "problem.domain", {"dim", "bounds"});
  const int dim = integer(dom, "problem.domain", "dim", 1, 1);
  if (dim > 2) throw ConfigError("problem.domain.dim: must be 1 or 2");
  std::vector<double> bounds = dim == 1 ? std::vector<double>{0, 1} : std::vector<double>{0, 1, 0, 1};
  if (dom.contains("bounds")) {
    const auto& b = dom.at("bounds");
    if (!b.is_array() || b.size() != bounds.size() ||
        !std::all_of(b.begin(), b.end(), [](const json& x) { return x.is_number(); }))
      throw ConfigError("problem.domain.bounds: expected " + std::to_string(bounds.size()) + " numbers");
    for (std::size_t i = 0; i < bounds.size(); ++i) bounds[i] = b[i].get<double>();
  }
  try {
    cfg.spec.domain = dim == 1 ? Domaind::interval(bounds[0], bounds[1])
                               : Domaind::rectangle(bounds[0], bounds[1], bounds[2], bounds[3]);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem.domain.bounds: ") + e.what());
  }

  cfg.spec.variant = text(pb, "problem", "variant", "competing", {"competing", "cooperative"}) == "competing"
                         ? Variant::competing
                         : Variant::cooperative;
  cfg.spec.regime = text(pb, "problem", "regime", "H3", {"H3", "H3a"}) == "H3" ? Regime::H3 : Regime::H3a;
  family(pb.contains("weight") ? pb.at("weight") : empty, "problem.weight", weight_names(), "constant",
         &weight_param_keys, cfg.weight_name, cfg.weight_params);
  family(pb.contains("convection") ? pb.at("convection") : empty, "problem.convection", convection_names(), "zero",
         &convection_param_keys, cfg.convection_name, cfg.convection_params);
  try {
    cfg.spec.weight = make_weight(cfg.weight_name, cfg.weight_params);
    cfg.spec.convection = make_convection(cfg.convection_name, cfg.convection_params, cfg.spec.p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }

  const auto& mb = root.contains("mesh") ? root.at("mesh") : empty;
  reject_unknown(mb, "mesh", {"base_cells", "levels"});
  cfg.base_cells = integer(mb, "mesh", "base_cells", cfg.base_cells, 2);
  cfg.levels = integer(mb, "mesh", "levels", cfg.levels, 2);
  if (cfg.levels > 16) throw ConfigError("mesh.levels: at most 16");

  const auto& sb = root.contains("solver") ? root.at("solver") : empty;
  reject_unknown(sb, "solver", {"tolerance", "max_iterations", "continuation_steps", "epsilon", "guard_samples"});
  cfg.solver.tolerance = number(sb, "solver", "tolerance", cfg.solver.tolerance);
  if (!(cfg.solver.tolerance > 0)) throw ConfigError("solver.tolerance: must be positive");
  cfg.solver.max_iterations = integer(sb, "solver", "max_iterations", cfg.solver.max_iterations, 0);
  cfg.solver.continuation_steps = integer(sb, "solver", "continuation_steps", cfg.solver.continuation_steps, 1);
  cfg.solver.guard_samples = integer(sb, "solver", "guard_samples", cfg.solver.guard_samples, 0);
  cfg.spec.epsilon = number(sb, "solver", "epsilon", cfg.spec.epsilon);
  if (!(cfg.spec.epsilon >= 0)) throw ConfigError("solver.epsilon: must be >= 0");

  const auto& eb = root.contains("estimates") ? root.at("estimates") : empty;
  reject_unknown(eb, "estimates", {"poincare_convention", "sobolev_samples", "audit_samples", "seed"});
  cfg.estimates.convention = text(eb, "estimates", "poincare_convention", "standard", {"standard", "paper"}) ==
                                     "standard"
                                 ? PoincareConvention::standard
                                 : PoincareConvention::paper;
  cfg.estimates.sobolev_samples = integer(eb, "estimates", "sobolev_samples", cfg.estimates.sobolev_samples, 1);
  cfg.estimates.audit_samples = integer(eb, "estimates", "audit_samples", cfg.estimates.audit_samples, 1);
  if (eb.contains("seed")) {
    if (!eb.at("seed").is_number_unsigned()) throw ConfigError("estimates.seed: expected a non-negative integer");
    cfg.set_seed(eb.at("seed").get<std::uint64_t>());
  } else {
    cfg.set_seed(cfg.seed);
  }

  const auto& ob = root.contains("output") ? root.at("output") : empty;
  reject_unknown(ob, "output", {"solutions", "diagnostics"});
  cfg.write_solutions = flag(ob, "output", "solutions", true);
  cfg.write_diagnostics = flag(ob, "output", "diagnostics", true);

  try {
    cfg.spec.validate();
  } catch (const PreconditionError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }

  json norm;
  norm["problem"] = {{"p", cfg.spec.p},
                     {"q", cfg.spec.q},
                     {"domain", {{"dim", dim}, {"bounds", bounds}}},
                     {"variant", to_string(cfg.spec.variant)},
                     {"regime", to_string(cfg.spec.regime)},
                     {"weight", {{"name", cfg.weight_name}, {"params", cfg.weight_params}}},
                     {"convection", {{"name", cfg.convection_name}, {"params", cfg.convection_params}}}};
  norm["mesh"] = {{"base_cells", cfg.base_cells}, {"levels", cfg.levels}};
  norm["solver"] = {{"tolerance", cfg.solver.tolerance},
                    {"max_iterations", cfg.solver.max_iterations},
                    {"continuation_steps", cfg.solver.continuation_steps},
                    {"epsilon", cfg.spec.epsilon},
                    {"guard_samples", cfg.solver.guard_samples}};
  norm["estimates"] = {{"poincare_convention", to_string(cfg.estimates.convention)},
                       {"sobolev_samples", cfg.estimates.sobolev_samples},
                       {"audit_samples", cfg.estimates.audit_samples},
                       {"seed", cfg.seed}};
  norm["output"] = {{"solutions", cfg.write_solutions}, {"diagnostics", cfg.write_diagnostics}};
  cfg.normalized = norm.dump();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace pqlap
