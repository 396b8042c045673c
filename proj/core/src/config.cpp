#include "qcons/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "qcons/errors.hpp"

namespace qcons {

namespace {

using nlohmann::json;

/// Typed access to one JSON object with path-qualified errors.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : j_.items())
      if (!allowed.contains(key)) throw ConfigError(path_ + "/" + key, "unknown field");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string at(const char* key) const { return path_ + "/" + key; }

  double number(const char* key, double fallback, bool positive = true) const {
    if (!has(key)) return fallback;
    return as_number(j_.at(key), at(key), positive);
  }

  std::size_t count(const char* key, std::size_t fallback, std::size_t minimum = 1) const {
    if (!has(key)) return fallback;
    return as_count(j_.at(key), at(key), minimum);
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ConfigError(at(key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const char* key, bool positive = true) const {
    if (!has(key)) return {};
    const json& arr = j_.at(key);
    if (!arr.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < arr.size(); ++k)
      out.push_back(as_number(arr[k], at(key) + "/" + std::to_string(k), positive));
    return out;
  }

  static double as_number(const json& v, const std::string& where, bool positive) {
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where, "must be finite");
    if (positive && !(x > 0)) throw ConfigError(where, "must be positive");
    return x;
  }

  static std::size_t as_count(const json& v, const std::string& where, std::size_t minimum) {
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(minimum))
      throw ConfigError(where, "expected an integer >= " + std::to_string(minimum));
    return v.get<std::size_t>();
  }

 private:
  const json& j_;
  std::string path_;
};

template <class Fn>
auto rethrow_as_config(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where, e.what());
  }
}

GraphConfig parse_graph(const json& j) {
  Section s(j, "/graph");
  s.allow_only({"m", "rho_c", "seed", "retries", "edges", "file"});
  GraphConfig g;
  g.m = s.count("m", g.m);
  if (s.has("seed")) g.seed = Section::as_count(s.raw("seed"), s.at("seed"), 0);
  g.retries = static_cast<int>(s.count("retries", static_cast<std::size_t>(g.retries)));
  if (s.has("file")) g.file = s.text("file", "");
  if (s.has("edges")) {
    const json& arr = s.raw("edges");
    if (!arr.is_array()) throw ConfigError(s.at("edges"), "expected an array of [i, j] pairs");
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string where = s.at("edges") + "/" + std::to_string(k);
      if (!arr[k].is_array() || arr[k].size() != 2) throw ConfigError(where, "expected [i, j]");
      const auto a = Section::as_count(arr[k][0], where + "/0", 0);
      const auto b = Section::as_count(arr[k][1], where + "/1", 0);
      if (a >= g.m || b >= g.m || a == b) throw ConfigError(where, "invalid edge for m nodes");
      edges.emplace_back(a, b);
    }
    g.edges = std::move(edges);
  }
  // rho_c keeps its default only when no explicit topology is given.
  if (s.has("rho_c")) g.rho_c = s.number("rho_c", 0.0);
  else if (g.edges || g.file) g.rho_c.reset();
  return g;
}

SignalConfig parse_signal(const json& j) {
  Section s(j, "/signal");
  s.allow_only({"sigma_x2", "sigma_n2", "snr_db", "L"});
  SignalConfig sig;
  sig.sigma_x2 = s.number("sigma_x2", sig.sigma_x2);
  if (s.has("sigma_n2") && s.has("snr_db"))
    throw ConfigError(s.at("snr_db"), "give either sigma_n2 or snr_db, not both");
  if (s.has("snr_db")) {
    sig.snr_db = s.number("snr_db", 0.0, false);
    sig.sigma_n2.reset();
  } else {
    sig.sigma_n2 = s.number("sigma_n2", *sig.sigma_n2);
  }
  sig.length = s.count("L", sig.length);
  return sig;
}

ModelConfig parse_model(const json& j) {
  Section s(j, "/model");
  s.allow_only({"family", "r_c", "d_max"});
  ModelConfig mc;
  mc.family = rethrow_as_config(s.at("family"), [&] {
    return quantizer_family_from_string(s.text("family", "ecsq"));
  });
  if (s.has("r_c")) {
    const json& v = s.raw("r_c");
    if (v.is_string()) {
      if (v.get<std::string>() != "auto") throw ConfigError(s.at("r_c"), "expected a number or \"auto\"");
    } else {
      mc.r_c = Section::as_number(v, s.at("r_c"), false);
      if (*mc.r_c < 0) throw ConfigError(s.at("r_c"), "must be nonnegative");
    }
  }
  if (s.has("d_max")) {
    const json& v = s.raw("d_max");
    if (v.is_string()) {
      const auto text = v.get<std::string>();
      if (text.rfind("auto:p=", 0) == 0) {
        mc.p_nonzero = rethrow_as_config(s.at("d_max"), [&] { return std::stod(text.substr(7)); });
        if (!(mc.p_nonzero > 0 && mc.p_nonzero < 1))
          throw ConfigError(s.at("d_max"), "p must lie in (0, 1)");
      } else if (text != "auto") {
        throw ConfigError(s.at("d_max"), "expected a number, \"auto\" or \"auto:p=<prob>\"");
      }
    } else {
      mc.d_max = Section::as_number(v, s.at("d_max"), true);
    }
  }
  rethrow_as_config("/model", [&] { return mc.resolve(); });
  return mc;
}

OptimizerConfig parse_optimizer(const json& j) {
  Section s(j, "/optimizer");
  s.allow_only({"mode", "constraint", "tol", "mse_targets", "from-emse", "node_targets",
                "variable_limit"});
  OptimizerConfig oc;
  const auto mode = s.text("mode", "auto");
  if (mode == "variable") oc.mode = ModeChoice::variable;
  else if (mode == "constant") oc.mode = ModeChoice::constant;
  else if (mode == "auto") oc.mode = ModeChoice::automatic;
  else throw ConfigError(s.at("mode"), "expected variable, constant or auto");
  const auto constraint = s.text("constraint", "network");
  if (constraint == "network") oc.constraint = ConstraintKind::network;
  else if (constraint == "max-node") oc.constraint = ConstraintKind::max_node;
  else if (constraint == "per-node") oc.constraint = ConstraintKind::per_node;
  else throw ConfigError(s.at("constraint"), "expected network, max-node or per-node");
  oc.tol = s.number("tol", oc.tol);
  if (s.has("mse_targets") || s.has("from-emse")) {
    oc.mse_targets = s.numbers("mse_targets");
    oc.emse_targets_db = s.numbers("from-emse");
  }
  oc.node_targets = s.numbers("node_targets");
  oc.variable_limit = s.count("variable_limit", oc.variable_limit, 0);
  return oc;
}

SimulationConfig parse_simulation(const json& j) {
  Section s(j, "/simulation");
  s.allow_only({"trials", "quantizer_kind", "seed"});
  SimulationConfig sc;
  sc.trials = s.count("trials", sc.trials);
  sc.quantizer_kind = rethrow_as_config(s.at("quantizer_kind"), [&] {
    return quantizer_kind_from_string(s.text("quantizer_kind", "gaussian_noise_proxy"));
  });
  if (s.has("seed")) sc.seed = Section::as_count(s.raw("seed"), s.at("seed"), 0);
  return sc;
}

SweepConfig parse_sweep(const json& j) {
  Section s(j, "/sweep");
  s.allow_only({"graphs", "rho_c", "T"});
  SweepConfig sw;
  sw.graphs = s.count("graphs", sw.graphs);
  if (s.has("rho_c")) sw.rho_c = s.numbers("rho_c");
  if (s.has("T")) {
    const json& arr = s.raw("T");
    if (!arr.is_array()) throw ConfigError(s.at("T"), "expected an array of horizons");
    for (std::size_t k = 0; k < arr.size(); ++k)
      sw.horizons.push_back(Section::as_count(arr[k], s.at("T") + "/" + std::to_string(k), 1));
  }
  return sw;
}

}  // namespace

double SignalConfig::noise_variance() const {
  if (snr_db) return sigma_x2 / std::pow(10.0, *snr_db / 10.0);
  return sigma_n2.value_or(0.0);
}

RdModel ModelConfig::resolve() const {
  return RdModel::make(family, r_c, d_max ? d_max : std::optional(d_max_from_nonzero_rule(p_nonzero)));
}

ExperimentConfig parse_config(const json& j) {
  Section root(j, "");
  root.allow_only({"graph", "signal", "T", "model", "optimizer", "simulation", "sweep", "output"});
  ExperimentConfig c;
  if (root.has("graph")) c.graph = parse_graph(root.raw("graph"));
  if (root.has("signal")) c.signal = parse_signal(root.raw("signal"));
  c.horizon = root.count("T", c.horizon);
  if (root.has("model")) c.model = parse_model(root.raw("model"));
  if (root.has("optimizer")) c.optimizer = parse_optimizer(root.raw("optimizer"));
  if (root.has("simulation")) c.simulation = parse_simulation(root.raw("simulation"));
  if (root.has("sweep")) c.sweep = parse_sweep(root.raw("sweep"));
  c.output = root.text("output", c.output);
  if (c.optimizer.constraint == ConstraintKind::per_node && !c.optimizer.node_targets.empty() &&
      c.optimizer.node_targets.size() != c.graph.m)
    throw ConfigError("/optimizer/node_targets", "expected one target per node");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::string_view to_string(ModeChoice mode) {
  switch (mode) {
    case ModeChoice::variable: return "variable";
    case ModeChoice::constant: return "constant";
    case ModeChoice::automatic: return "auto";
  }
  return "auto";
}

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::network: return "network";
    case ConstraintKind::max_node: return "max-node";
    case ConstraintKind::per_node: return "per-node";
  }
  return "network";
}

json to_json(const ExperimentConfig& c) {
  json graph{{"m", c.graph.m}, {"seed", c.graph.seed}, {"retries", c.graph.retries}};
  graph["rho_c"] = c.graph.rho_c ? json(*c.graph.rho_c) : json(nullptr);
  if (c.graph.edges) {
    json edges = json::array();
    for (const auto& [a, b] : *c.graph.edges) edges.push_back({a, b});
    graph["edges"] = std::move(edges);
  }
  if (c.graph.file) graph["file"] = *c.graph.file;

  json signal{{"sigma_x2", c.signal.sigma_x2}, {"L", c.signal.length}};
  if (c.signal.snr_db)
    signal["snr_db"] = *c.signal.snr_db;
  else
    signal["sigma_n2"] = c.signal.sigma_n2.value_or(0.0);

  json model{{"family", to_string(c.model.family)}};
  model["r_c"] = c.model.r_c ? json(*c.model.r_c) : json("auto");
  if (c.model.d_max) {
    model["d_max"] = *c.model.d_max;
  } else {
    // Shortest round-trip text for p, so parse(serialize(x)) == x.
    model["d_max"] = "auto:p=" + json(c.model.p_nonzero).dump();
  }

  json optimizer{{"mode", to_string(c.optimizer.mode)},
                 {"constraint", to_string(c.optimizer.constraint)},
                 {"tol", c.optimizer.tol},
                 {"mse_targets", c.optimizer.mse_targets},
                 {"from-emse", c.optimizer.emse_targets_db},
                 {"node_targets", c.optimizer.node_targets},
                 {"variable_limit", c.optimizer.variable_limit}};
  json simulation{{"trials", c.simulation.trials},
                  {"quantizer_kind", to_string(c.simulation.quantizer_kind)},
                  {"seed", c.simulation.seed}};
  json sweep{{"graphs", c.sweep.graphs}, {"rho_c", c.sweep.rho_c}};
  if (!c.sweep.horizons.empty()) sweep["T"] = c.sweep.horizons;

  return {{"graph", std::move(graph)},   {"signal", std::move(signal)},
          {"T", c.horizon},              {"model", std::move(model)},
          {"optimizer", std::move(optimizer)}, {"simulation", std::move(simulation)},
          {"sweep", std::move(sweep)},   {"output", c.output}};
}

void apply_full_scale(ExperimentConfig& config) {
  config.sweep.graphs = 32;
  config.signal.length = 10000;
  config.simulation.trials = 1000;
}

}  // namespace qcons
