#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "bmm2d/contamination.hpp"
#include "bmm2d/montecarlo.hpp"

namespace bmm2d {

/// Schema violation in a JSON config (unknown key, wrong type, missing field).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

inline long long integer(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return j.at(key).get<long long>();
}

}  // namespace config_detail

[[nodiscard]] inline ArParams params_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    throw ConfigError(where + ": expected [phi1, phi2, phi3]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

[[nodiscard]] inline NoiseSpec noise_from_json(const nlohmann::json& j, const std::string& where) {
  using namespace config_detail;
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ConfigError(where + ": expected {\"kind\": \"gaussian\"|\"student_t\", ...}");
  const std::string kind = j["kind"];
  if (kind == "gaussian") {
    reject_unknown(j, {"kind", "mean", "variance"}, where);
    return GaussianNoise{number_or(j, "mean", 0.0, where), number_or(j, "variance", 1.0, where)};
  }
  if (kind == "student_t") {
    reject_unknown(j, {"kind", "df"}, where);
    return StudentTNoise{number(j, "df", where)};
  }
  throw ConfigError(where + ": unknown noise kind '" + kind + "'");
}

[[nodiscard]] inline nlohmann::json to_json(const NoiseSpec& n) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianNoise>)
          return {{"kind", "gaussian"}, {"mean", v.mean}, {"variance", v.variance}};
        else
          return {{"kind", "student_t"}, {"df", v.df}};
      },
      n);
}

/// {"alpha": 0.1, "kind": "additive_gaussian", "variance": 50}
/// {"alpha": 0.1, "kind": "replace_student_t", "df": 2.3}
/// {"alpha": 0.1, "kind": "replace_ar", "params": [0.1, 0.2, 0.3], "noise": {...}}
/// {"alpha": 0.1, "kind": "replace_white_noise", "variance": 50}
[[nodiscard]] inline ContaminationSpec contamination_from_json(const nlohmann::json& j,
                                                               const std::string& where = "contamination") {
  using namespace config_detail;
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ConfigError(where + ": expected an object with a string 'kind'");
  const std::string kind = j["kind"];
  ContaminationSpec spec;
  if (kind == "additive_gaussian") {
    reject_unknown(j, {"alpha", "kind", "variance"}, where);
    spec.kind = AdditiveGaussian{number(j, "variance", where)};
  } else if (kind == "replace_student_t") {
    reject_unknown(j, {"alpha", "kind", "df"}, where);
    spec.kind = ReplaceStudentT{number(j, "df", where)};
  } else if (kind == "replace_ar") {
    reject_unknown(j, {"alpha", "kind", "params", "noise"}, where);
    ReplaceAr r;
    if (!j.contains("params")) throw ConfigError(where + ": missing 'params'");
    r.params = params_from_json(j["params"], where + ".params");
    if (j.contains("noise")) r.noise = noise_from_json(j["noise"], where + ".noise");
    spec.kind = r;
  } else if (kind == "replace_white_noise") {
    reject_unknown(j, {"alpha", "kind", "variance"}, where);
    spec.kind = ReplaceWhiteNoise{number(j, "variance", where)};
  } else {
    throw ConfigError(where + ": unknown kind '" + kind + "'");
  }
  spec.alpha = number(j, "alpha", where);
  return spec;
}

[[nodiscard]] inline nlohmann::json to_json(const ContaminationSpec& s) {
  nlohmann::json j{{"alpha", s.alpha}, {"kind", kind_name(s.kind)}};
  std::visit(
      [&j](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, AdditiveGaussian> || std::is_same_v<T, ReplaceWhiteNoise>) {
          j["variance"] = k.variance;
        } else if constexpr (std::is_same_v<T, ReplaceStudentT>) {
          j["df"] = k.df;
        } else {
          j["params"] = {k.params.phi1, k.params.phi2, k.params.phi3};
          j["noise"] = to_json(k.noise);
        }
      },
      s.kind);
  return j;
}

/// {"restarts": 5, "max_evals": 400, "tolerance": 1e-7, "zeta": 0.01, "seed": 24301}
[[nodiscard]] inline OptimizerConfig optimizer_from_json(const nlohmann::json& j,
                                                         const std::string& where = "optimizer") {
  using namespace config_detail;
  reject_unknown(j, {"restarts", "max_evals", "tolerance", "zeta", "seed"}, where);
  OptimizerConfig c;
  if (j.contains("restarts")) c.restarts = static_cast<int>(integer(j, "restarts", where));
  if (j.contains("max_evals")) c.max_evals = static_cast<int>(integer(j, "max_evals", where));
  c.tolerance = number_or(j, "tolerance", c.tolerance, where);
  c.zeta = number_or(j, "zeta", c.zeta, where);
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(integer(j, "seed", where));
  return c;
}

[[nodiscard]] inline nlohmann::json to_json(const OptimizerConfig& c) {
  return {{"restarts", c.restarts}, {"max_evals", c.max_evals}, {"tolerance", c.tolerance},
          {"zeta", c.zeta},         {"seed", c.seed}};
}

[[nodiscard]] inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  using namespace config_detail;
  const std::string where = "experiment";
  reject_unknown(j, {"true_params", "window", "replications", "contamination", "methods", "master_seed",
                     "optimizer", "burn_in"},
                 where);
  ExperimentConfig c;
  if (j.contains("true_params")) c.true_params = params_from_json(j["true_params"], "true_params");
  if (j.contains("window")) c.window = static_cast<int>(integer(j, "window", where));
  if (j.contains("replications")) c.replications = static_cast<int>(integer(j, "replications", where));
  if (j.contains("contamination") && !j["contamination"].is_null())
    c.contamination = contamination_from_json(j["contamination"]);
  if (j.contains("methods")) {
    if (!j["methods"].is_array()) throw ConfigError("methods: expected an array of strings");
    c.methods.clear();
    for (const auto& m : j["methods"]) {
      if (!m.is_string()) throw ConfigError("methods: expected an array of strings");
      const auto parsed = parse_method(m.get<std::string>());
      if (!parsed) throw ConfigError("methods: unknown method '" + m.get<std::string>() + "'");
      c.methods.push_back(*parsed);
    }
  }
  if (j.contains("master_seed")) c.master_seed = static_cast<std::uint64_t>(integer(j, "master_seed", where));
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j["optimizer"]);
  if (j.contains("burn_in")) c.burn_in = static_cast<std::size_t>(integer(j, "burn_in", where));
  return c;
}

[[nodiscard]] inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : c.methods) methods.push_back(std::string(to_string(m)));
  return {{"true_params", {c.true_params.phi1, c.true_params.phi2, c.true_params.phi3}},
          {"window", c.window},
          {"replications", c.replications},
          {"contamination", c.contamination ? to_json(*c.contamination) : nlohmann::json(nullptr)},
          {"methods", methods},
          {"master_seed", c.master_seed},
          {"optimizer", to_json(c.optimizer)},
          {"burn_in", c.burn_in}};
}

[[nodiscard]] inline nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace bmm2d
