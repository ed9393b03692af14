#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "platoon/core.hpp"

namespace platoon {

enum class AttackKind { random, dos, bias, replay };
enum class ThresholdMode { static_beta, adaptive };
enum class ControllerInput { estimates, measurements };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::random: return "random";
    case AttackKind::dos: return "dos";
    case AttackKind::bias: return "bias";
    case AttackKind::replay: return "replay";
  }
  return "random";
}

inline AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "random") return AttackKind::random;
  if (s == "dos") return AttackKind::dos;
  if (s == "bias") return AttackKind::bias;
  if (s == "replay") return AttackKind::replay;
  throw ConfigError("unknown attack kind '" + s + "'");
}

struct AttackSpec {
  IndexSet set;
  AttackKind kind = AttackKind::random;
  double scale = 1.0;             // random
  Vec2 offset = Vec2::Zero();     // bias
  long record_len = 100;          // replay
  long start = 0;                 // first attacked step
};

struct ThresholdConfig {
  ThresholdMode mode = ThresholdMode::adaptive;
  std::optional<double> beta;   // beta for static, beta_0 for adaptive
  std::optional<double> omega;
};

struct ScenarioConfig {
  int N = 5;
  int L = 2;
  int b = 1;
  double T = 0.01;
  double q = 300.0;
  double epsilon = 0.1;
  double mu = 0.1;
  double g_s = 50.0;
  double g_v = 50.0;
  std::optional<double> varpi;
  ThresholdConfig threshold;
  AttackSpec attack;
  long horizon = 500;
  std::uint64_t seed = 0;
  std::vector<Vec2> delta_x;       // N-1 entries, pair (i, i+1)
  double s0 = 0.0;
  double v0 = 0.0;
  std::vector<Vec2> initial_states;     // empty: start in formation
  std::vector<Vec2> initial_estimates;  // empty: all zero
  ControllerInput controller = ControllerInput::estimates;

  Vec2 x0() const { return Vec2(s0, v0); }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown field '" + it.key() + "' in " + where);
  }
}

inline Vec2 vec2_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(what + " must be a two-element numeric array");
  }
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

inline std::vector<Vec2> vec2_list(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  std::vector<Vec2> out;
  for (const auto& e : j) out.push_back(vec2_from_json(e, what + " entry"));
  return out;
}

template <class T>
T number(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError("field '" + key + "' must be numeric");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("field '" + key + "' must be an integer");
  }
  return v.get<T>();
}

inline nlohmann::json vec2_json(const Vec2& v) { return nlohmann::json::array({v(0), v(1)}); }

}  // namespace detail

inline AttackSpec attack_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"set", "kind", "params"}, "attack");
  AttackSpec a;
  if (j.contains("set")) {
    if (!j["set"].is_array()) throw ConfigError("attack.set must be an array");
    a.set = IndexSet(j["set"].get<std::vector<Index>>());
  }
  if (j.contains("kind")) a.kind = attack_kind_from_string(j["kind"].get<std::string>());
  if (j.contains("params")) {
    const auto& p = j["params"];
    std::set<std::string> allowed{"start"};
    switch (a.kind) {
      case AttackKind::random: allowed.insert("scale"); break;
      case AttackKind::bias: allowed.insert("offset"); break;
      case AttackKind::replay: allowed.insert("record_len"); break;
      case AttackKind::dos: break;
    }
    detail::reject_unknown(p, allowed, "attack.params (" + to_string(a.kind) + ")");
    if (p.contains("start")) a.start = detail::number<long>(p, "start");
    if (p.contains("scale")) a.scale = detail::number<double>(p, "scale");
    if (p.contains("offset")) a.offset = detail::vec2_from_json(p["offset"], "attack.params.offset");
    if (p.contains("record_len")) a.record_len = detail::number<long>(p, "record_len");
  }
  if (a.start < 0) throw ConfigError("attack start must be >= 0");
  if (a.kind == AttackKind::replay && a.record_len < 1) throw ConfigError("replay record_len must be >= 1");
  return a;
}

inline nlohmann::json attack_to_json(const AttackSpec& a) {
  nlohmann::json p{{"start", a.start}};
  switch (a.kind) {
    case AttackKind::random: p["scale"] = a.scale; break;
    case AttackKind::bias: p["offset"] = detail::vec2_json(a.offset); break;
    case AttackKind::replay: p["record_len"] = a.record_len; break;
    case AttackKind::dos: break;
  }
  return {{"set", a.set.items()}, {"kind", to_string(a.kind)}, {"params", p}};
}

// Checks ranges and fills defaulted per-vehicle lists. Appends human-readable
// notes (interpretations, non-fatal warnings) to `notes` when given.
inline void validate(ScenarioConfig& c, std::vector<std::string>* notes = nullptr) {
  auto note = [&](const std::string& s) {
    if (notes) notes->push_back(s);
  };
  partition_vehicles(c.N, c.L);
  if (c.b < 0) throw ConfigError("attack bound b must be nonnegative");
  if (c.b < 1 || c.b > c.L) {
    note("warning: b=" + std::to_string(c.b) + " outside [1, L=" + std::to_string(c.L) +
         "]; estimation guarantees do not hold");
  }
  note("tail neighbour sets are capped at N: N_i = {i-L..i-1, i+1..min(N, i+L)}");
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  if (!(c.q > 0.0)) throw ConfigError("q must be positive");
  if (c.epsilon < 0.0 || c.mu < 0.0) throw ConfigError("noise bounds must be nonnegative");
  if (c.horizon < 0) throw ConfigError("horizon must be nonnegative");

  const double normA = (c.T + std::sqrt(c.T * c.T + 4.0)) / 2.0;
  if (c.varpi) {
    const double hi = normA / (normA - 1.0);
    if (!(*c.varpi > 1.0 && *c.varpi < hi)) {
      throw ConfigError("varpi must lie in (1, " + std::to_string(hi) + ")");
    }
  }
  if (c.threshold.omega && !(*c.threshold.omega > 0.0 && *c.threshold.omega < 1.0)) {
    throw ConfigError("threshold omega must lie in (0, 1)");
  }
  if (c.threshold.beta && !(*c.threshold.beta > 0.0)) throw ConfigError("threshold beta must be positive");

  for (Index i : c.attack.set) {
    if (i < 1 || i > c.N) throw ConfigError("attacked sensor index out of range");
  }
  if (static_cast<int>(c.attack.set.size()) > c.b) throw ConfigError("attack set larger than b");

  const auto n = static_cast<std::size_t>(c.N);
  if (c.delta_x.empty()) c.delta_x.assign(n - 1, Vec2::Zero());
  if (c.delta_x.size() != n - 1) throw ConfigError("delta_x needs N-1 entries");
  if (c.initial_states.empty()) {
    std::vector<Vec2> chain{c.x0()};
    for (const auto& d : c.delta_x) chain.push_back(chain.back() - d);
    c.initial_states = chain;
  }
  if (c.initial_states.size() != n) throw ConfigError("initial_states needs N entries");
  if (c.initial_estimates.empty()) c.initial_estimates.assign(n, Vec2::Zero());
  if (c.initial_estimates.size() != n) throw ConfigError("initial_estimates needs N entries");
  for (std::size_t k = 0; k < n; ++k) {
    if ((c.initial_estimates[k] - c.initial_states[k]).norm() > c.q) {
      throw ConfigError("initial estimation error of vehicle " + std::to_string(k + 1) + " exceeds q");
    }
  }
}

inline ScenarioConfig config_from_json(const nlohmann::json& j, std::vector<std::string>* notes = nullptr) {
  detail::reject_unknown(j,
                         {"N", "L", "b", "T", "q", "epsilon", "mu", "g_s", "g_v", "varpi", "threshold",
                          "attack", "horizon", "seed", "delta_x", "s0", "v0", "initial_states",
                          "initial_estimates", "controller"},
                         "scenario");
  ScenarioConfig c;
  for (const char* k : {"N", "L", "b", "T", "q", "epsilon", "mu", "g_s", "g_v"}) {
    if (!j.contains(k)) throw ConfigError(std::string("missing required field '") + k + "'");
  }
  c.N = detail::number<int>(j, "N");
  c.L = detail::number<int>(j, "L");
  c.b = detail::number<int>(j, "b");
  c.T = detail::number<double>(j, "T");
  c.q = detail::number<double>(j, "q");
  c.epsilon = detail::number<double>(j, "epsilon");
  c.mu = detail::number<double>(j, "mu");
  c.g_s = detail::number<double>(j, "g_s");
  c.g_v = detail::number<double>(j, "g_v");
  if (j.contains("varpi")) c.varpi = detail::number<double>(j, "varpi");
  if (j.contains("threshold")) {
    const auto& t = j["threshold"];
    detail::reject_unknown(t, {"mode", "beta", "beta0", "omega"}, "threshold");
    const std::string mode = t.value("mode", std::string("adaptive"));
    if (mode == "static") {
      c.threshold.mode = ThresholdMode::static_beta;
      if (t.contains("beta0")) throw ConfigError("static threshold takes 'beta', not 'beta0'");
      if (t.contains("beta")) c.threshold.beta = detail::number<double>(t, "beta");
    } else if (mode == "adaptive") {
      c.threshold.mode = ThresholdMode::adaptive;
      if (t.contains("beta")) throw ConfigError("adaptive threshold takes 'beta0', not 'beta'");
      if (t.contains("beta0")) c.threshold.beta = detail::number<double>(t, "beta0");
    } else {
      throw ConfigError("threshold.mode must be 'static' or 'adaptive'");
    }
    if (t.contains("omega")) c.threshold.omega = detail::number<double>(t, "omega");
  }
  if (j.contains("attack")) c.attack = attack_from_json(j["attack"]);
  if (j.contains("horizon")) c.horizon = detail::number<long>(j, "horizon");
  if (j.contains("seed")) c.seed = detail::number<std::uint64_t>(j, "seed");
  if (j.contains("delta_x")) c.delta_x = detail::vec2_list(j["delta_x"], "delta_x");
  if (j.contains("s0")) c.s0 = detail::number<double>(j, "s0");
  if (j.contains("v0")) c.v0 = detail::number<double>(j, "v0");
  if (j.contains("initial_states")) c.initial_states = detail::vec2_list(j["initial_states"], "initial_states");
  if (j.contains("initial_estimates")) {
    c.initial_estimates = detail::vec2_list(j["initial_estimates"], "initial_estimates");
  }
  if (j.contains("controller")) {
    const auto m = j["controller"].get<std::string>();
    if (m == "estimates") c.controller = ControllerInput::estimates;
    else if (m == "measurements") c.controller = ControllerInput::measurements;
    else throw ConfigError("controller must be 'estimates' or 'measurements'");
  }
  validate(c, notes);
  return c;
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json j{{"N", c.N},   {"L", c.L},         {"b", c.b},   {"T", c.T},     {"q", c.q},
                   {"epsilon", c.epsilon}, {"mu", c.mu}, {"g_s", c.g_s}, {"g_v", c.g_v},
                   {"horizon", c.horizon}, {"seed", c.seed}, {"s0", c.s0}, {"v0", c.v0}};
  if (c.varpi) j["varpi"] = *c.varpi;
  nlohmann::json t{{"mode", c.threshold.mode == ThresholdMode::static_beta ? "static" : "adaptive"}};
  if (c.threshold.beta) t[c.threshold.mode == ThresholdMode::static_beta ? "beta" : "beta0"] = *c.threshold.beta;
  if (c.threshold.omega) t["omega"] = *c.threshold.omega;
  j["threshold"] = t;
  j["attack"] = attack_to_json(c.attack);
  auto list = [](const std::vector<Vec2>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : v) a.push_back(detail::vec2_json(e));
    return a;
  };
  j["delta_x"] = list(c.delta_x);
  j["initial_states"] = list(c.initial_states);
  j["initial_estimates"] = list(c.initial_estimates);
  j["controller"] = c.controller == ControllerInput::estimates ? "estimates" : "measurements";
  return j;
}

// The N=5 string used throughout the evaluation: leader at (200, 10), spacing
// 20, sensor 3 under a random attack.
inline ScenarioConfig reference_scenario() {
  ScenarioConfig c;
  c.N = 5;
  c.L = 2;
  c.b = 1;
  c.T = 0.01;
  c.q = 300.0;
  c.epsilon = 0.1;
  c.mu = 0.1;
  c.g_s = 50.0;
  c.g_v = 50.0;
  c.threshold.mode = ThresholdMode::adaptive;
  c.attack.set = IndexSet{3};
  c.attack.kind = AttackKind::random;
  c.horizon = 500;
  c.s0 = 200.0;
  c.v0 = 10.0;
  c.delta_x.assign(4, Vec2(20.0, 0.0));
  c.initial_states = {Vec2(200, 10), Vec2(100, 8), Vec2(50, 6), Vec2(20, 4), Vec2(0, 2)};
  c.initial_estimates.assign(5, Vec2::Zero());
  validate(c);
  return c;
}

}  // namespace platoon
