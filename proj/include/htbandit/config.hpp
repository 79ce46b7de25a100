#pragma once

// Experiment configuration: JSON (de)serialization and the content digest stamped into
// every output file.
//
// Schema (all keys required unless noted):
//
//   {
//     "policy":      {"name": "uniinf"}
//                  | {"name": "truncated_ucb", "alpha": a, "sigma": s}
//                  | {"name": "uniform"},
//     "environment": {"kind": "stochastic", "alpha": a, "sigma": s,
//                     "arms": [{"mean": m, "spread": w, "tail_prob": p}, ...]}
//                  | {"kind": "adversarial", "alpha": a, "sigma": s,
//                     "phases": [{"length": n, "arms": [...]}, ...]}
//                  | {"kind": "switching", "alpha": a, "sigma": s, "arms": K, "phases": P,
//                     "base_mean": b, "gap": g, "spread": w, "tail_prob": p},
//     "horizons":    [T1, T2, ...],
//     "reps":        R,
//     "seed":        base seed,
//     "diagnostics": bool            (optional, default false),
//     "output_dir":  path            (optional, default "."),
//     "synthetic_power_law": {"exponent": e, "scale": c}   (optional; sweep test hook)
//   }
//
// A "switching" environment is a generator: it is materialized separately for every
// horizon because its phase lengths depend on T.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "htbandit/environment.hpp"
#include "htbandit/errors.hpp"
#include "htbandit/harness.hpp"

namespace htbandit {

/// Malformed or unreadable configuration (maps to the CLI's I/O-or-schema exit code).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SwitchingAdversaryConfig {
  std::size_t arms = 2;
  std::size_t phases = 2;
  double base_mean = 0.5;
  double gap = 0.5;
  double spread = 10.0;
  double tail_prob = 0.01;
  double alpha = 1.5;
  double sigma = 1.0;

  bool operator==(const SwitchingAdversaryConfig&) const = default;
};

using EnvironmentConfig = std::variant<EnvironmentSpec, SwitchingAdversaryConfig>;

inline EnvironmentSpec materialize(const EnvironmentConfig& config, std::size_t horizon) {
  if (const auto* spec = std::get_if<EnvironmentSpec>(&config)) return *spec;
  const auto& s = std::get<SwitchingAdversaryConfig>(config);
  return make_switching_adversary(s.arms, horizon, s.phases, s.base_mean, s.gap, s.spread, s.tail_prob, s.alpha,
                                  s.sigma);
}

struct PowerLawHook {
  double exponent = 0.5;
  double scale = 1.0;

  bool operator==(const PowerLawHook&) const = default;
};

struct ExperimentConfig {
  PolicySpec policy = UniInfPolicy{};
  EnvironmentConfig environment;
  std::vector<std::size_t> horizons;
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  bool diagnostics = false;
  std::string output_dir = ".";
  std::optional<PowerLawHook> synthetic_power_law;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using nlohmann::json;

inline json arm_to_json(const ThreePointArm& a) {
  return json{{"mean", a.mean}, {"spread", a.spread}, {"tail_prob", a.tail_prob}};
}

inline ThreePointArm arm_from_json(const json& j) {
  return ThreePointArm{j.at("mean").get<double>(), j.at("spread").get<double>(), j.at("tail_prob").get<double>()};
}

inline std::vector<ThreePointArm> arms_from_json(const json& j) {
  std::vector<ThreePointArm> arms;
  for (const auto& a : j) arms.push_back(arm_from_json(a));
  return arms;
}

inline json arms_to_json(const std::vector<ThreePointArm>& arms) {
  json out = json::array();
  for (const auto& a : arms) out.push_back(arm_to_json(a));
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c, bool include_output_dir = true) {
  using nlohmann::json;
  json j;
  if (const auto* ucb = std::get_if<TruncatedUcbPolicy>(&c.policy)) {
    j["policy"] = json{{"name", "truncated_ucb"}, {"alpha", ucb->alpha}, {"sigma", ucb->sigma}};
  } else {
    j["policy"] = json{{"name", policy_name(c.policy)}};
  }

  if (const auto* spec = std::get_if<EnvironmentSpec>(&c.environment)) {
    json env{{"alpha", spec->alpha}, {"sigma", spec->sigma}};
    if (const auto* s = std::get_if<StochasticArms>(&spec->kind)) {
      env["kind"] = "stochastic";
      env["arms"] = detail::arms_to_json(s->arms);
    } else {
      env["kind"] = "adversarial";
      json phases = json::array();
      for (const auto& p : std::get<AdversarialSchedule>(spec->kind).phases) {
        phases.push_back(json{{"length", p.length}, {"arms", detail::arms_to_json(p.arms)}});
      }
      env["phases"] = phases;
    }
    j["environment"] = env;
  } else {
    const auto& s = std::get<SwitchingAdversaryConfig>(c.environment);
    j["environment"] = json{{"kind", "switching"}, {"arms", s.arms},       {"phases", s.phases},
                            {"base_mean", s.base_mean}, {"gap", s.gap},    {"spread", s.spread},
                            {"tail_prob", s.tail_prob}, {"alpha", s.alpha}, {"sigma", s.sigma}};
  }

  j["horizons"] = c.horizons;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["diagnostics"] = c.diagnostics;
  if (include_output_dir) j["output_dir"] = c.output_dir;
  if (c.synthetic_power_law) {
    j["synthetic_power_law"] =
        json{{"exponent", c.synthetic_power_law->exponent}, {"scale", c.synthetic_power_law->scale}};
  }
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    const auto& pol = j.at("policy");
    const auto name = pol.at("name").get<std::string>();
    if (name == "uniinf") {
      c.policy = UniInfPolicy{};
    } else if (name == "truncated_ucb") {
      c.policy = TruncatedUcbPolicy{pol.at("alpha").get<double>(), pol.at("sigma").get<double>()};
    } else if (name == "uniform") {
      c.policy = UniformPolicy{};
    } else {
      throw ConfigError("unknown policy name '" + name + "'");
    }

    const auto& env = j.at("environment");
    const auto kind = env.at("kind").get<std::string>();
    if (kind == "stochastic") {
      EnvironmentSpec spec;
      spec.alpha = env.at("alpha").get<double>();
      spec.sigma = env.at("sigma").get<double>();
      spec.kind = StochasticArms{detail::arms_from_json(env.at("arms"))};
      c.environment = spec;
    } else if (kind == "adversarial") {
      EnvironmentSpec spec;
      spec.alpha = env.at("alpha").get<double>();
      spec.sigma = env.at("sigma").get<double>();
      AdversarialSchedule schedule;
      for (const auto& p : env.at("phases")) {
        schedule.phases.push_back(Phase{p.at("length").get<std::size_t>(), detail::arms_from_json(p.at("arms"))});
      }
      spec.kind = std::move(schedule);
      c.environment = spec;
    } else if (kind == "switching") {
      SwitchingAdversaryConfig s;
      s.arms = env.at("arms").get<std::size_t>();
      s.phases = env.at("phases").get<std::size_t>();
      s.base_mean = env.at("base_mean").get<double>();
      s.gap = env.at("gap").get<double>();
      s.spread = env.at("spread").get<double>();
      s.tail_prob = env.at("tail_prob").get<double>();
      s.alpha = env.at("alpha").get<double>();
      s.sigma = env.at("sigma").get<double>();
      c.environment = s;
    } else {
      throw ConfigError("unknown environment kind '" + kind + "'");
    }

    c.horizons = j.at("horizons").get<std::vector<std::size_t>>();
    c.reps = j.at("reps").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.diagnostics = j.value("diagnostics", false);
    c.output_dir = j.value("output_dir", std::string("."));
    if (j.contains("synthetic_power_law")) {
      const auto& h = j.at("synthetic_power_law");
      c.synthetic_power_law = PowerLawHook{h.at("exponent").get<double>(), h.at("scale").get<double>()};
    }
    if (c.horizons.empty()) throw ConfigError("config lists no horizons");
    for (std::size_t T : c.horizons) {
      if (T < 2) throw ConfigError("every horizon must be at least 2");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

inline std::string serialize(const ExperimentConfig& c) { return to_json(c).dump(2); }

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a 64-bit hash of the compact canonical JSON (object keys sorted), output_dir
/// excluded so relocating outputs does not change provenance.
inline std::string config_digest(const ExperimentConfig& c) {
  const std::string canonical = to_json(c, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace htbandit
