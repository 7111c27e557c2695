#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "integrate.hpp"
#include "model.hpp"

namespace custdyn {

// One fully resolved run: model parameters, initial state, integrator
// settings, and an optional output path.
struct RunConfig {
  ModelParams params;
  State init;
  IntegratorConfig integrator;
  std::optional<std::string> output;
};

namespace detail {

inline const std::vector<std::string>& config_param_keys() {
  static const std::vector<std::string> keys = {
      "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6", "lambda7",
      "m",       "m_r",     "beta1",   "beta2",   "epsilon", "gamma",   "alpha"};
  return keys;
}

inline const std::vector<std::string>& config_init_keys() {
  static const std::vector<std::string> keys = {"c0", "r0", "pc0", "pr0"};
  return keys;
}

inline const std::vector<std::string>& config_optional_keys() {
  static const std::vector<std::string> keys = {
      "h_init", "rel_tol", "abs_tol", "steady_tol", "steady_window", "max_steps", "output"};
  return keys;
}

inline double config_number(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number())
    throw ConfigError("config: key '" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace detail

// Parses a flat JSON object into a RunConfig. Every model and initial-state
// key is required; integrator keys are optional overrides on top of
// population-scaled defaults; unknown keys are rejected by name. 'gamma' may
// be the string "auto" (epsilon times the initial population) and 'lambda5'
// may be "auto" (lambda7 * r0 / c0).
inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

  const auto& pkeys = detail::config_param_keys();
  const auto& ikeys = detail::config_init_keys();
  const auto& okeys = detail::config_optional_keys();
  auto known = [&](const std::string& k) {
    auto has = [&](const std::vector<std::string>& v) {
      for (const auto& s : v)
        if (s == k) return true;
      return false;
    };
    return has(pkeys) || has(ikeys) || has(okeys);
  };
  for (const auto& item : j.items())
    if (!known(item.key())) throw ConfigError("config: unknown key '" + item.key() + "'");
  for (const auto& k : pkeys)
    if (!j.contains(k)) throw ConfigError("config: missing required key '" + k + "'");
  for (const auto& k : ikeys)
    if (!j.contains(k)) throw ConfigError("config: missing required key '" + k + "'");

  RunConfig cfg;
  cfg.init.c = detail::config_number(j, "c0");
  cfg.init.r = detail::config_number(j, "r0");
  cfg.init.pc = detail::config_number(j, "pc0");
  cfg.init.pr = detail::config_number(j, "pr0");

  ModelParams& par = cfg.params;
  par.lambda1 = detail::config_number(j, "lambda1");
  par.lambda2 = detail::config_number(j, "lambda2");
  par.lambda3 = detail::config_number(j, "lambda3");
  par.lambda4 = detail::config_number(j, "lambda4");
  par.lambda6 = detail::config_number(j, "lambda6");
  par.lambda7 = detail::config_number(j, "lambda7");
  par.m = detail::config_number(j, "m");
  par.m_r = detail::config_number(j, "m_r");
  par.beta1 = detail::config_number(j, "beta1");
  par.beta2 = detail::config_number(j, "beta2");
  par.epsilon = detail::config_number(j, "epsilon");
  par.alpha = detail::config_number(j, "alpha");

  if (j.at("lambda5").is_string()) {
    if (j.at("lambda5").get<std::string>() != "auto")
      throw ConfigError("config: key 'lambda5' must be a number or \"auto\"");
    if (!(cfg.init.c > 0.0))
      throw ConfigError("config: lambda5 = \"auto\" requires c0 > 0");
    par.lambda5 = par.lambda7 * cfg.init.r / cfg.init.c;
  } else {
    par.lambda5 = detail::config_number(j, "lambda5");
  }

  if (j.at("gamma").is_string()) {
    if (j.at("gamma").get<std::string>() != "auto")
      throw ConfigError("config: key 'gamma' must be a number or \"auto\"");
    par.gamma = par.epsilon * (cfg.init.c + cfg.init.r + cfg.init.pc + cfg.init.pr);
  } else {
    par.gamma = detail::config_number(j, "gamma");
  }

  try {
    par.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!cfg.init.finite() || cfg.init.min_component() < 0.0)
    throw ConfigError("config: initial state must be finite and nonnegative");

  cfg.integrator = (par.epsilon > 0.0)
                       ? IntegratorConfig::for_population(par.gamma / par.epsilon)
                       : IntegratorConfig{};
  if (j.contains("h_init")) cfg.integrator.h_init = detail::config_number(j, "h_init");
  if (j.contains("rel_tol")) cfg.integrator.rel_tol = detail::config_number(j, "rel_tol");
  if (j.contains("abs_tol")) cfg.integrator.abs_tol = detail::config_number(j, "abs_tol");
  if (j.contains("steady_tol"))
    cfg.integrator.steady_tol = detail::config_number(j, "steady_tol");
  if (j.contains("steady_window"))
    cfg.integrator.steady_window = detail::config_number(j, "steady_window");
  if (j.contains("max_steps")) {
    const double v = detail::config_number(j, "max_steps");
    if (!(v >= 1.0) || v > 1e18 || v != std::floor(v))
      throw ConfigError("config: max_steps must be a positive integer");
    cfg.integrator.max_steps = static_cast<std::uint64_t>(v);
  }
  if (j.contains("output")) {
    if (!j.at("output").is_string())
      throw ConfigError("config: key 'output' must be a string");
    cfg.output = j.at("output").get<std::string>();
  }
  try {
    cfg.integrator.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

// Emits a fully resolved config (auto values are written as the numbers they
// resolved to). Re-parsing the result reproduces the same RunConfig.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["lambda1"] = cfg.params.lambda1;
  j["lambda2"] = cfg.params.lambda2;
  j["lambda3"] = cfg.params.lambda3;
  j["lambda4"] = cfg.params.lambda4;
  j["lambda5"] = cfg.params.lambda5;
  j["lambda6"] = cfg.params.lambda6;
  j["lambda7"] = cfg.params.lambda7;
  j["m"] = cfg.params.m;
  j["m_r"] = cfg.params.m_r;
  j["beta1"] = cfg.params.beta1;
  j["beta2"] = cfg.params.beta2;
  j["epsilon"] = cfg.params.epsilon;
  j["gamma"] = cfg.params.gamma;
  j["alpha"] = cfg.params.alpha;
  j["c0"] = cfg.init.c;
  j["r0"] = cfg.init.r;
  j["pc0"] = cfg.init.pc;
  j["pr0"] = cfg.init.pr;
  j["h_init"] = cfg.integrator.h_init;
  j["rel_tol"] = cfg.integrator.rel_tol;
  j["abs_tol"] = cfg.integrator.abs_tol;
  j["steady_tol"] = cfg.integrator.steady_tol;
  j["steady_window"] = cfg.integrator.steady_window;
  j["max_steps"] = static_cast<double>(cfg.integrator.max_steps);
  if (cfg.output) j["output"] = *cfg.output;
  return j;
}

// ---------------------------------------------------------------------------
// Frozen scenario presets. The baseline calibration: all spontaneous/contact
// rates 2e-4, lambda5 tied to the initial referrer/customer ratio, beta1 =
// beta2 = 0.18, epsilon = 0.01, alpha = 0.01, initial state
// (2200, 20, 22000, 200), gamma = epsilon * N0.

namespace detail {

inline RunConfig baseline_config(double m, double m_r) {
  RunConfig cfg;
  cfg.init = State{2200.0, 20.0, 22000.0, 200.0};
  ModelParams& p = cfg.params;
  p.lambda1 = 2e-4;
  p.lambda2 = 2e-4;
  p.lambda3 = 2e-4;
  p.lambda4 = 2e-4;
  p.lambda5 = 2e-4 * 20.0 / 2200.0;
  p.lambda6 = 2e-4;
  p.lambda7 = 2e-4;
  p.m = m;
  p.m_r = m_r;
  p.beta1 = 0.18;
  p.beta2 = 0.18;
  p.epsilon = 0.01;
  p.gamma = 0.01 * 24420.0;
  p.alpha = 0.01;
  cfg.integrator = IntegratorConfig::for_population(p.gamma / p.epsilon);
  return cfg;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"fig1-left", "fig1-right", "fig2-left", "fig2-right", "fig3", "fig4", "fig5", "fig6"};
}

// Named parameter sets for the bundled simulation scenarios:
//   fig1-left / fig1-right  pure word-of-mouth regimes below / above tau = 1
//   fig2-left / fig2-right  no-referral runs with alpha = 0 / alpha = 0.5
//   fig3, fig4              baseline split (m, m_r) = (40, 0)
//   fig5                    baseline split (m, m_r) = (30, 10)
//   fig6                    (30, 10) with the referral contact rate cut to 1e-5
inline RunConfig preset_config(const std::string& name) {
  if (name == "fig3" || name == "fig4") return detail::baseline_config(40.0, 0.0);
  if (name == "fig5") return detail::baseline_config(30.0, 10.0);
  if (name == "fig6") {
    RunConfig cfg = detail::baseline_config(30.0, 10.0);
    cfg.params.lambda2 = 1e-5;
    return cfg;
  }
  if (name == "fig1-left" || name == "fig1-right") {
    RunConfig cfg = name == "fig1-left" ? detail::baseline_config(40.0, 0.0)
                                        : detail::baseline_config(30.0, 10.0);
    cfg.params.lambda1 = 0.0;
    cfg.params.lambda2 = 1e-5;
    cfg.params.lambda3 = 0.0;
    cfg.params.lambda4 = 0.0;
    cfg.params.lambda5 = 0.0;
    cfg.params.lambda7 = 0.0;
    return cfg;
  }
  if (name == "fig2-left" || name == "fig2-right") {
    RunConfig cfg = detail::baseline_config(40.0, 0.0);
    cfg.params.lambda2 = 0.0;
    cfg.params.lambda6 = 0.0;
    cfg.params.lambda5 = 1.8e-6;  // this scenario fixes the rounded value, not the ratio
    cfg.params.alpha = name == "fig2-left" ? 0.0 : 0.5;
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace custdyn
