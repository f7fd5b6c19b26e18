#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "phaselab/phaselab.hpp"

namespace phaselab::cli {

using nlohmann::json;

/// Parsed and validated run configuration (one JSON document per run).
struct ExperimentConfig {
  enum class Experiment { two_bs, pulsed, continuous, energy_shift, chain };

  Experiment experiment = Experiment::two_bs;
  SourceParams source;
  double xi = 0.0;
  double pulse_area = 0.0;
  CouplingSpec coupling;
  ChainConfig chain;
  BaseMeasure initial_base = BaseMeasure::ring(0.5 * kPi);
  std::optional<int> L;
  TimeModel time_model = TimeModel::autonomous;
  Policy policy = Policy::sample;
  int trajectories = 1;
  std::optional<std::uint64_t> seed;
  int grid = 512;
  double tolerance = 1e-9;
  bool balanced_constraint = false;

  /// Detector setup implied by the experiment kind.
  DetectorSetup setup() const {
    switch (experiment) {
      case Experiment::two_bs: return DetectorSetup::two_beam_splitter(xi);
      case Experiment::pulsed: return DetectorSetup::pulsed_direct(pulse_area);
      case Experiment::continuous:
      case Experiment::energy_shift: return DetectorSetup::continuous_coupled(coupling);
      case Experiment::chain: return DetectorSetup::chain(chain);
    }
    throw ConfigError("setup: unknown experiment kind");
  }
};

namespace detail {

inline void require_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double positive_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!(v > 0.0)) throw ConfigError(where + ": must be positive");
  return v;
}

inline double finite_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline int nonneg_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  const auto v = j.get<long long>();
  if (v < 0) throw ConfigError(where + ": must be >= 0");
  return static_cast<int>(v);
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using detail::finite_number;
  using detail::nonneg_int;
  using detail::positive_number;
  using detail::require_keys;

  require_keys(j, "config",
               {"experiment", "source", "xi", "pulse_area", "coupling", "chain", "initial_base", "L",
                "time_model", "policy", "trajectories", "seed", "grid", "tolerance", "constraint"});
  ExperimentConfig cfg;

  if (!j.contains("experiment")) throw ConfigError("config: missing 'experiment'");
  const std::string kind = j.at("experiment").get<std::string>();
  if (kind == "two_bs") cfg.experiment = ExperimentConfig::Experiment::two_bs;
  else if (kind == "pulsed") cfg.experiment = ExperimentConfig::Experiment::pulsed;
  else if (kind == "continuous") cfg.experiment = ExperimentConfig::Experiment::continuous;
  else if (kind == "energy_shift") cfg.experiment = ExperimentConfig::Experiment::energy_shift;
  else if (kind == "chain") cfg.experiment = ExperimentConfig::Experiment::chain;
  else throw ConfigError("config: unknown experiment '" + kind + "'");

  if (j.contains("source")) {
    const json& s = j.at("source");
    require_keys(s, "source", {"R", "Gamma", "T"});
    if (s.contains("R")) cfg.source.R = positive_number(s.at("R"), "source.R");
    if (s.contains("Gamma")) cfg.source.Gamma = positive_number(s.at("Gamma"), "source.Gamma");
    if (s.contains("T")) cfg.source.T = positive_number(s.at("T"), "source.T");
  }

  switch (cfg.experiment) {
    case ExperimentConfig::Experiment::two_bs:
      if (!j.contains("xi")) throw ConfigError("config: two_bs requires 'xi'");
      cfg.xi = finite_number(j.at("xi"), "xi");
      break;
    case ExperimentConfig::Experiment::pulsed:
      if (!j.contains("pulse_area")) throw ConfigError("config: pulsed requires 'pulse_area'");
      cfg.pulse_area = finite_number(j.at("pulse_area"), "pulse_area");
      break;
    case ExperimentConfig::Experiment::continuous:
    case ExperimentConfig::Experiment::energy_shift: {
      if (!j.contains("coupling")) throw ConfigError("config: coupled experiments require 'coupling'");
      const json& c = j.at("coupling");
      require_keys(c, "coupling", {"delta", "epsilon"});
      if (!c.contains("delta")) throw ConfigError("coupling: missing 'delta'");
      cfg.coupling.delta = positive_number(c.at("delta"), "coupling.delta");
      if (c.contains("epsilon")) cfg.coupling.epsilon = finite_number(c.at("epsilon"), "coupling.epsilon");
      if (cfg.experiment == ExperimentConfig::Experiment::energy_shift && cfg.coupling.epsilon == 0.0)
        throw ConfigError("config: energy_shift requires a nonzero coupling.epsilon");
      break;
    }
    case ExperimentConfig::Experiment::chain: {
      if (!j.contains("chain")) throw ConfigError("config: chain experiment requires 'chain'");
      const json& c = j.at("chain");
      require_keys(c, "chain", {"modes", "topology", "xi"});
      if (!c.contains("modes") || !c.contains("topology") || !c.contains("xi"))
        throw ConfigError("chain: requires 'modes', 'topology' and 'xi'");
      cfg.chain.K = nonneg_int(c.at("modes"), "chain.modes");
      const std::string topo = c.at("topology").get<std::string>();
      if (topo == "linear") cfg.chain.topology = ChainConfig::Topology::linear;
      else if (topo == "circular") cfg.chain.topology = ChainConfig::Topology::circular;
      else throw ConfigError("chain.topology: must be 'linear' or 'circular'");
      if (!c.at("xi").is_array()) throw ConfigError("chain.xi: expected an array");
      cfg.chain.xi.clear();
      for (const auto& x : c.at("xi")) cfg.chain.xi.push_back(finite_number(x, "chain.xi[]"));
      cfg.chain.validate();
      break;
    }
  }

  if (j.contains("initial_base")) {
    const json& b = j.at("initial_base");
    require_keys(b, "initial_base", {"kind", "theta0", "phi0"});
    const std::string bk = b.contains("kind") ? b.at("kind").get<std::string>() : "ring";
    const double th = b.contains("theta0") ? finite_number(b.at("theta0"), "initial_base.theta0") : 0.5 * kPi;
    const double ph = b.contains("phi0") ? finite_number(b.at("phi0"), "initial_base.phi0") : 0.0;
    try {
      if (bk == "ring") cfg.initial_base = BaseMeasure::ring(th);
      else if (bk == "point") cfg.initial_base = BaseMeasure::point(th, ph);
      else if (bk == "uniform_sphere") cfg.initial_base = BaseMeasure::uniform_sphere();
      else throw ConfigError("initial_base.kind: unknown kind '" + bk + "'");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("initial_base: ") + e.what());
    }
  }

  if (j.contains("L")) cfg.L = nonneg_int(j.at("L"), "L");
  if (j.contains("time_model")) {
    const std::string tm = j.at("time_model").get<std::string>();
    if (tm == "autonomous") cfg.time_model = TimeModel::autonomous;
    else if (tm == "fixed_count_uniform") cfg.time_model = TimeModel::fixed_count_uniform;
    else throw ConfigError("time_model: must be 'autonomous' or 'fixed_count_uniform'");
  }
  if (j.contains("policy")) {
    const std::string p = j.at("policy").get<std::string>();
    if (p == "sample") cfg.policy = Policy::sample;
    else if (p == "most_probable") cfg.policy = Policy::most_probable;
    else throw ConfigError("policy: must be 'sample' or 'most_probable'");
  }
  if (j.contains("trajectories")) {
    cfg.trajectories = nonneg_int(j.at("trajectories"), "trajectories");
    if (cfg.trajectories < 1) throw ConfigError("trajectories: must be >= 1");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
      throw ConfigError("seed: expected a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("grid")) {
    cfg.grid = nonneg_int(j.at("grid"), "grid");
    if (cfg.grid < 8) throw ConfigError("grid: must be >= 8");
  }
  if (j.contains("tolerance")) cfg.tolerance = positive_number(j.at("tolerance"), "tolerance");
  if (j.contains("constraint")) {
    const json& c = j.at("constraint");
    require_keys(c, "constraint", {"balanced"});
    if (c.contains("balanced")) {
      if (!c.at("balanced").is_boolean()) throw ConfigError("constraint.balanced: expected a boolean");
      cfg.balanced_constraint = c.at("balanced").get<bool>();
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
}

}  // namespace phaselab::cli
