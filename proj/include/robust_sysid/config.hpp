#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robust_sysid/attacks.hpp"
#include "robust_sysid/basis.hpp"
#include "robust_sysid/certificates.hpp"
#include "robust_sysid/csv.hpp"
#include "robust_sysid/estimator.hpp"
#include "robust_sysid/experiments.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/system.hpp"

namespace rsid {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat sectioned key-value configuration:
///
///   [system]
///   n = 3            # comments run to end of line
///   basis = multiquadric
///
/// Keys are addressed as "section.key". Values are untyped until read.
class Config {
 public:
  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  /// Applies a "section.key=value" override.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key: " + key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string s = get_string(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError("key " + key + ": expected a nonnegative integer, got '" + s + "'");
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("key " + key + ": expected a boolean, got '" + s + "'");
  }

  std::vector<double> get_double_list(const std::string& key) const {
    const std::string s = get_string(key);
    std::vector<double> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == ',') {
        const std::string item = trim(s.substr(start, i - start));
        if (!item.empty()) out.push_back(to_double(key, item));
        start = i + 1;
      }
    }
    if (out.empty()) throw ConfigError("key " + key + ": expected a comma-separated list");
    return out;
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? get_double_list(key) : std::move(fallback);
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      return parse_double(s);
    } catch (const CsvError&) {
      throw ConfigError("key " + key + ": expected a number, got '" + s + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

// --- config -> domain objects ---------------------------------------------------

inline BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "linear") return BasisKind::linear;
  if (s == "multiquadric") return BasisKind::multiquadric_lipschitz;
  if (s == "sine_bounded") return BasisKind::sine_bounded;
  if (s == "saturated_sine") return BasisKind::saturated_sine;
  throw ConfigError("key system.basis: unknown basis '" + s + "'");
}

inline AttackModelKind attack_kind_from_string(const std::string& s) {
  if (s == "lipschitz_subgaussian") return AttackModelKind::lipschitz_subgaussian;
  if (s == "bounded_uniform") return AttackModelKind::bounded_uniform;
  if (s == "annulus_uniform") return AttackModelKind::annulus_uniform;
  if (s == "unit_sphere") return AttackModelKind::unit_sphere;
  throw ConfigError("key attack.model: unknown attack model '" + s + "'");
}

/// Builds the system from [system]. Randomized pieces (ground truth, basis
/// centers) derive from fixed children of `rng`, so the same config and seed
/// always rebuild the identical system.
inline SystemSpec build_system_from_config(const Config& cfg, const RngStream& rng) {
  const auto n = static_cast<std::size_t>(cfg.get_u64("system.n"));
  const std::size_t horizon = static_cast<std::size_t>(cfg.get_u64("system.T"));
  const BasisKind kind = basis_kind_from_string(cfg.get_string("system.basis"));

  BasisSpec basis;
  switch (kind) {
    case BasisKind::linear:
      basis = BasisSpec::linear(n);
      break;
    case BasisKind::multiquadric_lipschitz: {
      RngStream centers_rng = rng.child("centers");
      basis = BasisSpec::multiquadric_random(n, centers_rng);
      break;
    }
    case BasisKind::sine_bounded:
      basis = BasisSpec::sine_bounded(n);
      break;
    case BasisKind::saturated_sine:
      basis = BasisSpec::saturated_sine(n, static_cast<std::size_t>(cfg.get_u64("system.m")));
      break;
  }

  Mat a_bar;
  const std::string truth = cfg.get_string("system.ground_truth");
  if (truth == "explicit") {
    const std::vector<double> entries = cfg.get_double_list("system.a_bar");
    if (entries.size() != n * basis.m)
      throw ConfigError("key system.a_bar: expected " + std::to_string(n * basis.m) +
                        " row-major entries");
    a_bar = Mat(n, basis.m, entries);
  } else {
    GroundTruthSpec truth_spec;
    if (truth == "spectral_uniform")
      truth_spec.style = GroundTruthStyle::spectral_uniform;
    else if (truth == "spectral_fixed")
      truth_spec.style = GroundTruthStyle::spectral_fixed;
    else if (truth == "bounded_block")
      truth_spec.style = GroundTruthStyle::bounded_block;
    else
      throw ConfigError("key system.ground_truth: unknown style '" + truth + "'");
    truth_spec.rho = cfg.get_double("system.rho", 1.0);
    truth_spec.coef_low = cfg.get_double("system.coef_low", -100.0);
    truth_spec.coef_high = cfg.get_double("system.coef_high", 100.0);
    RngStream truth_rng = rng.child("ground_truth");
    a_bar = make_ground_truth(truth_spec, n, basis.m, truth_rng);
  }

  const double guard = cfg.get_double("system.explosion_guard", kDefaultExplosionGuard);
  return SystemSpec::make(std::move(a_bar), std::move(basis), horizon, guard);
}

inline AttackModelSpec build_attack_from_config(const Config& cfg) {
  return {attack_kind_from_string(cfg.get_string("attack.model"))};
}

inline SolverConfig build_solver_from_config(const Config& cfg) {
  SolverConfig solver;
  solver.max_outer = static_cast<std::size_t>(cfg.get_u64("solver.max_outer", solver.max_outer));
  solver.tol = cfg.get_double("solver.tol", solver.tol);
  solver.eps_init = cfg.get_double("solver.eps_init", solver.eps_init);
  solver.eps_min = cfg.get_double("solver.eps_min", solver.eps_min);
  solver.eps_decay = cfg.get_double("solver.eps_decay", solver.eps_decay);
  solver.polish_iters =
      static_cast<std::size_t>(cfg.get_u64("solver.polish_iters", solver.polish_iters));
  solver.validate();
  return solver;
}

inline CertificateOptions build_certificate_from_config(const Config& cfg) {
  CertificateOptions opts;
  opts.restarts = static_cast<std::size_t>(cfg.get_u64("certificate.restarts", opts.restarts));
  opts.iters = static_cast<std::size_t>(cfg.get_u64("certificate.iters", opts.iters));
  return opts;
}

inline ExperimentSpec build_experiment_from_config(const Config& cfg) {
  ExperimentSpec spec;
  spec.scenario = scenario_from_string(cfg.get_string("experiment.scenario"));
  spec.seeds = static_cast<std::size_t>(cfg.get_u64("experiment.seeds", spec.seeds));
  if (spec.seeds < 1) throw ConfigError("key experiment.seeds: must be >= 1");
  spec.prefix_stride =
      static_cast<std::size_t>(cfg.get_u64("experiment.prefix_stride", spec.prefix_stride));
  spec.solver = build_solver_from_config(cfg);
  if (cfg.has("certificate.restarts") || cfg.has("certificate.iters"))
    spec.cert = build_certificate_from_config(cfg);
  if (cfg.has("experiment.grid")) spec.grid = cfg.get_double_list("experiment.grid");
  spec.trials = static_cast<std::size_t>(cfg.get_u64("experiment.trials", 0));
  spec.axis = cfg.get_string("experiment.axis", "p");
  return spec;
}

}  // namespace rsid
