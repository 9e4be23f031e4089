#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "decompound/csv.hpp"
#include "decompound/io.hpp"
#include "decompound/mixture.hpp"
#include "decompound/sampler.hpp"

namespace decompound {

enum class RunMode { Simulate, Fit, Diagnose, Distance, Contract };

inline RunMode parse_run_mode(const std::string& name) {
  if (name == "simulate") return RunMode::Simulate;
  if (name == "fit") return RunMode::Fit;
  if (name == "diagnose") return RunMode::Diagnose;
  if (name == "distance") return RunMode::Distance;
  if (name == "contract") return RunMode::Contract;
  throw std::invalid_argument("unknown mode: " + name);
}

inline const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Simulate: return "simulate";
    case RunMode::Fit: return "fit";
    case RunMode::Diagnose: return "diagnose";
    case RunMode::Distance: return "distance";
    case RunMode::Contract: return "contract";
  }
  throw std::invalid_argument("unknown mode");
}

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Everything a run needs, read from a key = value config file. Fields are
/// optional at parse time; validate_for() enforces the per-mode requirements
/// (a seed is always required: runs must never be silently nondeterministic).
struct RunConfig {
  std::optional<RunMode> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;

  // model dimensions and (true or initial) parameters
  std::optional<std::size_t> components;          // j
  std::optional<std::vector<double>> psi;
  std::optional<std::vector<double>> mu;
  std::optional<double> tau;

  // prior hyperparameters
  std::optional<double> alpha0, beta0, alpha1, beta1, kappa;
  std::optional<std::vector<double>> xi;

  // data generation / ingestion
  std::optional<std::size_t> n;
  std::optional<double> delta;
  std::optional<std::string> route;               // increments | path
  std::optional<std::string> format;              // increment_csv | path_csv
  std::optional<std::string> data;                // input data file
  std::optional<double> zero_threshold;

  // MCMC controls
  std::optional<std::uint64_t> n_iter, burn_in, thin;
  std::optional<std::string> init;                // prior | nearest

  // diagnose controls
  std::optional<std::string> trace;               // input trace file
  std::optional<double> grid_lo, grid_hi;
  std::optional<std::size_t> grid_points;
  std::optional<std::size_t> acf_max_lag;
  std::optional<bool> predictive;
  std::optional<std::vector<double>> relabel_mu;

  // distance controls
  std::optional<std::string> kind;                // hellinger_sq | kl | v | all
  std::optional<double> lambda, lambda0;
  std::optional<std::vector<double>> rho, rho0, mu0;
  std::optional<double> tau0;

  // contraction study controls
  std::optional<std::vector<double>> grid_n;      // row-wise n values
  std::optional<std::vector<double>> grid_delta;  // row-wise delta values
  std::optional<std::size_t> replications;
  std::optional<double> ball_constant;

  Hyperparameters hyperparameters(std::size_t j_count) const {
    Hyperparameters h;
    h.psi_shape = alpha0.value_or(1.0);
    h.psi_rate = beta0.value_or(1.0);
    h.tau_shape = alpha1.value_or(1.0);
    h.tau_rate = beta1.value_or(1.0);
    h.prior_means = xi.value_or(std::vector<double>(j_count, 0.0));
    h.mean_precision_scale = kappa.value_or(1.0);
    h.validate(j_count);
    return h;
  }

  ModelParams model_params() const {
    ModelParams p;
    p.psi = psi.value();
    p.means = mu.value();
    p.precision = tau.value();
    p.validate();
    return p;
  }

  RunOptions run_options() const {
    RunOptions opt;
    opt.n_iter = n_iter.value();
    opt.thin = thin.value_or(1);
    opt.burn_in = burn_in.value_or(0);
    const std::string policy = init.value_or("prior");
    if (policy == "prior") {
      opt.init_policy = AuxInitPolicy::PriorConditioned;
    } else if (policy == "nearest") {
      opt.init_policy = AuxInitPolicy::SingleNearestMean;
    } else {
      throw ConfigError("init must be 'prior' or 'nearest', got '" + policy +
                        "'");
    }
    return opt;
  }

  void validate_for(RunMode effective_mode) const;
};

namespace detail {

inline std::vector<double> parse_double_list(const std::string& value,
                                             const std::string& where) {
  std::vector<double> out;
  for (const std::string& field : split(value, ',')) {
    out.push_back(parse_double(strip(field), where));
  }
  return out;
}

inline std::uint64_t parse_u64(const std::string& value,
                               const std::string& where) {
  const double v = parse_double(value, where);
  if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
    throw ConfigError(where + ": expected a nonnegative integer, got '" +
                      value + "'");
  }
  return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(where + ": expected true/false, got '" + value + "'");
}

}  // namespace detail

/// Parse a config file: one `key = value` per line, '#' starts a comment,
/// unknown and duplicate keys are rejected with their line number.
inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    const std::string body = strip(line);
    if (body.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(line_no);
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = strip(body.substr(0, eq));
    const std::string value = strip(body.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(where + ": empty key or value");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    using detail::parse_bool;
    using detail::parse_double_list;
    using detail::parse_u64;
    if (key == "mode") {
      try {
        cfg.mode = parse_run_mode(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else if (key == "seed") {
      cfg.seed = parse_u64(value, where);
    } else if (key == "out") {
      cfg.output_dir = value;
    } else if (key == "j") {
      cfg.components = parse_u64(value, where);
    } else if (key == "psi") {
      cfg.psi = parse_double_list(value, where);
    } else if (key == "mu") {
      cfg.mu = parse_double_list(value, where);
    } else if (key == "tau") {
      cfg.tau = parse_double(value, where);
    } else if (key == "alpha0") {
      cfg.alpha0 = parse_double(value, where);
    } else if (key == "beta0") {
      cfg.beta0 = parse_double(value, where);
    } else if (key == "alpha1") {
      cfg.alpha1 = parse_double(value, where);
    } else if (key == "beta1") {
      cfg.beta1 = parse_double(value, where);
    } else if (key == "kappa") {
      cfg.kappa = parse_double(value, where);
    } else if (key == "xi") {
      cfg.xi = parse_double_list(value, where);
    } else if (key == "n") {
      cfg.n = parse_u64(value, where);
    } else if (key == "delta") {
      cfg.delta = parse_double(value, where);
    } else if (key == "route") {
      cfg.route = value;
    } else if (key == "format") {
      cfg.format = value;
    } else if (key == "data") {
      cfg.data = value;
    } else if (key == "zero_threshold") {
      cfg.zero_threshold = parse_double(value, where);
    } else if (key == "n_iter") {
      cfg.n_iter = parse_u64(value, where);
    } else if (key == "burn_in") {
      cfg.burn_in = parse_u64(value, where);
    } else if (key == "thin") {
      cfg.thin = parse_u64(value, where);
    } else if (key == "init") {
      cfg.init = value;
    } else if (key == "trace") {
      cfg.trace = value;
    } else if (key == "grid_lo") {
      cfg.grid_lo = parse_double(value, where);
    } else if (key == "grid_hi") {
      cfg.grid_hi = parse_double(value, where);
    } else if (key == "grid_points") {
      cfg.grid_points = parse_u64(value, where);
    } else if (key == "acf_max_lag") {
      cfg.acf_max_lag = parse_u64(value, where);
    } else if (key == "predictive") {
      cfg.predictive = parse_bool(value, where);
    } else if (key == "relabel_mu") {
      cfg.relabel_mu = parse_double_list(value, where);
    } else if (key == "kind") {
      cfg.kind = value;
    } else if (key == "lambda") {
      cfg.lambda = parse_double(value, where);
    } else if (key == "lambda0") {
      cfg.lambda0 = parse_double(value, where);
    } else if (key == "rho") {
      cfg.rho = parse_double_list(value, where);
    } else if (key == "rho0") {
      cfg.rho0 = parse_double_list(value, where);
    } else if (key == "mu0") {
      cfg.mu0 = parse_double_list(value, where);
    } else if (key == "tau0") {
      cfg.tau0 = parse_double(value, where);
    } else if (key == "grid_n") {
      cfg.grid_n = parse_double_list(value, where);
    } else if (key == "grid_delta") {
      cfg.grid_delta = parse_double_list(value, where);
    } else if (key == "replications") {
      cfg.replications = parse_u64(value, where);
    } else if (key == "ball_constant") {
      cfg.ball_constant = parse_double(value, where);
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline void RunConfig::validate_for(RunMode effective_mode) const {
  auto require = [&](bool present, const char* key) {
    if (!present) {
      throw ConfigError(std::string("missing required key '") + key +
                        "' for mode " + to_string(effective_mode));
    }
  };
  if (mode && *mode != effective_mode) {
    throw ConfigError(std::string("config file declares mode ") +
                      to_string(*mode) + " but " + to_string(effective_mode) +
                      " was requested");
  }
  require(seed.has_value(), "seed");
  switch (effective_mode) {
    case RunMode::Simulate: {
      require(psi.has_value(), "psi");
      require(mu.has_value(), "mu");
      require(tau.has_value(), "tau");
      require(n.has_value(), "n");
      require(delta.has_value(), "delta");
      if (route && *route != "increments" && *route != "path") {
        throw ConfigError("route must be 'increments' or 'path'");
      }
      if (format) {
        parse_data_format(*format);
      }
      if (psi->size() != mu->size()) {
        throw ConfigError("psi and mu must have the same length");
      }
      break;
    }
    case RunMode::Fit: {
      require(data.has_value(), "data");
      require(components.has_value(), "j");
      require(n_iter.has_value(), "n_iter");
      if (format) {
        parse_data_format(*format);
      }
      if (xi && xi->size() != *components) {
        throw ConfigError("xi length must equal j");
      }
      run_options();  // validates init
      break;
    }
    case RunMode::Diagnose: {
      require(trace.has_value(), "trace");
      break;
    }
    case RunMode::Distance: {
      require(lambda.has_value(), "lambda");
      require(lambda0.has_value(), "lambda0");
      require(rho.has_value(), "rho");
      require(mu.has_value(), "mu");
      require(tau.has_value(), "tau");
      require(rho0.has_value(), "rho0");
      require(mu0.has_value(), "mu0");
      require(tau0.has_value(), "tau0");
      require(delta.has_value(), "delta");
      if (kind && *kind != "hellinger_sq" && *kind != "kl" && *kind != "v" &&
          *kind != "all") {
        throw ConfigError("kind must be hellinger_sq, kl, v or all");
      }
      break;
    }
    case RunMode::Contract: {
      require(psi.has_value(), "psi");
      require(mu.has_value(), "mu");
      require(tau.has_value(), "tau");
      require(grid_n.has_value(), "grid_n");
      require(grid_delta.has_value(), "grid_delta");
      require(n_iter.has_value(), "n_iter");
      if (grid_n->size() != grid_delta->size() || grid_n->empty()) {
        throw ConfigError("grid_n and grid_delta must be nonempty and match");
      }
      break;
    }
  }
}

}  // namespace decompound
