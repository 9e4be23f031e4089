#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decompound/config.hpp"
#include "decompound/diagnostics.hpp"
#include "decompound/divergence.hpp"
#include "decompound/io.hpp"
#include "decompound/sampler.hpp"
#include "decompound/simulate.hpp"

namespace decompound {

/// A fresh directory per run: created on demand, refused if it already holds
/// files, so no run can overwrite another's artifacts.
inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path path(dir);
  if (fs::exists(path)) {
    if (!fs::is_directory(path) || !fs::is_empty(path)) {
      throw std::runtime_error("output directory already in use: " + dir);
    }
  } else {
    fs::create_directories(path);
  }
  return path;
}

namespace cli_detail {

inline void write_common_metadata(MetadataWriter& meta, const RunConfig& cfg,
                                  RunMode mode) {
  meta.entry("mode", to_string(mode));
  meta.entry("seed", *cfg.seed);
}

inline void write_hyper_metadata(MetadataWriter& meta,
                                 const Hyperparameters& hyper) {
  meta.entry("alpha0", hyper.psi_shape);
  meta.entry("beta0", hyper.psi_rate);
  meta.entry("alpha1", hyper.tau_shape);
  meta.entry("beta1", hyper.tau_rate);
  meta.entry("xi", std::span<const double>(hyper.prior_means));
  meta.entry("kappa", hyper.mean_precision_scale);
}

inline int run_simulate(const RunConfig& cfg) {
  const ModelParams truth = cfg.model_params();
  const std::size_t n = *cfg.n;
  const double delta = *cfg.delta;
  const std::string route = cfg.route.value_or("increments");
  const DataFormat format =
      parse_data_format(cfg.format.value_or("increment_csv"));
  const auto out_dir = prepare_output_dir(cfg.output_dir.value_or("out"));

  ObservationSet obs;
  std::optional<AuxiliaryState> aux;
  if (route == "increments") {
    const std::vector<double> durations(n, delta);
    auto [o, a] = simulate_increments(truth, durations, *cfg.seed);
    obs = std::move(o);
    aux = std::move(a);
  } else {
    const double horizon = static_cast<double>(n) * delta;
    const CppPath path = simulate_path(truth.intensity(),
                                       truth.jump_density(), horizon,
                                       *cfg.seed);
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
      grid[i] = delta * static_cast<double>(i + 1);
    }
    obs = discretize(path, grid);
  }
  save_observations(obs, (out_dir / "data.csv").string(), format);
  if (aux) {
    std::ofstream aux_out(out_dir / "aux.csv", std::ios::binary);
    aux_out << "index";
    for (std::size_t j = 1; j <= aux->component_count(); ++j) {
      aux_out << ",n_" << j;
    }
    aux_out << '\n';
    for (std::size_t k = 0; k < aux->segment_count(); ++k) {
      aux_out << obs.nonzero[k];
      for (const auto c : aux->row(k)) {
        aux_out << ',' << c;
      }
      aux_out << '\n';
    }
  }
  MetadataWriter meta((out_dir / "metadata.txt").string());
  write_common_metadata(meta, cfg, RunMode::Simulate);
  meta.entry("route", route);
  meta.entry("format", to_string(format));
  meta.entry("n", static_cast<std::uint64_t>(n));
  meta.entry("delta", delta);
  meta.entry("psi", std::span<const double>(truth.psi));
  meta.entry("mu", std::span<const double>(truth.means));
  meta.entry("tau", truth.precision);
  meta.entry("lambda", truth.intensity());
  meta.entry("nonzero_segments",
             static_cast<std::uint64_t>(obs.nonzero_count()));
  meta.entry("data_digest", file_digest((out_dir / "data.csv").string()));
  std::cout << "wrote " << (out_dir / "data.csv").string() << " ("
            << obs.size() << " segments, " << obs.nonzero_count()
            << " nonzero)\n";
  return 0;
}

inline int run_fit(const RunConfig& cfg) {
  const DataFormat format =
      parse_data_format(cfg.format.value_or("increment_csv"));
  const ObservationSet obs = load_observations(
      *cfg.data, format, cfg.zero_threshold.value_or(0.0));
  const std::size_t j_count = *cfg.components;
  const Hyperparameters hyper = cfg.hyperparameters(j_count);
  const RunOptions opt = cfg.run_options();
  const auto out_dir = prepare_output_dir(cfg.output_dir.value_or("out"));

  const RunResult result = run_chain(obs, hyper, j_count, opt, *cfg.seed);
  save_trace(result.trace, (out_dir / "trace.csv").string());

  MetadataWriter meta((out_dir / "metadata.txt").string());
  write_common_metadata(meta, cfg, RunMode::Fit);
  meta.entry("data", *cfg.data);
  meta.entry("data_digest", file_digest(*cfg.data));
  meta.entry("format", to_string(format));
  meta.entry("zero_threshold", cfg.zero_threshold.value_or(0.0));
  meta.entry("j", static_cast<std::uint64_t>(j_count));
  write_hyper_metadata(meta, hyper);
  meta.entry("n_iter", opt.n_iter);
  meta.entry("burn_in", opt.burn_in);
  meta.entry("thin", opt.thin);
  meta.entry("init", opt.init_policy == AuxInitPolicy::PriorConditioned
                         ? "prior"
                         : "nearest");
  meta.entry("acceptance_rate", result.acceptance_rate);
  meta.entry("post_burn_acceptance", result.post_burn_acceptance);
  std::cout << "wrote " << (out_dir / "trace.csv").string() << " ("
            << result.trace.rows.size() << " rows, acceptance "
            << format_double(result.acceptance_rate) << ")\n";
  return 0;
}

inline int run_diagnose(const RunConfig& cfg) {
  Trace trace = load_trace(*cfg.trace);
  const std::uint64_t burn_in = cfg.burn_in.value_or(trace.burn_in);
  const std::uint64_t thin = cfg.thin.value_or(1);
  if (cfg.relabel_mu) {
    trace = relabel_components(trace, *cfg.relabel_mu, burn_in, thin);
  }
  const auto out_dir = prepare_output_dir(cfg.output_dir.value_or("out"));

  const PosteriorSummary summary = posterior_summary(trace, burn_in, thin);
  {
    std::ofstream out(out_dir / "summary.txt", std::ios::binary);
    out << "retained = " << summary.retained << '\n';
    for (const ParameterSummary& p : summary.parameters) {
      out << p.name << ".mean = " << format_double(p.mean) << '\n'
          << p.name << ".sd = " << format_double(p.sd) << '\n'
          << p.name << ".q025 = " << format_double(p.q025) << '\n'
          << p.name << ".q50 = " << format_double(p.q50) << '\n'
          << p.name << ".q975 = " << format_double(p.q975) << '\n'
          << p.name << ".ess = " << format_double(p.ess) << '\n';
    }
  }
  // autocorrelations of the retained iterates, one column per parameter
  {
    const auto kept = detail::retained_rows(trace, burn_in, thin);
    const std::size_t max_lag =
        std::min<std::size_t>(cfg.acf_max_lag.value_or(50), kept.size() - 1);
    const auto names = trace_column_names(trace.component_count);
    std::vector<std::vector<double>> acfs;
    for (std::size_t c = 0; c < names.size(); ++c) {
      std::vector<double> series(kept.size());
      for (std::size_t r = 0; r < kept.size(); ++r) {
        series[r] = trace_column_value(*kept[r], trace.component_count, c);
      }
      double first = series.front();
      bool constant = true;
      for (const double v : series) {
        if (v != first) {
          constant = false;
          break;
        }
      }
      acfs.push_back(constant
                         ? std::vector<double>(max_lag + 1, 1.0)
                         : autocorrelation(series, max_lag));
    }
    std::ofstream out(out_dir / "acf.csv", std::ios::binary);
    out << "lag";
    for (const auto& n : names) {
      out << ',' << n;
    }
    out << '\n';
    for (std::size_t k = 0; k <= max_lag; ++k) {
      out << k;
      for (const auto& a : acfs) {
        out << ',' << format_double(a[k]);
      }
      out << '\n';
    }
  }
  // posterior-mean density curve
  {
    const double lo = cfg.grid_lo.value_or(-5.0);
    const double hi = cfg.grid_hi.value_or(5.0);
    const std::size_t points = cfg.grid_points.value_or(401);
    if (!(lo < hi) || points < 2) {
      throw ConfigError("diagnose: need grid_lo < grid_hi and grid_points >= 2");
    }
    std::vector<double> grid(points);
    for (std::size_t g = 0; g < points; ++g) {
      grid[g] = lo + (hi - lo) * static_cast<double>(g) /
                         static_cast<double>(points - 1);
    }
    const std::vector<double> curve = posterior_mean_density(
        trace, burn_in, thin, grid, cfg.predictive.value_or(false));
    std::ofstream out(out_dir / "density.csv", std::ios::binary);
    out << "x,density\n";
    for (std::size_t g = 0; g < points; ++g) {
      out << format_double(grid[g]) << ',' << format_double(curve[g]) << '\n';
    }
  }
  MetadataWriter meta((out_dir / "metadata.txt").string());
  write_common_metadata(meta, cfg, RunMode::Diagnose);
  meta.entry("trace", *cfg.trace);
  meta.entry("trace_digest", file_digest(*cfg.trace));
  meta.entry("burn_in", burn_in);
  meta.entry("thin", thin);
  std::cout << "wrote " << (out_dir / "summary.txt").string() << '\n';
  return 0;
}

inline int run_distance(const RunConfig& cfg) {
  MixtureDensity f{*cfg.rho, *cfg.mu, *cfg.tau};
  MixtureDensity f0{*cfg.rho0, *cfg.mu0, *cfg.tau0};
  f.validate();
  f0.validate();
  const double lambda = *cfg.lambda;
  const double lambda0 = *cfg.lambda0;
  const double delta = *cfg.delta;
  auto as_params = [](double lambda_value, const MixtureDensity& density) {
    ModelParams p;
    p.psi.resize(density.weights.size());
    for (std::size_t j = 0; j < density.weights.size(); ++j) {
      p.psi[j] = lambda_value * density.weights[j];
    }
    p.means = density.means;
    p.precision = density.precision;
    return p;
  };
  const IncrementLaw law(as_params(lambda, f), delta);
  const IncrementLaw law0(as_params(lambda0, f0), delta);

  std::vector<DivergenceKind> kinds;
  const std::string kind = cfg.kind.value_or("all");
  if (kind == "all") {
    kinds = {DivergenceKind::HellingerSq, DivergenceKind::KL,
             DivergenceKind::V};
  } else if (kind == "hellinger_sq") {
    kinds = {DivergenceKind::HellingerSq};
  } else if (kind == "kl") {
    kinds = {DivergenceKind::KL};
  } else {
    kinds = {DivergenceKind::V};
  }
  for (const DivergenceKind k : kinds) {
    const DivergenceResult raw = increment_divergence(k, law, law0);
    const DivergenceResult limit =
        limit_divergence(k, lambda, f, lambda0, f0);
    std::cout << "kind = " << to_string(k) << '\n'
              << "raw = " << format_double(raw.value) << '\n'
              << "scaled = " << format_double(raw.value / delta) << '\n'
              << "limit = " << format_double(limit.value) << '\n'
              << "quad_error = "
              << format_double(raw.quad_error + limit.quad_error) << '\n';
  }
  return 0;
}

inline int run_contract(const RunConfig& cfg) {
  ContractionConfig ccfg;
  ccfg.truth = cfg.model_params();
  const std::size_t j_count = ccfg.truth.component_count();
  ccfg.hyper = cfg.hyperparameters(j_count);
  ccfg.mcmc = cfg.run_options();
  ccfg.replications = cfg.replications.value_or(1);
  ccfg.ball_constant = cfg.ball_constant.value_or(2.0);
  ccfg.seed = *cfg.seed;
  for (std::size_t c = 0; c < cfg.grid_n->size(); ++c) {
    ccfg.grid.emplace_back(static_cast<std::size_t>((*cfg.grid_n)[c]),
                           (*cfg.grid_delta)[c]);
  }
  const auto out_dir = prepare_output_dir(cfg.output_dir.value_or("out"));
  const ContractionReport report = contraction_experiment(ccfg);
  {
    std::ofstream out(out_dir / "report.csv", std::ios::binary);
    out << "n,delta,n_delta,mean_distance,distance_variance,mass_outside,"
           "completed\n";
    for (const ContractionCell& cell : report.cells) {
      out << cell.n << ',' << format_double(cell.delta) << ','
          << format_double(cell.n_delta) << ','
          << format_double(cell.mean_distance) << ','
          << format_double(cell.distance_variance) << ','
          << format_double(cell.mass_outside) << ',' << cell.completed
          << '\n';
    }
  }
  MetadataWriter meta((out_dir / "metadata.txt").string());
  write_common_metadata(meta, cfg, RunMode::Contract);
  meta.entry("replications", static_cast<std::uint64_t>(ccfg.replications));
  meta.entry("ball_constant", ccfg.ball_constant);
  meta.entry("slope_defined", report.slope_defined ? "true" : "false");
  if (report.slope_defined) {
    meta.entry("slope", report.slope);
    meta.entry("slope_stderr", report.slope_stderr);
    std::cout << "slope = " << format_double(report.slope)
              << " (stderr " << format_double(report.slope_stderr) << ")\n";
  } else {
    std::cout << "slope undefined: need at least two grid rows with "
                 "completed fits\n";
  }
  return 0;
}

}  // namespace cli_detail

/// Entry point behind the decompound binary; args excludes the program
/// name. Returns the process exit code. Error categories on stderr are
/// machine-parsable: `error: <usage|config|runtime>: message`.
inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Bayesian decompounding of discretely observed compound "
               "Poisson processes"};
  app.require_subcommand(1);

  struct ModeSpec {
    RunMode mode = RunMode::Simulate;
    CLI::App* sub = nullptr;
    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
  };
  const std::vector<std::pair<RunMode, const char*>> modes = {
      {RunMode::Simulate, "draw a compound Poisson sample"},
      {RunMode::Fit, "run the auxiliary-variable MCMC sampler"},
      {RunMode::Diagnose, "summarize a trace"},
      {RunMode::Distance, "divergences between increment laws"},
      {RunMode::Contract, "posterior contraction study"},
  };
  std::vector<ModeSpec> specs(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    ModeSpec& spec = specs[m];
    spec.mode = modes[m].first;
    spec.sub = app.add_subcommand(to_string(spec.mode), modes[m].second);
    spec.sub->add_option("--config", spec.config_path,
                         "config file (key = value)")
        ->required();
    spec.sub->add_option("--out", spec.out_override,
                         "output directory override");
    spec.sub->add_option("--seed", spec.seed_override, "seed override");
  }

  // CLI11's vector overload consumes arguments back to front
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << "error: usage: " << e.what() << '\n' << app.help();
    return 2;
  }

  const ModeSpec* active = nullptr;
  for (const ModeSpec& spec : specs) {
    if (spec.sub->parsed()) {
      active = &spec;
      break;
    }
  }
  try {
    RunConfig cfg = parse_config(active->config_path);
    if (active->sub->count("--out") > 0) {
      cfg.output_dir = active->out_override;
    }
    if (active->sub->count("--seed") > 0) {
      cfg.seed = active->seed_override;
    }
    cfg.validate_for(active->mode);
    switch (active->mode) {
      case RunMode::Simulate: return cli_detail::run_simulate(cfg);
      case RunMode::Fit: return cli_detail::run_fit(cfg);
      case RunMode::Diagnose: return cli_detail::run_diagnose(cfg);
      case RunMode::Distance: return cli_detail::run_distance(cfg);
      case RunMode::Contract: return cli_detail::run_contract(cfg);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 3;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: runtime: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace decompound
