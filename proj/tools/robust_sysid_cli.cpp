// Command-line frontend: simulate trajectories, run the estimator and the
// ground-truth certificates on trajectory files, execute experiment scenarios
// and render SVG figures from their outputs.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robust_sysid/robust_sysid.hpp"

namespace fs = std::filesystem;
using namespace rsid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

Config load_config(const CommonArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw ConfigError("cannot open config file: " + args.config_path);
  Config cfg = Config::parse(in);
  for (const std::string& assignment : args.overrides) cfg.set(assignment);
  return cfg;
}

std::uint64_t resolve_seed(const CommonArgs& args, const Config& cfg) {
  if (args.seed_given) return args.seed;
  return cfg.get_u64("run.seed", 0);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file: " + path);
  return read_trajectory_csv(in);
}

std::vector<std::size_t> requested_prefixes(const Config& cfg, std::size_t horizon) {
  const std::string mode = cfg.get_string("estimate.prefixes", "full");
  if (mode == "full") return {horizon};
  if (mode == "stride") {
    const auto stride =
        static_cast<std::size_t>(cfg.get_u64("experiment.prefix_stride", 10));
    return prefix_grid(horizon, stride);
  }
  throw ConfigError("key estimate.prefixes: expected 'full' or 'stride', got '" + mode + "'");
}

int cmd_simulate(const CommonArgs& args) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  RngStream rng(seed);
  RngStream system_rng = rng.child("system");
  const SystemSpec system = build_system_from_config(cfg, system_rng);
  const AttackModelSpec model = build_attack_from_config(cfg);
  const double p = cfg.get_double("attack.p");

  RngStream schedule_rng = rng.child("schedule");
  const AttackSchedule schedule = sample_schedule(system.horizon, p, schedule_rng);
  RngStream attack_rng = rng.child("attacks");
  const Trajectory traj = simulate(system, schedule.times, model, attack_rng);

  fs::create_directories(args.out_dir);
  const fs::path path = fs::path(args.out_dir) / "trajectory.csv";
  std::ofstream out(path);
  write_trajectory_csv(out, traj);
  std::cout << "wrote " << path.string() << "\n"
            << "attacks: " << traj.schedule.size() << " of " << system.horizon << " steps\n"
            << "final state norm: " << format_double(norm2(traj.states.back())) << "\n";
  return kExitOk;
}

int cmd_estimate(const CommonArgs& args, const std::string& traj_path) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  RngStream rng(seed);
  RngStream system_rng = rng.child("system");
  const SystemSpec system = build_system_from_config(cfg, system_rng);
  const Trajectory traj = load_trajectory(traj_path);
  if (traj.n() != system.n) throw ConfigError("trajectory dimension does not match config");
  if (traj.horizon() > system.horizon)
    throw ConfigError("trajectory is longer than the configured horizon");

  const SolverConfig solver = build_solver_from_config(cfg);
  fs::create_directories(args.out_dir);
  const fs::path path = fs::path(args.out_dir) / "estimate.csv";
  std::ofstream out(path);
  write_estimate_csv_header(out, system.n, system.m);
  Mat warm;
  bool have_warm = false;
  for (const std::size_t t_prime : requested_prefixes(cfg, traj.horizon())) {
    const RegressionDataset data = RegressionDataset::from_trajectory(traj, system.basis, t_prime);
    const EstimateResult result = solve(data, solver, have_warm ? &warm : nullptr);
    warm = result.a_hat;
    have_warm = true;
    write_estimate_csv_row(out, t_prime, result);
  }
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_certify(const CommonArgs& args, const std::string& traj_path) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  RngStream rng(seed);
  RngStream system_rng = rng.child("system");
  const SystemSpec system = build_system_from_config(cfg, system_rng);
  const Trajectory traj = load_trajectory(traj_path);
  if (traj.n() != system.n) throw ConfigError("trajectory dimension does not match config");

  const SolverConfig solver = build_solver_from_config(cfg);
  const CertificateOptions opts = build_certificate_from_config(cfg);
  fs::create_directories(args.out_dir);
  const fs::path path = fs::path(args.out_dir) / "certificate.csv";
  std::ofstream out(path);
  write_certificate_csv_header(out);
  Mat warm;
  bool have_warm = false;
  for (const std::size_t t_prime : requested_prefixes(cfg, traj.horizon())) {
    const RegressionDataset data = RegressionDataset::from_trajectory(traj, system.basis, t_prime);
    const EstimateResult est = solve(data, solver, have_warm ? &warm : nullptr);
    warm = est.a_hat;
    have_warm = true;
    const CertificateProblem prob =
        CertificateProblem::from_trajectory(traj, system.basis, t_prime);
    RngStream cert_rng = rng.child("certify", t_prime);
    const CertificateReport rep =
        certify(system.a_bar, est.a_hat, data, prob, opts, cert_rng);
    write_certificate_csv_row(out, t_prime, rep);
  }
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_experiment(const CommonArgs& args) {
  const Config cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  const ExperimentSpec spec = build_experiment_from_config(cfg);
  const RngStream rng = RngStream(seed).child(to_string(spec.scenario));
  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);

  switch (spec.scenario) {
    case Scenario::rank_degeneracy: {
      const auto m = static_cast<std::size_t>(cfg.get_u64("experiment.m", 30));
      const double p = cfg.get_double("attack.p", 0.5);
      const auto horizon = static_cast<std::size_t>(cfg.get_u64("experiment.T", 50));
      const std::size_t trials = spec.trials == 0 ? 500 : spec.trials;
      const StudyResult res = run_rank_degeneracy_study(m, p, horizon, trials, rng);
      const fs::path dir = out_dir / to_string(spec.scenario);
      fs::create_directories(dir);
      std::ofstream out(dir / "summary.csv");
      write_metadata_comment(out, seed, to_string(spec.scenario), "");
      out << "m,p,T,trials,hits,observed_freq,bound\n"
          << m << "," << format_double(p) << "," << horizon << "," << res.trials << ","
          << res.hits << "," << format_double(res.observed_freq) << ","
          << format_double(res.bound) << "\n";
      std::cout << "non-uniqueness frequency: " << format_double(res.observed_freq)
                << " (bound " << format_double(res.bound) << ")\n";
      return kExitOk;
    }
    case Scenario::unstable: {
      const double rho = cfg.get_double("system.rho", 5.0);
      const auto n = static_cast<std::size_t>(cfg.get_u64("system.n", 1));
      const double p = cfg.get_double("attack.p", 0.5);
      const auto horizon = static_cast<std::size_t>(cfg.get_u64("experiment.T", 3));
      const std::size_t trials = spec.trials == 0 ? 2000 : spec.trials;
      const StudyResult res =
          run_unstable_recovery_study(rho, n, p, horizon, trials, rng, spec.cert);
      const fs::path dir = out_dir / to_string(spec.scenario);
      fs::create_directories(dir);
      std::ofstream out(dir / "summary.csv");
      write_metadata_comment(out, seed, to_string(spec.scenario), "");
      out << "rho,n,p,T,trials,hits,observed_freq,bound\n"
          << format_double(rho) << "," << n << "," << format_double(p) << "," << horizon << ","
          << res.trials << "," << res.hits << "," << format_double(res.observed_freq) << ","
          << format_double(res.bound) << "\n";
      std::cout << "non-optimality frequency: " << format_double(res.observed_freq)
                << " (bound " << format_double(res.bound) << ")\n";
      return kExitOk;
    }
    case Scenario::scaling_trend: {
      const std::vector<double> grid =
          spec.grid.empty() ? (spec.axis == "n" ? std::vector<double>{3, 5, 7}
                                                : std::vector<double>{0.7, 0.8, 0.85})
                            : spec.grid;
      const ScalingTrendResult res = run_scaling_trend(spec.axis, grid, spec, rng);
      write_scenario_outputs(out_dir, res.series, seed);
      const fs::path dir = out_dir / res.series.front().scenario;
      std::ofstream out(dir / "trend.csv");
      write_metadata_comment(out, seed, res.series.front().scenario, "");
      out << "axis_value,mean_recovery_Tprime\n";
      for (std::size_t i = 0; i < res.grid.size(); ++i)
        out << format_double(res.grid[i]) << "," << format_double(res.recovery_t[i]) << "\n";
      out << "# spearman=" << format_double(res.spearman)
          << (res.degenerate ? " degenerate=1" : "") << "\n";
      std::cout << "spearman(" << spec.axis << ", recovery): " << format_double(res.spearman)
                << "\n";
      return kExitOk;
    }
    default: {
      const std::vector<MetricSeries> all = run_scenario(spec, rng);
      write_scenario_outputs(out_dir, all, seed);
      for (const MetricSeries& s : all)
        std::cout << s.label << ": recovery T' = " << s.recovery_t_prime()
                  << ", exploded seeds = " << s.exploded_count << "\n";
      return kExitOk;
    }
  }
}

int cmd_report(const std::string& out_dir) {
  const fs::path root(out_dir);
  if (!fs::is_directory(root)) {
    std::cerr << "report: not a directory: " << out_dir << "\n";
    return kExitRuntime;
  }
  std::size_t figures = 0;
  std::vector<std::string> missing;
  std::vector<fs::path> scenario_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) scenario_dirs.push_back(entry.path());
  std::sort(scenario_dirs.begin(), scenario_dirs.end());

  for (const fs::path& scenario_dir : scenario_dirs) {
    struct Loaded {
      std::string label;
      std::vector<std::pair<double, double>> loss, gap, cert;
    };
    std::vector<Loaded> loaded;
    std::vector<fs::path> point_dirs;
    for (const auto& entry : fs::directory_iterator(scenario_dir))
      if (entry.is_directory()) point_dirs.push_back(entry.path());
    std::sort(point_dirs.begin(), point_dirs.end());
    for (const fs::path& point_dir : point_dirs) {
      const fs::path series_path = point_dir / "series.csv";
      if (!fs::exists(series_path)) {
        missing.push_back(series_path.string());
        continue;
      }
      std::ifstream in(series_path);
      const auto lines = read_csv_lines(in);
      Loaded data;
      data.label = point_dir.filename().string();
      for (std::size_t i = 1; i < lines.size(); ++i) {  // skip header
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() < 5) continue;
        const double t = static_cast<double>(parse_integer(fields[0]));
        data.loss.emplace_back(t, parse_double(fields[1]));
        data.gap.emplace_back(t, parse_double(fields[2]));
        data.cert.emplace_back(t, parse_double(fields[3]));
      }
      loaded.push_back(std::move(data));
    }
    if (loaded.empty()) continue;

    std::vector<SvgPanel> panels(3);
    panels[0].title = "loss gap";
    panels[1].title = "solution gap";
    panels[2].title = "optimality certificate (magnitude)";
    for (const Loaded& d : loaded) {
      panels[0].series.push_back({d.label, d.loss});
      panels[1].series.push_back({d.label, d.gap});
      panels[2].series.push_back({d.label, d.cert});
    }
    const fs::path fig_path = scenario_dir / "figure.svg";
    std::ofstream out(fig_path);
    write_log_panels_svg(out, scenario_dir.filename().string(), panels);
    std::cout << "wrote " << fig_path.string() << "\n";
    ++figures;
  }
  for (const std::string& path : missing) std::cerr << "missing series: " << path << "\n";
  if (figures == 0) {
    std::cerr << "report: no series data found under " << out_dir << "\n";
    return kExitRuntime;
  }
  return missing.empty() ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust system identification toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string traj_path;

  const auto add_common = [&args](CLI::App* cmd, bool needs_config) {
    auto* config_opt = cmd->add_option("--config", args.config_path, "config file path");
    if (needs_config) config_opt->required();
    cmd->add_option("--seed", args.seed, "master seed (overrides run.seed)")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--set", args.overrides, "override, section.key=value (repeatable)");
  };

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "simulate one attacked trajectory");
  add_common(simulate_cmd, true);
  CLI::App* estimate_cmd = app.add_subcommand("estimate", "run the estimator on a trajectory file");
  add_common(estimate_cmd, true);
  estimate_cmd->add_option("--traj", traj_path, "trajectory CSV file")->required();
  CLI::App* certify_cmd =
      app.add_subcommand("certify", "evaluate ground-truth certificates on a trajectory file");
  add_common(certify_cmd, true);
  certify_cmd->add_option("--traj", traj_path, "trajectory CSV file")->required();
  CLI::App* experiment_cmd = app.add_subcommand("experiment", "run an experiment scenario");
  add_common(experiment_cmd, true);
  CLI::App* report_cmd = app.add_subcommand("report", "render SVG figures from experiment output");
  add_common(report_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate_cmd->parsed()) return cmd_simulate(args);
    if (estimate_cmd->parsed()) return cmd_estimate(args, traj_path);
    if (certify_cmd->parsed()) return cmd_certify(args, traj_path);
    if (experiment_cmd->parsed()) return cmd_experiment(args);
    if (report_cmd->parsed()) return cmd_report(args.out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CsvError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ExplosionError& e) {
    std::cerr << "simulation aborted: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
