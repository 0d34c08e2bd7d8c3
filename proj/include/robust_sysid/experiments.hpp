#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "robust_sysid/attacks.hpp"
#include "robust_sysid/basis.hpp"
#include "robust_sysid/certificates.hpp"
#include "robust_sysid/csv.hpp"
#include "robust_sysid/estimator.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/parallel.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/system.hpp"
#include "robust_sysid/version.hpp"

namespace rsid {

enum class Scenario {
  lipschitz_frequency,
  lipschitz_dimension,
  lipschitz_spectral,
  bounded_frequency,
  bounded_dimension,
  rank_degeneracy,   // non-uniqueness study on the saturated-sine construction
  unstable,          // non-optimality study on the expanding isotropic system
  scaling_trend,
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::lipschitz_frequency: return "lipschitz_frequency";
    case Scenario::lipschitz_dimension: return "lipschitz_dimension";
    case Scenario::lipschitz_spectral: return "lipschitz_spectral";
    case Scenario::bounded_frequency: return "bounded_frequency";
    case Scenario::bounded_dimension: return "bounded_dimension";
    case Scenario::rank_degeneracy: return "rank_degeneracy";
    case Scenario::unstable: return "unstable";
    case Scenario::scaling_trend: return "scaling_trend";
  }
  return "?";
}

inline Scenario scenario_from_string(const std::string& s) {
  for (Scenario sc : {Scenario::lipschitz_frequency, Scenario::lipschitz_dimension,
                      Scenario::lipschitz_spectral, Scenario::bounded_frequency,
                      Scenario::bounded_dimension, Scenario::rank_degeneracy,
                      Scenario::unstable, Scenario::scaling_trend})
    if (s == to_string(sc)) return sc;
  throw std::invalid_argument("unknown scenario: '" + s + "'");
}

inline constexpr double kRecoveryThreshold = 1e-3;  // on the mean solution gap

struct ExperimentSpec {
  Scenario scenario = Scenario::lipschitz_frequency;
  std::size_t seeds = 10;
  std::size_t prefix_stride = 10;
  SolverConfig solver;
  CertificateOptions cert{8, 1000};  // sweep metrics; witness seeds carry exactness
  std::vector<double> grid;          // empty: scenario default
  std::size_t trials = 0;            // counterexample studies; 0: default
  std::string axis = "p";            // scaling_trend only
};

/// One grid point of a sweep. The system itself is random (ground truth
/// draw, basis centers); each seed rebuilds it from its own stream, so the
/// per-point averages are over independent realizations of the whole
/// construction, not over trajectories of one lucky draw.
struct SweepPoint {
  std::string label;
  double param_value = 0.0;
  std::size_t n = 0;
  BasisKind basis_kind = BasisKind::linear;
  std::size_t saturated_m = 0;  // saturated_sine only
  GroundTruthSpec truth;
  Mat explicit_a_bar;  // used instead of `truth` when nonempty
  std::size_t horizon = 0;
  AttackModelSpec attack;
  double p = 0.0;

  SystemSpec build_system(const RngStream& rng) const {
    BasisSpec basis;
    switch (basis_kind) {
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
        basis = BasisSpec::saturated_sine(n, saturated_m);
        break;
    }
    Mat a_bar = explicit_a_bar;
    if (a_bar.empty()) {
      RngStream truth_rng = rng.child("ground_truth");
      a_bar = make_ground_truth(truth, n, basis.m, truth_rng);
    }
    return SystemSpec::make(std::move(a_bar), std::move(basis), horizon);
  }
};

struct MetricRow {
  std::size_t t_prime = 0;
  double loss_gap = 0.0;
  double solution_gap = 0.0;
  double cert_value = 0.0;
  double scale = 0.0;  // sum of feature norms over the prefix
};

struct SeedSeries {
  bool exploded = false;
  std::size_t explosion_time = 0;
  bool rank_deficient = false;  // some prefix solve needed a ridge
  std::vector<MetricRow> rows;
};

struct MetricSeries {
  std::string scenario;
  std::string label;
  double param_value = 0.0;
  std::size_t horizon = 0;
  std::vector<std::size_t> t_grid;
  std::vector<SeedSeries> per_seed;
  std::vector<MetricRow> means;  // over completed seeds; empty if none completed
  std::size_t exploded_count = 0;

  std::size_t completed_count() const { return per_seed.size() - exploded_count; }

  /// Smallest evaluated prefix length from which the mean solution gap stays
  /// at or below the threshold; horizon + 1 if never.
  std::size_t recovery_t_prime(double threshold = kRecoveryThreshold) const {
    std::size_t best = horizon + 1;
    for (std::size_t i = means.size(); i-- > 0;) {
      if (means[i].solution_gap <= threshold)
        best = means[i].t_prime;
      else
        break;
    }
    return best;
  }

  /// Per-seed recovery onset (horizon + 1 when a seed never recovers).
  std::size_t seed_onset(std::size_t seed_idx, double threshold = kRecoveryThreshold) const {
    const SeedSeries& seed = per_seed[seed_idx];
    std::size_t best = horizon + 1;
    for (std::size_t i = seed.rows.size(); i-- > 0;) {
      if (seed.rows[i].solution_gap <= threshold)
        best = seed.rows[i].t_prime;
      else
        break;
    }
    return best;
  }

  /// Average of the per-seed onsets over completed seeds. Averaging onsets
  /// instead of thresholding the averaged gap keeps one slow seed from
  /// dominating the statistic.
  double mean_seed_onset(double threshold = kRecoveryThreshold) const {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < per_seed.size(); ++s) {
      if (per_seed[s].exploded) continue;
      total += static_cast<double>(seed_onset(s, threshold));
      ++count;
    }
    return count == 0 ? static_cast<double>(horizon + 1) : total / static_cast<double>(count);
  }
};

inline std::vector<std::size_t> prefix_grid(std::size_t horizon, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("prefix grid: stride must be >= 1");
  std::vector<std::size_t> grid;
  for (std::size_t t = stride; t < horizon; t += stride) grid.push_back(t);
  grid.push_back(horizon);
  return grid;
}

/// One grid point: per seed, simulate a trajectory and evaluate the estimate
/// and the ground-truth metrics on every prefix of the grid. Exploded seeds
/// are recorded and excluded from the means.
inline MetricSeries run_prefix_sweep(const SweepPoint& point, std::size_t seeds,
                                     std::size_t stride, const SolverConfig& solver,
                                     const CertificateOptions& cert, const RngStream& rng) {
  if (seeds < 1) throw std::invalid_argument("prefix sweep: seeds must be >= 1");
  MetricSeries series;
  series.label = point.label;
  series.param_value = point.param_value;
  series.horizon = point.horizon;
  series.t_grid = prefix_grid(point.horizon, stride);
  series.per_seed.resize(seeds);

  parallel_for(seeds, [&](std::size_t seed_idx) {
    SeedSeries& out = series.per_seed[seed_idx];
    RngStream seed_rng = rng.child("seed", seed_idx);
    const SystemSpec system = point.build_system(seed_rng.child("system"));
    RngStream schedule_rng = seed_rng.child("schedule");
    const AttackSchedule schedule = sample_schedule(system.horizon, point.p, schedule_rng);
    Trajectory traj;
    try {
      RngStream attack_rng = seed_rng.child("attacks");
      traj = simulate(system, schedule.times, point.attack, attack_rng);
    } catch (const ExplosionError& e) {
      out.exploded = true;
      out.explosion_time = e.time;
      return;
    }
    Mat a_prev;
    bool have_prev = false;
    for (const std::size_t t_prime : series.t_grid) {
      const RegressionDataset data =
          RegressionDataset::from_trajectory(traj, system.basis, t_prime);
      const EstimateResult est = solve(data, solver, have_prev ? &a_prev : nullptr);
      a_prev = est.a_hat;
      have_prev = true;
      out.rank_deficient = out.rank_deficient || est.rank_deficient;

      CertificateProblem prob =
          CertificateProblem::from_trajectory(traj, system.basis, t_prime);
      std::vector<Mat> witness;
      Mat delta = (est.a_hat - system.a_bar).transposed();
      if (delta.frobenius_norm() > 0.0) witness.push_back(std::move(delta));
      RngStream cert_rng = seed_rng.child("certificate", t_prime);
      const CertificateValue cv =
          optimality_certificate(prob, cert.restarts, cert.iters, cert_rng, witness);

      MetricRow row;
      row.t_prime = t_prime;
      row.loss_gap = loss_gap(system.a_bar, est.a_hat, data);
      row.solution_gap = solution_gap(system.a_bar, est.a_hat);
      row.cert_value = cv.value;
      row.scale = prob.feature_scale();
      out.rows.push_back(row);
    }
  });

  for (const SeedSeries& s : series.per_seed)
    if (s.exploded) ++series.exploded_count;
  const std::size_t completed = series.completed_count();
  if (completed > 0) {
    series.means.resize(series.t_grid.size());
    for (std::size_t i = 0; i < series.t_grid.size(); ++i) {
      MetricRow mean;
      mean.t_prime = series.t_grid[i];
      for (const SeedSeries& s : series.per_seed) {
        if (s.exploded) continue;
        mean.loss_gap += s.rows[i].loss_gap;
        mean.solution_gap += s.rows[i].solution_gap;
        mean.cert_value += s.rows[i].cert_value;
        mean.scale += s.rows[i].scale;
      }
      const double inv = 1.0 / static_cast<double>(completed);
      mean.loss_gap *= inv;
      mean.solution_gap *= inv;
      mean.cert_value *= inv;
      mean.scale *= inv;
      series.means[i] = mean;
    }
  }
  return series;
}

// --- scenario constructions --------------------------------------------------

namespace detail {

inline SweepPoint lipschitz_point(std::string label, double param_value, std::size_t n, double p,
                                  double rho, std::size_t horizon, GroundTruthStyle style) {
  SweepPoint point;
  point.label = std::move(label);
  point.param_value = param_value;
  point.n = n;
  point.basis_kind = BasisKind::multiquadric_lipschitz;
  point.truth = {style, rho};
  point.horizon = horizon;
  point.attack = {AttackModelKind::lipschitz_subgaussian};
  point.p = p;
  return point;
}

inline SweepPoint bounded_point(std::string label, double param_value, std::size_t n, double p,
                                std::size_t horizon) {
  SweepPoint point;
  point.label = std::move(label);
  point.param_value = param_value;
  point.n = n;
  point.basis_kind = BasisKind::sine_bounded;
  point.truth = {GroundTruthStyle::bounded_block};
  point.horizon = horizon;
  point.attack = {AttackModelKind::bounded_uniform};
  point.p = p;
  return point;
}

}  // namespace detail

/// Grid points with the published defaults for each sweep scenario.
inline std::vector<SweepPoint> build_scenario_points(Scenario scenario,
                                                     const std::vector<double>& grid_override) {
  std::vector<SweepPoint> points;
  const auto grid_or = [&grid_override](std::vector<double> fallback) {
    return grid_override.empty() ? fallback : grid_override;
  };
  switch (scenario) {
    case Scenario::lipschitz_frequency:
      for (double p : grid_or({0.7, 0.8, 0.85}))
        points.push_back(detail::lipschitz_point("p=" + format_double(p), p, 3, p, 1.0, 500,
                                                 GroundTruthStyle::spectral_uniform));
      break;
    case Scenario::lipschitz_dimension:
      for (double nv : grid_or({3, 5, 7})) {
        const auto n = static_cast<std::size_t>(nv);
        points.push_back(detail::lipschitz_point("n=" + std::to_string(n), nv, n, 0.75, 1.0, 500,
                                                 GroundTruthStyle::spectral_uniform));
      }
      break;
    case Scenario::lipschitz_spectral:
      for (double rho : grid_or({0.5, 0.95, 1.5}))
        points.push_back(detail::lipschitz_point("rho=" + format_double(rho), rho, 3, 0.75, rho,
                                                 100, GroundTruthStyle::spectral_fixed));
      break;
    case Scenario::bounded_frequency:
      for (double p : grid_or({0.7, 0.8, 0.85}))
        points.push_back(detail::bounded_point("p=" + format_double(p), p, 1, p, 900));
      break;
    case Scenario::bounded_dimension:
      for (double nv : grid_or({1, 2, 4})) {
        const auto n = static_cast<std::size_t>(nv);
        points.push_back(detail::bounded_point("n=" + std::to_string(n), nv, n, 0.7, 500));
      }
      break;
    default:
      throw std::invalid_argument("build_scenario_points: not a sweep scenario");
  }
  return points;
}

inline std::vector<MetricSeries> run_scenario(const ExperimentSpec& spec, const RngStream& rng) {
  const auto points = build_scenario_points(spec.scenario, spec.grid);
  std::vector<MetricSeries> all;
  all.reserve(points.size());
  for (const SweepPoint& point : points) {
    MetricSeries series = run_prefix_sweep(point, spec.seeds, spec.prefix_stride, spec.solver,
                                           spec.cert, rng.child(point.label));
    series.scenario = to_string(spec.scenario);
    all.push_back(std::move(series));
  }
  return all;
}

// --- counterexample studies --------------------------------------------------

struct StudyResult {
  double observed_freq = 0.0;
  double bound = 0.0;  // analytic lower bound on the failure probability
  std::size_t trials = 0;
  std::size_t hits = 0;
};

/// Non-uniqueness frequency for the saturated-sine construction under
/// mirrored-interval attacks: a trial counts when the clean-feature matrix
/// has rank below m.
inline StudyResult run_rank_degeneracy_study(std::size_t m, double p, std::size_t horizon,
                                             std::size_t trials, const RngStream& rng) {
  if (trials < 100) throw std::invalid_argument("rank degeneracy study: need trials >= 100");
  const double pq = p * (1.0 - p);
  if (pq > 0.0 && static_cast<double>(horizon) >= static_cast<double>(m) / (2.0 * pq))
    throw std::invalid_argument("rank degeneracy study: horizon too large for the regime");
  Mat a_bar(1, m);
  a_bar(0, 0) = 1.0;
  const SystemSpec system =
      SystemSpec::make(std::move(a_bar), BasisSpec::saturated_sine(1, m), horizon);
  const AttackModelSpec model{AttackModelKind::annulus_uniform};

  std::vector<unsigned char> hit(trials, 0);
  parallel_for(trials, [&](std::size_t trial) {
    RngStream trial_rng = rng.child("trial", trial);
    RngStream schedule_rng = trial_rng.child("schedule");
    const AttackSchedule schedule = sample_schedule(horizon, p, schedule_rng);
    RngStream attack_rng = trial_rng.child("attacks");
    const Trajectory traj = simulate(system, schedule.times, model, attack_rng);
    const CertificateProblem prob =
        CertificateProblem::from_trajectory(traj, system.basis, horizon);
    hit[trial] = degeneracy_rank(prob) < m ? 1 : 0;
  });

  StudyResult res;
  res.trials = trials;
  for (unsigned char h : hit) res.hits += h;
  res.observed_freq = static_cast<double>(res.hits) / static_cast<double>(trials);
  res.bound = 1.0 - 2.0 * std::exp(-static_cast<double>(m) / 3.0);
  return res;
}

/// Non-optimality frequency for the expanding isotropic system under unit
/// sphere attacks: a trial counts when the optimality certificate is
/// strictly negative.
inline StudyResult run_unstable_recovery_study(double rho, std::size_t n, double p,
                                               std::size_t horizon, std::size_t trials,
                                               const RngStream& rng,
                                               const CertificateOptions& cert = {}) {
  if (trials < 100) throw std::invalid_argument("unstable study: need trials >= 100");
  if (rho < 2.0 + std::sqrt(6.0))
    throw std::invalid_argument("unstable study: rho must be at least 2 + sqrt(6)");
  Mat a_bar = Mat::identity(n);
  a_bar *= rho;
  const SystemSpec system = SystemSpec::make(std::move(a_bar), BasisSpec::linear(n), horizon);
  const AttackModelSpec model{AttackModelKind::unit_sphere};

  std::vector<unsigned char> hit(trials, 0);
  parallel_for(trials, [&](std::size_t trial) {
    RngStream trial_rng = rng.child("trial", trial);
    RngStream schedule_rng = trial_rng.child("schedule");
    const AttackSchedule schedule = sample_schedule(horizon, p, schedule_rng);
    RngStream attack_rng = trial_rng.child("attacks");
    const Trajectory traj = simulate(system, schedule.times, model, attack_rng);
    const CertificateProblem prob =
        CertificateProblem::from_trajectory(traj, system.basis, horizon);
    RngStream cert_rng = trial_rng.child("certificate");
    const CertificateValue cv = optimality_certificate(prob, cert.restarts, cert.iters, cert_rng);
    hit[trial] = cv.value < -1e-9 * prob.feature_scale() ? 1 : 0;
  });

  StudyResult res;
  res.trials = trials;
  for (unsigned char h : hit) res.hits += h;
  res.observed_freq = static_cast<double>(res.hits) / static_cast<double>(trials);
  res.bound = p * (1.0 - std::pow(1.0 - p, static_cast<double>(horizon) - 1.0));
  return res;
}

// --- scaling trend -------------------------------------------------------------

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side has no rank variation.
inline double spearman_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) return 0.0;
  const auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs);
  const auto ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct ScalingTrendResult {
  std::vector<double> grid;
  std::vector<double> recovery_t;  // mean per-seed onset; horizon + 1 when never recovered
  double spearman = 0.0;
  bool degenerate = false;  // fewer than two grid points
  std::vector<MetricSeries> series;
};

/// Recovery-onset trend along an axis ("p" or "n") of the Lipschitz sweep.
inline ScalingTrendResult run_scaling_trend(const std::string& axis,
                                            const std::vector<double>& grid,
                                            const ExperimentSpec& spec, const RngStream& rng) {
  if (grid.empty()) throw std::invalid_argument("scaling trend: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("scaling trend: grid must be ascending");
  ScalingTrendResult res;
  res.grid = grid;
  for (double g : grid) {
    SweepPoint point;
    if (axis == "p") {
      point = detail::lipschitz_point("p=" + format_double(g), g, 3, g, 1.0, 500,
                                      GroundTruthStyle::spectral_uniform);
    } else if (axis == "n") {
      const auto n = static_cast<std::size_t>(g);
      point = detail::lipschitz_point("n=" + std::to_string(n), g, n, 0.75, 1.0, 500,
                                      GroundTruthStyle::spectral_uniform);
    } else {
      throw std::invalid_argument("scaling trend: axis must be 'p' or 'n'");
    }
    MetricSeries series = run_prefix_sweep(point, spec.seeds, spec.prefix_stride, spec.solver,
                                           spec.cert, rng.child(point.label));
    series.scenario = "scaling_trend_" + axis;
    res.recovery_t.push_back(series.mean_seed_onset());
    res.series.push_back(std::move(series));
  }
  if (grid.size() < 2) {
    res.degenerate = true;
    res.spearman = 0.0;
    return res;
  }
  res.spearman = spearman_correlation(grid, res.recovery_t);
  return res;
}

// --- output files --------------------------------------------------------------

inline void write_metadata_comment(std::ostream& out, std::uint64_t master_seed,
                                   const std::string& scenario, const std::string& label) {
  out << "# robust-sysid " << kVersion << " seed=" << master_seed << " scenario=" << scenario;
  if (!label.empty()) out << " point=" << label;
  out << "\n";
}

inline void write_series_csv(std::ostream& out, const MetricSeries& series,
                             std::uint64_t master_seed) {
  write_metadata_comment(out, master_seed, series.scenario, series.label);
  out << "# completed_seeds=" << series.completed_count()
      << " exploded_seeds=" << series.exploded_count << "\n";
  out << "Tprime,mean_loss_gap,mean_solution_gap,mean_cert_value,mean_scale\n";
  for (const MetricRow& row : series.means)
    out << row.t_prime << "," << format_double(row.loss_gap) << ","
        << format_double(row.solution_gap) << "," << format_double(row.cert_value) << ","
        << format_double(row.scale) << "\n";
}

inline void write_raw_csv(std::ostream& out, const MetricSeries& series,
                          std::uint64_t master_seed) {
  write_metadata_comment(out, master_seed, series.scenario, series.label);
  out << "seed,Tprime,loss_gap,solution_gap,cert_value,scale\n";
  for (std::size_t s = 0; s < series.per_seed.size(); ++s) {
    if (series.per_seed[s].exploded) continue;
    for (const MetricRow& row : series.per_seed[s].rows)
      out << s << "," << row.t_prime << "," << format_double(row.loss_gap) << ","
          << format_double(row.solution_gap) << "," << format_double(row.cert_value) << ","
          << format_double(row.scale) << "\n";
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<MetricSeries>& all,
                              std::uint64_t master_seed) {
  if (!all.empty()) write_metadata_comment(out, master_seed, all.front().scenario, "");
  out << "point,final_Tprime,final_loss_gap,final_solution_gap,final_cert_value,"
         "recovery_Tprime,completed_seeds,exploded_seeds\n";
  for (const MetricSeries& series : all) {
    out << series.label << ",";
    if (series.means.empty()) {
      out << "nan,nan,nan,nan,nan";
    } else {
      const MetricRow& last = series.means.back();
      out << last.t_prime << "," << format_double(last.loss_gap) << ","
          << format_double(last.solution_gap) << "," << format_double(last.cert_value) << ","
          << series.recovery_t_prime();
    }
    out << "," << series.completed_count() << "," << series.exploded_count << "\n";
  }
}

inline void write_scenario_outputs(const std::filesystem::path& out_dir,
                                   const std::vector<MetricSeries>& all,
                                   std::uint64_t master_seed) {
  if (all.empty()) return;
  const std::filesystem::path scenario_dir = out_dir / all.front().scenario;
  std::filesystem::create_directories(scenario_dir);
  for (const MetricSeries& series : all) {
    const std::filesystem::path point_dir = scenario_dir / series.label;
    std::filesystem::create_directories(point_dir);
    std::ofstream series_file(point_dir / "series.csv");
    write_series_csv(series_file, series, master_seed);
    std::ofstream raw_file(point_dir / "raw.csv");
    write_raw_csv(raw_file, series, master_seed);
  }
  std::ofstream summary(scenario_dir / "summary.csv");
  write_summary_csv(summary, all, master_seed);
}

}  // namespace rsid
