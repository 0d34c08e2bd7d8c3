#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "robust_sysid/basis.hpp"
#include "robust_sysid/linalg.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/system.hpp"

namespace rsid {

class AllFeaturesZeroError : public std::runtime_error {
 public:
  AllFeaturesZeroError() : std::runtime_error("scalar oracle: every feature is zero") {}
};

struct RegressionDataset {
  std::vector<Mat> features;  // m-vectors
  std::vector<Mat> targets;   // n-vectors

  std::size_t size() const { return features.size(); }
  std::size_t m() const { return features.empty() ? 0 : features.front().rows(); }
  std::size_t n() const { return targets.empty() ? 0 : targets.front().rows(); }

  void validate() const {
    if (features.empty() || features.size() != targets.size())
      throw std::invalid_argument("dataset: features/targets must be nonempty and aligned");
    for (std::size_t t = 0; t < features.size(); ++t) {
      if (features[t].rows() != m() || !features[t].is_vector() ||
          targets[t].rows() != n() || !targets[t].is_vector())
        throw DimensionError("dataset: inconsistent pair dimensions");
      features[t].ensure_finite();
      targets[t].ensure_finite();
    }
  }

  /// Pairs (f(x_t), x_{t+1}) for t = 0..t_prime-1.
  static RegressionDataset from_trajectory(const Trajectory& traj, const BasisSpec& basis,
                                           std::size_t t_prime) {
    if (t_prime < 1 || t_prime > traj.horizon())
      throw std::invalid_argument("dataset: prefix length out of range");
    RegressionDataset data;
    data.features.reserve(t_prime);
    data.targets.reserve(t_prime);
    for (std::size_t t = 0; t < t_prime; ++t) {
      data.features.push_back(eval_basis(basis, traj.states[t]));
      data.targets.push_back(traj.states[t + 1]);
    }
    return data;
  }
};

struct SolverConfig {
  std::size_t max_outer = 500;    // total reweighted least-squares steps
  double tol = 1e-9;              // stall threshold on the iterate move
  double eps_init = 1.0;          // initial smoothing
  double eps_min = 1e-10;         // final smoothing
  double eps_decay = 0.5;         // smoothing shrink factor
  std::size_t polish_iters = 200; // subgradient polish on the exact objective
  bool record_path = false;       // keep (eps, smoothed objective) per step

  void validate() const {
    if (max_outer == 0 || tol <= 0.0 || eps_init <= 0.0 || eps_min <= 0.0 ||
        eps_decay <= 0.0 || eps_decay >= 1.0)
      throw std::invalid_argument("solver config: invalid parameter");
  }
};

struct EstimateResult {
  Mat a_hat;
  double objective = 0.0;        // exact nonsmooth objective at a_hat
  std::size_t iterations = 0;
  bool converged = false;
  double smoothing_final = 0.0;
  bool rank_deficient = false;   // weighted Gram needed a ridge at some step
  double subgradient_norm = 0.0; // smallest-norm subgradient at a_hat
  std::vector<std::pair<double, double>> smoothed_path;  // when record_path
};

/// Sum of residual Euclidean norms at A.
inline double objective(const Mat& a, const RegressionDataset& data) {
  if (a.rows() != data.n() || a.cols() != data.m())
    throw DimensionError("objective: parameter shape mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double r = data.targets[t][i];
      for (std::size_t j = 0; j < a.cols(); ++j) r -= a(i, j) * data.features[t][j];
      s += r * r;
    }
    total += std::sqrt(s);
  }
  return total;
}

inline double smoothed_objective(const Mat& a, const RegressionDataset& data, double eps) {
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double r = data.targets[t][i];
      for (std::size_t j = 0; j < a.cols(); ++j) r -= a(i, j) * data.features[t][j];
      s += r * r;
    }
    total += std::sqrt(s + eps * eps);
  }
  return total;
}

/// Smallest-norm element of the subdifferential at A. Residuals below
/// `zero_tol` contribute a free unit-ball element, chosen by cyclic
/// projections; the rest contribute their exact direction.
inline double min_norm_subgradient(const Mat& a, const RegressionDataset& data,
                                   double zero_tol = -1.0) {
  const std::size_t n = data.n(), m = data.m();
  if (zero_tol < 0.0) {
    double ymax = 0.0;
    for (const Mat& y : data.targets) ymax = std::max(ymax, norm2(y));
    zero_tol = 1e-8 * (1.0 + ymax);
  }
  Mat fixed(n, m);
  std::vector<std::size_t> free_terms;
  for (std::size_t t = 0; t < data.size(); ++t) {
    Mat r = data.targets[t] - a * data.features[t];
    const double rn = norm2(r);
    if (rn > zero_tol) {
      const double inv = 1.0 / rn;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) fixed(i, j) -= r[i] * inv * data.features[t][j];
    } else if (norm2(data.features[t]) > 0.0) {
      free_terms.push_back(t);
    }
  }
  if (free_terms.empty()) return fixed.frobenius_norm();

  // minimize ||fixed - sum_t u_t f_t^T||_F over ||u_t|| <= 1, block coordinate descent
  std::vector<Mat> u(free_terms.size(), Mat(n, 1));
  Mat residual = fixed;
  const double scale = 1.0 + fixed.frobenius_norm();
  for (int sweep = 0; sweep < 200; ++sweep) {
    double change = 0.0;
    for (std::size_t k = 0; k < free_terms.size(); ++k) {
      const Mat& f = data.features[free_terms[k]];
      const double f2 = dot(f, f);
      Mat u_new(n, 1);
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += (residual(i, j) + u[k][i] * f[j]) * f[j];
        u_new[i] = s / f2;
      }
      const double un = norm2(u_new);
      if (un > 1.0) u_new *= 1.0 / un;
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = u_new[i] - u[k][i];
        change += std::abs(delta);
        for (std::size_t j = 0; j < m; ++j) residual(i, j) -= delta * f[j];
      }
      u[k] = std::move(u_new);
    }
    if (change <= 1e-13 * scale) break;
  }
  return residual.frobenius_norm();
}

struct ScalarOracleResult {
  double a_star = 0.0;
  double objective = 0.0;
  bool unique = true;
};

/// Exact scalar minimizer by breakpoint enumeration: the objective is
/// piecewise linear in A with kinks at target/feature ratios, so some
/// breakpoint attains the global minimum.
inline ScalarOracleResult solve_1d_oracle(const RegressionDataset& data) {
  data.validate();
  if (data.n() != 1 || data.m() != 1)
    throw std::invalid_argument("scalar oracle: requires n == m == 1");
  std::vector<double> breakpoints;
  for (std::size_t t = 0; t < data.size(); ++t)
    if (data.features[t][0] != 0.0)
      breakpoints.push_back(data.targets[t][0] / data.features[t][0]);
  if (breakpoints.empty()) throw AllFeaturesZeroError();
  std::sort(breakpoints.begin(), breakpoints.end());

  const auto eval = [&data](double a) {
    double s = 0.0;
    for (std::size_t t = 0; t < data.size(); ++t)
      s += std::abs(data.targets[t][0] - a * data.features[t][0]);
    return s;
  };
  ScalarOracleResult best;
  best.a_star = breakpoints.front();
  best.objective = eval(best.a_star);
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const double v = eval(breakpoints[i]);
    if (v < best.objective - 1e-15 * (1.0 + best.objective)) {
      best.a_star = breakpoints[i];
      best.objective = v;
      best.unique = true;
    } else if (v <= best.objective + 1e-12 * (1.0 + best.objective) &&
               std::abs(breakpoints[i] - best.a_star) > 1e-12) {
      best.unique = false;  // a second optimal breakpoint: flat valley
    }
  }
  return best;
}

/// Ridge-stabilized normal equations, as a comparison baseline.
inline Mat least_squares_baseline(const RegressionDataset& data) {
  data.validate();
  const std::size_t n = data.n(), m = data.m();
  Mat gram(m, m);
  Mat cross(m, n);  // transposed cross moment, ready for the solve
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Mat& f = data.features[t];
    const Mat& y = data.targets[t];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) gram(i, j) += f[i] * f[j];
      for (std::size_t j = 0; j < n; ++j) cross(i, j) += f[i] * y[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
  return solve_spd_with_ridge(gram, cross, 1e-12).solution.transposed();
}

/// Minimizes the sum of residual norms by smoothed iteratively reweighted
/// least squares with a shrinking smoothing parameter, followed by a
/// diminishing-step subgradient polish that keeps the best exact-objective
/// iterate.
inline EstimateResult solve(const RegressionDataset& data, const SolverConfig& config = {},
                            const Mat* warm_start = nullptr) {
  data.validate();
  config.validate();
  const std::size_t n = data.n(), m = data.m();

  EstimateResult result;
  Mat a = warm_start != nullptr ? *warm_start : least_squares_baseline(data);
  if (a.rows() != n || a.cols() != m) throw DimensionError("solve: warm start shape mismatch");

  double eps = config.eps_init;
  std::vector<double> weights(data.size());
  // Intermediate smoothing stages only warm-start the next level; cap them so
  // the floor stage, the one that decides accuracy, always gets its share of
  // the iteration budget.
  const std::size_t stage_cap = std::max<std::size_t>(2, config.max_outer / 60);
  std::size_t stage_iters = 0;
  Mat a_prev = a;
  while (result.iterations < config.max_outer) {
    // Safeguarded momentum: linearize at the extrapolated point when it does
    // not increase the smoothed objective, which keeps the per-stage descent
    // guarantee while breaking the slow crawl along flat valleys.
    Mat base = a;
    if (stage_iters > 1) {
      const double omega = static_cast<double>(stage_iters) / static_cast<double>(stage_iters + 3);
      Mat extrapolated = a;
      for (std::size_t i = 0; i < extrapolated.size(); ++i)
        extrapolated[i] += omega * (a[i] - a_prev[i]);
      if (smoothed_objective(extrapolated, data, eps) <= smoothed_objective(a, data, eps))
        base = std::move(extrapolated);
    }
    a_prev = a;
    for (std::size_t t = 0; t < data.size(); ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double r = data.targets[t][i];
        for (std::size_t j = 0; j < m; ++j) r -= base(i, j) * data.features[t][j];
        s += r * r;
      }
      weights[t] = 1.0 / std::sqrt(s + eps * eps);
    }
    Mat gram(m, m);
    Mat cross(m, n);
    for (std::size_t t = 0; t < data.size(); ++t) {
      const double w = weights[t];
      const Mat& f = data.features[t];
      const Mat& y = data.targets[t];
      for (std::size_t i = 0; i < m; ++i) {
        const double wf = w * f[i];
        if (wf == 0.0) continue;
        for (std::size_t j = i; j < m; ++j) gram(i, j) += wf * f[j];
        for (std::size_t j = 0; j < n; ++j) cross(i, j) += wf * y[j];
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
    const SpdSolveResult wls = solve_spd_with_ridge(gram, cross, 1e-12);
    result.rank_deficient = result.rank_deficient || wls.ridge_applied;
    Mat a_next = wls.solution.transposed();
    ++result.iterations;
    const double move = (a_next - a).frobenius_norm();
    a = std::move(a_next);
    ++stage_iters;
    if (config.record_path) result.smoothed_path.emplace_back(eps, smoothed_objective(a, data, eps));
    const bool at_floor = eps <= config.eps_min;
    const double stage_tol =
        (config.tol + (at_floor ? 0.0 : 0.05 * eps)) * (1.0 + a.frobenius_norm());
    if (move < stage_tol) {
      if (at_floor) {
        result.converged = true;
        break;
      }
      eps = std::max(eps * config.eps_decay, config.eps_min);
      stage_iters = 0;
    } else if (!at_floor && stage_iters >= stage_cap) {
      eps = std::max(eps * config.eps_decay, config.eps_min);
      stage_iters = 0;
    }
  }
  result.smoothing_final = eps;

  Mat best = a;
  double best_obj = objective(best, data);
  if (config.polish_iters > 0) {
    Mat iterate = a;
    const double step0 = 1e-3 * (1.0 + best.frobenius_norm());
    for (std::size_t k = 0; k < config.polish_iters; ++k) {
      Mat g(n, m);
      for (std::size_t t = 0; t < data.size(); ++t) {
        double s = 0.0;
        Mat r = data.targets[t] - iterate * data.features[t];
        s = dot(r, r);
        const double inv = 1.0 / std::sqrt(s + 1e-24);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) g(i, j) -= r[i] * inv * data.features[t][j];
      }
      const double gn = g.frobenius_norm();
      if (gn <= 1e-300) break;
      const double step = step0 / static_cast<double>(k + 1);
      g *= step / gn;
      iterate -= g;
      const double obj = objective(iterate, data);
      if (obj < best_obj) {
        best_obj = obj;
        best = iterate;
      }
    }
  }
  result.a_hat = std::move(best);
  result.objective = best_obj;
  result.subgradient_norm = min_norm_subgradient(result.a_hat, data);
  return result;
}

inline void write_estimate_csv_header(std::ostream& out, std::size_t n, std::size_t m) {
  out << "Tprime,objective,converged,iterations";
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) out << ",a_" << i << j;
  out << "\n";
}

inline void write_estimate_csv_row(std::ostream& out, std::size_t t_prime,
                                   const EstimateResult& result) {
  out << t_prime << "," << format_double(result.objective) << "," << (result.converged ? 1 : 0)
      << "," << result.iterations;
  for (std::size_t i = 0; i < result.a_hat.rows(); ++i)
    for (std::size_t j = 0; j < result.a_hat.cols(); ++j)
      out << "," << format_double(result.a_hat(i, j));
  out << "\n";
}

}  // namespace rsid
