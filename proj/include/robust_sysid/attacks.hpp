#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "robust_sysid/basis.hpp"
#include "robust_sysid/linalg.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/samplers.hpp"

namespace rsid {

enum class AttackModelKind {
  lipschitz_subgaussian,  // Gaussian magnitude capped by state norm, spherical direction
  bounded_uniform,        // componentwise uniform with state-clamped half-width
  annulus_uniform,        // uniform over two mirrored intervals away from the state
  unit_sphere,            // uniform unit vector
};

inline const char* to_string(AttackModelKind k) {
  switch (k) {
    case AttackModelKind::lipschitz_subgaussian: return "lipschitz_subgaussian";
    case AttackModelKind::bounded_uniform: return "bounded_uniform";
    case AttackModelKind::annulus_uniform: return "annulus_uniform";
    case AttackModelKind::unit_sphere: return "unit_sphere";
  }
  return "?";
}

struct AttackModelSpec {
  AttackModelKind kind = AttackModelKind::unit_sphere;
};

struct AttackSchedule {
  std::size_t horizon = 0;
  double p = 0.0;
  std::vector<std::size_t> times;  // sorted, unique, subset of {0..horizon-1}
};

/// Draws each time instance independently with probability p. The endpoints
/// p = 0 and p = 1 are accepted for test scaffolding.
inline AttackSchedule sample_schedule(std::size_t horizon, double p, RngStream& rng) {
  if (horizon == 0) throw std::invalid_argument("sample_schedule: horizon must be >= 1");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_schedule: p out of [0, 1]");
  AttackSchedule s{horizon, p, {}};
  for (std::size_t t = 0; t < horizon; ++t)
    if (rng.bernoulli(p)) s.times.push_back(t);
  return s;
}

/// Draws one attack vector for state x_t. Outputs are never zero; magnitudes
/// drawn as exactly zero are redrawn.
inline Mat sample_attack(const AttackModelSpec& model, std::size_t /*t*/, const Mat& x_t,
                         RngStream& rng) {
  if (!x_t.is_vector() || x_t.rows() == 0)
    throw DimensionError("sample_attack: state must be a nonempty vector");
  const std::size_t n = x_t.rows();
  switch (model.kind) {
    case AttackModelKind::lipschitz_subgaussian: {
      // Magnitude ~ N(0, 1/n): the 1/n cap keeps it 1-sub-Gaussian and the
      // same value serves as the floor, so the attack distribution never
      // degenerates. Tying the variance to the state norm below the cap is
      // unstable in both directions: proportional shrinking freezes the
      // trajectory at the origin, proportional growth is heavy-tailed.
      const double sigma = std::sqrt(1.0 / static_cast<double>(n));
      double magnitude = 0.0;
      while (magnitude == 0.0) magnitude = sigma * rng.normal();
      Mat dir = sample_unit_sphere(n, rng);
      return dir *= magnitude;
    }
    case AttackModelKind::bounded_uniform: {
      for (;;) {
        Mat d(n, 1);
        bool nonzero = false;
        for (std::size_t i = 0; i < n; ++i) {
          const double c = std::min(std::max(std::abs(x_t[i]), 0.1), 0.5);
          d[i] = rng.uniform(-c * std::numbers::pi, c * std::numbers::pi);
          nonzero = nonzero || d[i] != 0.0;
        }
        if (nonzero) return d;
      }
    }
    case AttackModelKind::annulus_uniform: {
      // Operates on coordinate 0; remaining coordinates are untouched.
      const double r = std::abs(x_t[0]);
      const double mag = rng.uniform(r + std::numbers::pi, r + 2.0 * std::numbers::pi);
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      Mat d(n, 1);
      d[0] = sign * mag;
      return d;
    }
    case AttackModelKind::unit_sphere:
      return sample_unit_sphere(n, rng);
  }
  throw std::logic_error("sample_attack: unknown kind");
}

struct StealthinessReport {
  double mean_norm = 0.0;
  bool pass = false;
};

/// Empirical check that attack directions average to zero: the norm of the
/// mean of N drawn directions must stay within 4*sqrt(n/N).
template <typename Sampler>
StealthinessReport check_stealthiness_sampler(Sampler&& sampler, const Mat& x_probe,
                                              std::size_t n_draws, RngStream& rng) {
  if (n_draws < 10000) throw std::invalid_argument("check_stealthiness: need N >= 1e4");
  const std::size_t n = x_probe.rows();
  Mat mean(n, 1);
  for (std::size_t i = 0; i < n_draws; ++i) {
    Mat d = sampler(0, x_probe, rng);
    const double nrm = norm2(d);
    for (std::size_t j = 0; j < n; ++j) mean[j] += d[j] / nrm;
  }
  mean *= 1.0 / static_cast<double>(n_draws);
  StealthinessReport rep;
  rep.mean_norm = norm2(mean);
  rep.pass = rep.mean_norm <= 4.0 * std::sqrt(static_cast<double>(n) / static_cast<double>(n_draws));
  return rep;
}

inline StealthinessReport check_stealthiness(const AttackModelSpec& model, const Mat& x_probe,
                                             std::size_t n_draws, RngStream& rng) {
  return check_stealthiness_sampler(
      [&model](std::size_t t, const Mat& x, RngStream& r) { return sample_attack(model, t, x, r); },
      x_probe, n_draws, rng);
}

/// Monte-Carlo estimate of the smallest eigenvalue of
/// E[f(x + d) f(x + d)^T] under the given attack model.
inline double estimate_nondegeneracy(const AttackModelSpec& model, const BasisSpec& basis,
                                     const Mat& x_probe, std::size_t n_draws, RngStream& rng) {
  if (n_draws < 10000) throw std::invalid_argument("estimate_nondegeneracy: need N >= 1e4");
  if (x_probe.rows() != basis.n) throw DimensionError("estimate_nondegeneracy: dimension mismatch");
  const std::size_t m = basis.m;
  Mat second_moment(m, m);
  for (std::size_t i = 0; i < n_draws; ++i) {
    const Mat d = sample_attack(model, 0, x_probe, rng);
    const Mat f = eval_basis(basis, x_probe + d);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a; b < m; ++b) second_moment(a, b) += f[a] * f[b];
  }
  const double inv = 1.0 / static_cast<double>(n_draws);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      second_moment(a, b) *= inv;
      second_moment(b, a) = second_moment(a, b);
    }
  const auto ev = symmetric_eigenvalues(second_moment);
  double lmin = ev.front();
  // The averaged matrix is PSD up to roundoff; snap tiny negatives to zero.
  const double scale = std::abs(ev.back());
  if (lmin < 0.0 && lmin >= -1e-10 * std::max(scale, 1.0)) lmin = 0.0;
  return lmin;
}

}  // namespace rsid
