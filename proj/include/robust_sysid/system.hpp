#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "robust_sysid/attacks.hpp"
#include "robust_sysid/basis.hpp"
#include "robust_sysid/csv.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/samplers.hpp"

namespace rsid {

inline constexpr double kDefaultExplosionGuard = 1e15;

struct SystemSpec {
  std::size_t n = 0;
  std::size_t m = 0;
  Mat a_bar;        // n x m
  BasisSpec basis;
  std::size_t horizon = 0;
  double explosion_guard = kDefaultExplosionGuard;

  static SystemSpec make(Mat a_bar, BasisSpec basis, std::size_t horizon,
                         double explosion_guard = kDefaultExplosionGuard) {
    SystemSpec s;
    s.n = a_bar.rows();
    s.m = a_bar.cols();
    s.a_bar = std::move(a_bar);
    s.basis = std::move(basis);
    s.horizon = horizon;
    s.explosion_guard = explosion_guard;
    s.validate();
    return s;
  }

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("system: horizon must be >= 1");
    if (a_bar.rows() != n || a_bar.cols() != m)
      throw DimensionError("system: parameter matrix shape mismatch");
    if (basis.n != n || basis.m != m)
      throw DimensionError("system: basis dimensions mismatch");
    if (explosion_guard <= 0.0) throw std::invalid_argument("system: guard must be positive");
  }
};

enum class GroundTruthStyle { spectral_uniform, spectral_fixed, bounded_block };

inline const char* to_string(GroundTruthStyle s) {
  switch (s) {
    case GroundTruthStyle::spectral_uniform: return "spectral_uniform";
    case GroundTruthStyle::spectral_fixed: return "spectral_fixed";
    case GroundTruthStyle::bounded_block: return "bounded_block";
  }
  return "?";
}

struct GroundTruthSpec {
  GroundTruthStyle style = GroundTruthStyle::spectral_uniform;
  double rho = 1.0;        // spectral styles
  double coef_low = -100.0;   // bounded_block
  double coef_high = 100.0;
};

/// Random parameter matrix. Spectral styles build U diag(sigma) V^T from two
/// Haar-orthogonal factors; the bounded style fills one row block of
/// coefficients per state coordinate.
inline Mat make_ground_truth(const GroundTruthSpec& spec, std::size_t n, std::size_t m,
                             RngStream& rng) {
  switch (spec.style) {
    case GroundTruthStyle::spectral_uniform:
    case GroundTruthStyle::spectral_fixed: {
      if (n != m) throw DimensionError("spectral ground truth requires m == n");
      if (spec.rho <= 0.0) throw std::invalid_argument("ground truth: rho must be positive");
      Mat u = sample_orthogonal(n, rng);
      Mat v = sample_orthogonal(n, rng);
      std::vector<double> sigma(n, spec.rho);
      if (spec.style == GroundTruthStyle::spectral_uniform)
        for (std::size_t i = 0; i < n; ++i) sigma[i] = rng.uniform(0.0, spec.rho);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) u(i, j) *= sigma[j];
      return u * v.transposed();
    }
    case GroundTruthStyle::bounded_block: {
      if (m != kSineHarmonicsPerState * n)
        throw DimensionError("bounded_block ground truth requires m == 5n");
      if (spec.coef_low >= spec.coef_high)
        throw std::invalid_argument("ground truth: empty coefficient range");
      Mat a(n, m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < kSineHarmonicsPerState; ++k)
          a(i, i * kSineHarmonicsPerState + k) = rng.uniform(spec.coef_low, spec.coef_high);
      return a;
    }
  }
  throw std::logic_error("make_ground_truth: unknown style");
}

struct AttackRecord {
  Mat d_bar;        // raw attack vector, exactly as applied
  Mat d_hat;        // unit direction
  double magnitude = 0.0;
};

class ExplosionError : public std::runtime_error {
 public:
  explicit ExplosionError(std::size_t t)
      : std::runtime_error("state norm exceeded the explosion guard at t = " + std::to_string(t)),
        time(t) {}
  std::size_t time;
};

struct Trajectory {
  std::vector<Mat> states;            // horizon + 1 states, states[0] = 0
  std::vector<std::size_t> schedule;  // sorted attack times
  std::vector<AttackRecord> attacks;  // aligned with schedule

  std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }
  std::size_t n() const { return states.empty() ? 0 : states.front().rows(); }

  bool attacked_at(std::size_t t) const {
    return std::binary_search(schedule.begin(), schedule.end(), t);
  }

  const AttackRecord* attack_at(std::size_t t) const {
    const auto it = std::lower_bound(schedule.begin(), schedule.end(), t);
    if (it == schedule.end() || *it != t) return nullptr;
    return &attacks[static_cast<std::size_t>(it - schedule.begin())];
  }

  void validate() const {
    if (states.empty()) throw std::invalid_argument("trajectory: no states");
    if (norm2(states.front()) != 0.0)
      throw std::invalid_argument("trajectory: initial state must be zero");
    if (!std::is_sorted(schedule.begin(), schedule.end()) ||
        std::adjacent_find(schedule.begin(), schedule.end()) != schedule.end())
      throw std::invalid_argument("trajectory: schedule must be sorted and unique");
    if (!schedule.empty() && schedule.back() >= horizon())
      throw std::invalid_argument("trajectory: schedule time beyond horizon");
    if (attacks.size() != schedule.size())
      throw std::invalid_argument("trajectory: attack records misaligned");
    for (const AttackRecord& rec : attacks) {
      if (rec.magnitude <= 0.0) throw std::invalid_argument("trajectory: nonpositive magnitude");
      if (std::abs(norm2(rec.d_hat) - 1.0) > 1e-12)
        throw std::invalid_argument("trajectory: attack direction is not unit");
      Mat recon = rec.d_hat;
      recon *= rec.magnitude;
      recon -= rec.d_bar;
      if (norm2(recon) > 1e-12 * (1.0 + rec.magnitude))
        throw std::invalid_argument("trajectory: direction/magnitude decomposition broken");
    }
  }
};

/// Runs the recursion x_{t+1} = A f(x_t) + d_t from x_0 = 0. The sampler is
/// called only at scheduled times and must return a nonzero vector (zero draws
/// are redrawn). Throws ExplosionError once a state norm reaches the guard.
template <typename Sampler>
  requires std::invocable<Sampler&, std::size_t, const Mat&, RngStream&>
Trajectory simulate(const SystemSpec& system, const std::vector<std::size_t>& schedule,
                    Sampler&& attack_sampler, RngStream& rng) {
  system.validate();
  if (!std::is_sorted(schedule.begin(), schedule.end()) ||
      std::adjacent_find(schedule.begin(), schedule.end()) != schedule.end())
    throw std::invalid_argument("simulate: schedule must be sorted and unique");
  if (!schedule.empty() && schedule.back() >= system.horizon)
    throw std::invalid_argument("simulate: schedule time beyond horizon");

  Trajectory traj;
  traj.schedule = schedule;
  traj.states.reserve(system.horizon + 1);
  traj.states.push_back(Mat(system.n, 1));
  traj.attacks.reserve(schedule.size());

  std::size_t next_attack = 0;
  for (std::size_t t = 0; t < system.horizon; ++t) {
    const Mat& x_t = traj.states.back();
    if (norm2(x_t) >= system.explosion_guard) throw ExplosionError(t);
    Mat x_next = system.a_bar * eval_basis(system.basis, x_t);
    if (next_attack < schedule.size() && schedule[next_attack] == t) {
      Mat d = attack_sampler(t, x_t, rng);
      double mag = norm2(d);
      while (mag == 0.0) {
        d = attack_sampler(t, x_t, rng);
        mag = norm2(d);
      }
      if (d.rows() != system.n || d.cols() != 1)
        throw DimensionError("simulate: attack dimension mismatch");
      Mat d_hat = d;
      for (std::size_t i = 0; i < system.n; ++i) d_hat[i] /= mag;
      x_next += d;
      traj.attacks.push_back({std::move(d), std::move(d_hat), mag});
      ++next_attack;
    }
    if (!x_next.all_finite()) throw ExplosionError(t);
    traj.states.push_back(std::move(x_next));
  }
  if (norm2(traj.states.back()) >= system.explosion_guard) throw ExplosionError(system.horizon);
  return traj;
}

inline Trajectory simulate(const SystemSpec& system, const std::vector<std::size_t>& schedule,
                           const AttackModelSpec& model, RngStream& rng) {
  return simulate(system, schedule,
                  [&model](std::size_t t, const Mat& x, RngStream& r) {
                    return sample_attack(model, t, x, r);
                  },
                  rng);
}

/// Re-runs the recursion feeding back the recorded attack vectors. With the
/// same system this reproduces the stored states bitwise.
inline Trajectory replay(const SystemSpec& system, const Trajectory& recorded) {
  std::size_t idx = 0;
  RngStream unused(0);
  return simulate(system, recorded.schedule,
                  [&](std::size_t, const Mat&, RngStream&) { return recorded.attacks[idx++].d_bar; },
                  unused);
}

// --- trajectory serialization -----------------------------------------------
//
// CSV layout: t,x_1..x_n,attacked,dbar_1..dbar_n with one row per state. The
// final state row carries attacked=0 and zero dbar columns. Numbers use the
// shortest representation that parses back to the identical double.

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t n = traj.n();
  out << "t";
  for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
  out << ",attacked";
  for (std::size_t i = 1; i <= n; ++i) out << ",dbar_" << i;
  out << "\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    out << t;
    for (std::size_t i = 0; i < n; ++i) out << "," << format_double(traj.states[t][i]);
    const AttackRecord* rec = t < traj.horizon() ? traj.attack_at(t) : nullptr;
    out << "," << (rec ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i)
      out << "," << format_double(rec ? rec->d_bar[i] : 0.0);
    out << "\n";
  }
}

inline Trajectory read_trajectory_csv(std::istream& in) {
  const auto lines = read_csv_lines(in);
  if (lines.size() < 2) throw CsvError("trajectory file: need a header and at least one state row");
  const auto header = split_csv_line(lines.front());
  if (header.empty() || header[0] != "t")
    throw CsvError("trajectory file: malformed header, expected t,x_1,...");
  std::size_t n = 0;
  while (1 + n < header.size() && header[1 + n] == "x_" + std::to_string(n + 1)) ++n;
  if (n == 0) throw CsvError("trajectory file: malformed header, expected t,x_1,...");
  if (header.size() != 2 * n + 2 || header[1 + n] != "attacked")
    throw CsvError("trajectory file: missing attack trace columns (attacked, dbar_*)");
  for (std::size_t i = 0; i < n; ++i)
    if (header[2 + n + i] != "dbar_" + std::to_string(i + 1))
      throw CsvError("trajectory file: missing attack trace columns (attacked, dbar_*)");

  Trajectory traj;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = split_csv_line(lines[row]);
    if (fields.size() != 2 * n + 2)
      throw CsvError("trajectory file: row " + std::to_string(row) + " has wrong field count");
    if (parse_integer(fields[0]) != static_cast<long long>(row - 1))
      throw CsvError("trajectory file: non-contiguous time index at row " + std::to_string(row));
    Mat x(n, 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = parse_double(fields[1 + i]);
    x.ensure_finite();
    traj.states.push_back(std::move(x));
    const long long attacked = parse_integer(fields[1 + n]);
    if (attacked != 0 && attacked != 1)
      throw CsvError("trajectory file: attacked flag must be 0 or 1");
    if (attacked == 1) {
      const std::size_t t = row - 1;
      Mat d(n, 1);
      for (std::size_t i = 0; i < n; ++i) d[i] = parse_double(fields[2 + n + i]);
      const double mag = norm2(d);
      if (mag == 0.0) throw CsvError("trajectory file: attacked row with zero attack vector");
      Mat d_hat = d;
      for (std::size_t i = 0; i < n; ++i) d_hat[i] /= mag;
      traj.schedule.push_back(t);
      traj.attacks.push_back({std::move(d), std::move(d_hat), mag});
    }
  }
  traj.validate();
  return traj;
}

}  // namespace rsid
