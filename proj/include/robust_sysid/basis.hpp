#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "robust_sysid/mat.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/samplers.hpp"

namespace rsid {

enum class BasisKind {
  linear,                 // f(x) = x
  multiquadric_lipschitz, // shifted multiquadric bumps, 1-Lipschitz, f(0)=0
  sine_bounded,           // five sine harmonics per state coordinate
  saturated_sine,         // saturation ramp plus sine harmonics of coordinate 0
};

inline const char* to_string(BasisKind k) {
  switch (k) {
    case BasisKind::linear: return "linear";
    case BasisKind::multiquadric_lipschitz: return "multiquadric";
    case BasisKind::sine_bounded: return "sine_bounded";
    case BasisKind::saturated_sine: return "saturated_sine";
  }
  return "?";
}

inline constexpr std::size_t kSineHarmonicsPerState = 5;

struct BasisSpec {
  BasisKind kind = BasisKind::linear;
  std::size_t n = 0;  // state dimension
  std::size_t m = 0;  // feature dimension
  std::vector<Mat> centers;  // multiquadric only, m centers of dimension n

  static BasisSpec linear(std::size_t n) { return validated({BasisKind::linear, n, n, {}}); }

  static BasisSpec multiquadric(std::vector<Mat> centers) {
    if (centers.empty()) throw std::invalid_argument("multiquadric: no centers");
    const std::size_t n = centers.front().rows();
    BasisSpec spec{BasisKind::multiquadric_lipschitz, n, centers.size(), std::move(centers)};
    return validated(std::move(spec));
  }

  static BasisSpec multiquadric_random(std::size_t n, RngStream& rng) {
    std::vector<Mat> centers;
    centers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) centers.push_back(sample_gaussian_vector(n, rng));
    return multiquadric(std::move(centers));
  }

  static BasisSpec sine_bounded(std::size_t n) {
    return validated({BasisKind::sine_bounded, n, kSineHarmonicsPerState * n, {}});
  }

  static BasisSpec saturated_sine(std::size_t n, std::size_t m) {
    return validated({BasisKind::saturated_sine, n, m, {}});
  }

  static BasisSpec validated(BasisSpec spec) {
    if (spec.n == 0) throw std::invalid_argument("basis: n must be >= 1");
    switch (spec.kind) {
      case BasisKind::linear:
        if (spec.m != spec.n) throw std::invalid_argument("linear basis requires m == n");
        break;
      case BasisKind::multiquadric_lipschitz:
        if (spec.m != spec.n) throw std::invalid_argument("multiquadric basis requires m == n");
        if (spec.centers.size() != spec.m)
          throw std::invalid_argument("multiquadric basis requires m centers");
        for (const Mat& c : spec.centers)
          if (c.rows() != spec.n || c.cols() != 1)
            throw std::invalid_argument("multiquadric center dimension mismatch");
        break;
      case BasisKind::sine_bounded:
        if (spec.m != kSineHarmonicsPerState * spec.n)
          throw std::invalid_argument("sine_bounded basis requires m == 5n");
        break;
      case BasisKind::saturated_sine:
        if (spec.m < 2) throw std::invalid_argument("saturated_sine basis requires m >= 2");
        break;
    }
    return spec;
  }
};

inline Mat eval_basis(const BasisSpec& basis, const Mat& x) {
  if (x.rows() != basis.n || x.cols() != 1)
    throw DimensionError("eval_basis: state dimension mismatch");
  switch (basis.kind) {
    case BasisKind::linear:
      return x;
    case BasisKind::multiquadric_lipschitz: {
      Mat f(basis.m, 1);
      const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(basis.n));
      for (std::size_t i = 0; i < basis.m; ++i) {
        const Mat& c = basis.centers[i];
        double d2 = 0.0, c2 = 0.0;
        for (std::size_t k = 0; k < basis.n; ++k) {
          const double dk = x[k] - c[k];
          d2 += dk * dk;
          c2 += c[k] * c[k];
        }
        f[i] = inv_sqrt_n * (std::sqrt(d2 + 1.0) - std::sqrt(c2 + 1.0));
      }
      return f;
    }
    case BasisKind::sine_bounded: {
      Mat f(basis.m, 1);
      for (std::size_t i = 0; i < basis.n; ++i)
        for (std::size_t k = 1; k <= kSineHarmonicsPerState; ++k)
          f[i * kSineHarmonicsPerState + (k - 1)] = std::sin(static_cast<double>(k) * x[i]);
      return f;
    }
    case BasisKind::saturated_sine: {
      // Depends on coordinate 0 only.
      Mat f(basis.m, 1);
      const double y = x[0];
      f[0] = y / std::max(std::abs(y), 1.0);
      for (std::size_t k = 1; k < basis.m; ++k) f[k] = std::sin(static_cast<double>(k) * y);
      return f;
    }
  }
  throw std::logic_error("eval_basis: unknown kind");
}

/// Lipschitz constant guaranteed by construction, or 0 when none is claimed.
inline double basis_lipschitz_constant(BasisKind k) {
  switch (k) {
    case BasisKind::linear:
    case BasisKind::multiquadric_lipschitz:
      return 1.0;
    default:
      return 0.0;
  }
}

/// Entrywise bound guaranteed by construction, or 0 when none is claimed.
inline double basis_sup_bound(BasisKind k) {
  switch (k) {
    case BasisKind::sine_bounded:
    case BasisKind::saturated_sine:
      return 1.0;
    default:
      return 0.0;
  }
}

}  // namespace rsid
