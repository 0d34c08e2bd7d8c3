#pragma once

#include <cstddef>
#include <stdexcept>

#include "robust_sysid/linalg.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/rng.hpp"

namespace rsid {

inline Mat sample_gaussian_vector(std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("sample_gaussian_vector: n must be >= 1");
  Mat v(n, 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

/// Uniform draw from the unit sphere: normalized Gaussian vector.
inline Mat sample_unit_sphere(std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("sample_unit_sphere: n must be >= 1");
  for (;;) {
    Mat v = sample_gaussian_vector(n, rng);
    const double nrm = norm2(v);
    if (nrm == 0.0) continue;  // probability-zero degenerate draw
    for (std::size_t i = 0; i < n; ++i) v[i] /= nrm;
    return v;
  }
}

/// Haar-uniform random orthogonal matrix: QR of a Gaussian matrix with the
/// diagonal of R sign-corrected.
inline Mat sample_orthogonal(std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("sample_orthogonal: n must be >= 1");
  for (;;) {
    Mat g(n, n);
    for (std::size_t i = 0; i < n * n; ++i) g[i] = rng.normal();
    QrResult qr = qr_decompose(g);
    double min_diag = std::abs(qr.r(0, 0));
    double max_diag = min_diag;
    for (std::size_t i = 1; i < n; ++i) {
      min_diag = std::min(min_diag, std::abs(qr.r(i, i)));
      max_diag = std::max(max_diag, std::abs(qr.r(i, i)));
    }
    if (min_diag <= 1e-12 * std::max(max_diag, 1.0)) continue;  // redraw
    Mat q = qr.q;
    for (std::size_t j = 0; j < n; ++j) {
      if (qr.r(j, j) < 0.0)
        for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
      double col_norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) col_norm += q(i, j) * q(i, j);
      col_norm = std::sqrt(col_norm);
      for (std::size_t i = 0; i < n; ++i) q(i, j) /= col_norm;
    }
    return q;
  }
}

}  // namespace rsid
