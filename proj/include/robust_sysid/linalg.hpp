#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "robust_sysid/mat.hpp"

namespace rsid {

struct QrResult {
  Mat q;  // orthogonal, rows x rows
  Mat r;  // upper triangular, rows x cols
};

/// Householder QR of a square or tall matrix.
inline QrResult qr_decompose(const Mat& a) {
  const std::size_t nrows = a.rows(), ncols = a.cols();
  if (nrows < ncols) throw DimensionError("qr_decompose: requires rows >= cols");
  Mat r = a;
  Mat q = Mat::identity(nrows);
  std::vector<double> v(nrows);
  for (std::size_t k = 0; k < ncols; ++k) {
    double norm_x = 0.0;
    for (std::size_t i = k; i < nrows; ++i) norm_x += r(i, k) * r(i, k);
    norm_x = std::sqrt(norm_x);
    if (norm_x == 0.0) continue;
    const double alpha = r(k, k) >= 0.0 ? -norm_x : norm_x;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < nrows; ++i) {
      v[i] = r(i, k) - (i == k ? alpha : 0.0);
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;
    // Apply H = I - 2 v v^T / (v^T v) to R (left) and accumulate into Q.
    for (std::size_t j = k; j < ncols; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < nrows; ++i) s += v[i] * r(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < nrows; ++i) r(i, j) -= s * v[i];
    }
    for (std::size_t j = 0; j < nrows; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < nrows; ++i) s += v[i] * q(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < nrows; ++i) q(i, j) -= s * v[i];
    }
  }
  return {q.transposed(), r};
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
inline std::vector<double> symmetric_eigenvalues(const Mat& s) {
  if (s.rows() != s.cols()) throw DimensionError("symmetric_eigenvalues: not square");
  const std::size_t n = s.rows();
  Mat a = s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = avg;
    }
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += std::abs(a(i, i));
      for (std::size_t j = i + 1; j < n; ++j) off += std::abs(a(i, j));
    }
    if (off <= 1e-15 * (diag + off) || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct SvdResult {
  std::vector<double> singular_values;  // descending
  Mat right_vectors;                    // cols x cols; column j pairs with sigma_j
};

/// One-sided Jacobi SVD operating on the columns of `a` as given (no internal
/// transpose), so right_vectors refers to the input's column space.
inline SvdResult svd_jacobi(const Mat& a, bool want_vectors) {
  const std::size_t nrows = a.rows(), ncols = a.cols();
  Mat w = a;
  Mat v = want_vectors ? Mat::identity(ncols) : Mat();
  const int max_sweeps = 60;
  const double tol = 1e-14;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < ncols; ++p) {
      for (std::size_t q = p + 1; q < ncols; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < nrows; ++i) {
          app += w(i, p) * w(i, p);
          aqq += w(i, q) * w(i, q);
          apq += w(i, p) * w(i, q);
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t i = 0; i < nrows; ++i) {
          const double wip = w(i, p), wiq = w(i, q);
          w(i, p) = c * wip - sn * wiq;
          w(i, q) = sn * wip + c * wiq;
        }
        if (want_vectors) {
          for (std::size_t i = 0; i < ncols; ++i) {
            const double vip = v(i, p), viq = v(i, q);
            v(i, p) = c * vip - sn * viq;
            v(i, q) = sn * vip + c * viq;
          }
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sigma(ncols);
  std::vector<std::size_t> order(ncols);
  for (std::size_t j = 0; j < ncols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < nrows; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
    order[j] = j;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });
  SvdResult out;
  out.singular_values.resize(ncols);
  if (want_vectors) out.right_vectors = Mat(ncols, ncols);
  for (std::size_t j = 0; j < ncols; ++j) {
    out.singular_values[j] = sigma[order[j]];
    if (want_vectors)
      for (std::size_t i = 0; i < ncols; ++i) out.right_vectors(i, j) = v(i, order[j]);
  }
  return out;
}

/// Singular values, descending. Transposes internally so the Jacobi sweep
/// runs over the smaller dimension.
inline std::vector<double> singular_values(const Mat& a) {
  if (a.rows() == 0 || a.cols() == 0) return {};
  const Mat& work = a;
  if (a.cols() > a.rows()) return svd_jacobi(a.transposed(), false).singular_values;
  return svd_jacobi(work, false).singular_values;
}

inline double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  auto sv = singular_values(a);
  return sv.empty() ? 0.0 : sv.front();
}

inline std::size_t numerical_rank(const Mat& a, double rel_tol = 1e-8) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  auto sv = singular_values(a);
  if (sv.empty() || sv.front() == 0.0) return 0;
  const double cutoff = rel_tol * sv.front();
  std::size_t r = 0;
  for (double s : sv)
    if (s > cutoff) ++r;
  return r;
}

/// Cholesky factorization G = L L^T. Returns false if G is not numerically
/// positive definite; `l` is left unspecified in that case.
inline bool cholesky(const Mat& g, Mat& l) {
  const std::size_t n = g.rows();
  if (g.cols() != n) throw DimensionError("cholesky: not square");
  l = Mat(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = g(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return true;
}

/// Solves G X = B for SPD G via a precomputed Cholesky factor.
inline Mat cholesky_solve(const Mat& l, const Mat& b) {
  const std::size_t n = l.rows();
  if (b.rows() != n) throw DimensionError("cholesky_solve: shape mismatch");
  Mat x = b;
  for (std::size_t col = 0; col < b.cols(); ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, col);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, col);
      x(i, col) = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, col);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, col);
      x(ii, col) = s / l(ii, ii);
    }
  }
  return x;
}

struct SpdSolveResult {
  Mat solution;
  bool ridge_applied = false;
};

/// Solves G X = B, adding `ridge` to the diagonal if G is not positive
/// definite as given.
inline SpdSolveResult solve_spd_with_ridge(const Mat& g, const Mat& b, double ridge) {
  Mat l;
  if (cholesky(g, l)) return {cholesky_solve(l, b), false};
  Mat gr = g;
  double scale = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) scale = std::max(scale, std::abs(g(i, i)));
  const double bump = ridge * std::max(scale, 1.0);
  for (int attempt = 0; attempt < 40; ++attempt) {
    const double eps = bump * std::pow(10.0, attempt);
    for (std::size_t i = 0; i < g.rows(); ++i) gr(i, i) = g(i, i) + eps;
    if (cholesky(gr, l)) return {cholesky_solve(l, b), true};
  }
  throw std::runtime_error("solve_spd_with_ridge: factorization failed");
}

}  // namespace rsid
