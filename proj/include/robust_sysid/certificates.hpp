#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <utility>
#include <vector>

#include "robust_sysid/csv.hpp"
#include "robust_sysid/estimator.hpp"
#include "robust_sysid/linalg.hpp"
#include "robust_sysid/mat.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/samplers.hpp"
#include "robust_sysid/system.hpp"

namespace rsid {

/// Data of the ground-truth optimality test: clean-time features, attack-time
/// features and the recorded unit attack directions.
struct CertificateProblem {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<Mat> clean_features;     // m-vectors
  std::vector<Mat> attack_features;    // m-vectors
  std::vector<Mat> attack_directions;  // unit n-vectors, aligned with attack_features

  void validate() const {
    if (m == 0 || n == 0) throw std::invalid_argument("certificate problem: empty dimensions");
    if (attack_features.size() != attack_directions.size())
      throw std::invalid_argument("certificate problem: attack lists misaligned");
    for (const Mat& f : clean_features)
      if (f.rows() != m || !f.is_vector()) throw DimensionError("certificate problem: clean feature dim");
    for (const Mat& f : attack_features)
      if (f.rows() != m || !f.is_vector()) throw DimensionError("certificate problem: attack feature dim");
    for (const Mat& d : attack_directions) {
      if (d.rows() != n || !d.is_vector()) throw DimensionError("certificate problem: direction dim");
      if (std::abs(norm2(d) - 1.0) > 1e-12)
        throw std::invalid_argument("certificate problem: direction is not unit");
    }
  }

  static CertificateProblem from_trajectory(const Trajectory& traj, const BasisSpec& basis,
                                            std::size_t t_prime) {
    if (t_prime < 1 || t_prime > traj.horizon())
      throw std::invalid_argument("certificate problem: prefix length out of range");
    CertificateProblem prob;
    prob.m = basis.m;
    prob.n = traj.n();
    for (std::size_t t = 0; t < t_prime; ++t) {
      Mat f = eval_basis(basis, traj.states[t]);
      if (const AttackRecord* rec = traj.attack_at(t)) {
        prob.attack_features.push_back(std::move(f));
        prob.attack_directions.push_back(rec->d_hat);
      } else {
        prob.clean_features.push_back(std::move(f));
      }
    }
    return prob;
  }

  /// Linear part of the objective: sum of f_t dhat_t^T over attack times.
  Mat linear_term() const {
    Mat v(m, n);
    for (std::size_t k = 0; k < attack_features.size(); ++k) {
      const Mat& f = attack_features[k];
      const Mat& d = attack_directions[k];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v(i, j) += f[i] * d[j];
    }
    return v;
  }

  double clean_norm_sum() const {
    double s = 0.0;
    for (const Mat& f : clean_features) s += norm2(f);
    return s;
  }

  double attack_norm_sum() const {
    double s = 0.0;
    for (const Mat& f : attack_features) s += norm2(f);
    return s;
  }

  double feature_scale() const { return clean_norm_sum() + attack_norm_sum(); }
};

/// h(Z) = sum over clean t of ||Z^T f_t|| minus sum over attack t of
/// dhat_t^T Z^T f_t. Nonnegative for every Z exactly when the ground truth is
/// a global minimizer; positively homogeneous of degree one.
inline double eval_certificate_objective(const CertificateProblem& prob, const Mat& z) {
  if (z.rows() != prob.m || z.cols() != prob.n)
    throw DimensionError("certificate objective: Z shape mismatch");
  double value = 0.0;
  for (const Mat& f : prob.clean_features) {
    double s = 0.0;
    for (std::size_t j = 0; j < prob.n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < prob.m; ++i) acc += z(i, j) * f[i];
      s += acc * acc;
    }
    value += std::sqrt(s);
  }
  for (std::size_t k = 0; k < prob.attack_features.size(); ++k) {
    const Mat& f = prob.attack_features[k];
    const Mat& d = prob.attack_directions[k];
    for (std::size_t j = 0; j < prob.n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < prob.m; ++i) acc += z(i, j) * f[i];
      value -= d[j] * acc;
    }
  }
  return value;
}

/// Difference-of-norms variant: sum over clean of ||Z^T f|| minus sum over
/// attacks of ||Z^T f||. Nonnegativity for all Z is a sufficient condition
/// for ground-truth optimality.
inline double eval_balance_objective(const CertificateProblem& prob, const Mat& z) {
  double value = 0.0;
  for (const Mat& f : prob.clean_features) {
    double s = 0.0;
    for (std::size_t j = 0; j < prob.n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < prob.m; ++i) acc += z(i, j) * f[i];
      s += acc * acc;
    }
    value += std::sqrt(s);
  }
  for (const Mat& f : prob.attack_features) {
    double s = 0.0;
    for (std::size_t j = 0; j < prob.n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < prob.m; ++i) acc += z(i, j) * f[i];
      s += acc * acc;
    }
    value -= std::sqrt(s);
  }
  return value;
}

namespace detail {

inline constexpr double kNormSmoothing = 1e-12;

// Fused value and subgradient of the certificate objective.
inline double certificate_value_and_subgradient(const CertificateProblem& prob, const Mat& v,
                                                const Mat& z, Mat& grad) {
  const std::size_t m = prob.m, n = prob.n;
  grad = Mat(m, n);
  grad -= v;
  double value = 0.0;
  std::vector<double> zt_f(n);
  for (const Mat& f : prob.clean_features) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += z(i, j) * f[i];
      zt_f[j] = acc;
      s += acc * acc;
    }
    value += std::sqrt(s);
    const double inv = 1.0 / std::sqrt(s + kNormSmoothing * kNormSmoothing);
    for (std::size_t i = 0; i < m; ++i) {
      const double fi = f[i];
      if (fi == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) grad(i, j) += fi * zt_f[j] * inv;
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) value -= v(i, j) * z(i, j);
  return value;
}

// Fused value and subgradient of the difference-of-norms objective.
inline double balance_value_and_subgradient(const CertificateProblem& prob, const Mat& z,
                                            Mat& grad) {
  const std::size_t m = prob.m, n = prob.n;
  grad = Mat(m, n);
  double value = 0.0;
  std::vector<double> zt_f(n);
  const auto accumulate = [&](const Mat& f, double sign) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += z(i, j) * f[i];
      zt_f[j] = acc;
      s += acc * acc;
    }
    value += sign * std::sqrt(s);
    const double inv = sign / std::sqrt(s + kNormSmoothing * kNormSmoothing);
    for (std::size_t i = 0; i < m; ++i) {
      const double fi = f[i];
      if (fi == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) grad(i, j) += fi * zt_f[j] * inv;
    }
  };
  for (const Mat& f : prob.clean_features) accumulate(f, 1.0);
  for (const Mat& f : prob.attack_features) accumulate(f, -1.0);
  return value;
}

struct SphereMinimum {
  double value = 0.0;
  Mat z;
};

// Projected subgradient descent over the unit Frobenius sphere with
// normalized diminishing steps and best-iterate tracking. Seeds are
// normalized; degenerate (near-zero) seeds are skipped. Ties keep the
// earliest start.
template <typename ValueAndGrad>
SphereMinimum minimize_on_sphere(std::size_t m, std::size_t n, std::vector<Mat> starts,
                                 std::size_t restarts, std::size_t iters, RngStream& rng,
                                 ValueAndGrad&& value_and_grad) {
  for (std::size_t r = 0; r < restarts; ++r) {
    RngStream stream = rng.child("restart", r);
    Mat z(m, n);
    for (std::size_t i = 0; i < m * n; ++i) z[i] = stream.normal();
    starts.push_back(std::move(z));
  }
  SphereMinimum best;
  bool have_best = false;
  Mat grad(m, n);
  for (Mat& start : starts) {
    const double nrm = start.frobenius_norm();
    if (nrm <= 1e-300) continue;
    Mat z = start;
    z *= 1.0 / nrm;
    for (std::size_t k = 0; k < iters; ++k) {
      const double value = value_and_grad(z, grad);
      if (!have_best || value < best.value) {
        best.value = value;
        best.z = z;
        have_best = true;
      }
      // tangent component; radial moves are invisible after renormalization
      double radial = 0.0;
      for (std::size_t i = 0; i < grad.size(); ++i) radial += grad[i] * z[i];
      double tan_norm2 = 0.0;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] -= radial * z[i];
        tan_norm2 += grad[i] * grad[i];
      }
      const double tan_norm = std::sqrt(tan_norm2);
      if (tan_norm <= 1e-14 * (1.0 + std::abs(radial))) break;
      const double step = 0.3 / std::sqrt(static_cast<double>(k + 1));
      double znorm2 = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] -= step / tan_norm * grad[i];
        znorm2 += z[i] * z[i];
      }
      const double zn = std::sqrt(znorm2);
      if (zn <= 1e-300) break;
      for (std::size_t i = 0; i < z.size(); ++i) z[i] /= zn;
    }
  }
  if (!have_best) {
    best.z = Mat(m, n);
    if (m * n > 0) best.z[0] = 1.0;
    best.value = value_and_grad(best.z, grad);
  }
  return best;
}

// Sphere elements annihilating the clean features, available when the clean
// feature matrix is rank-deficient; each certifies non-uniqueness.
inline std::vector<Mat> clean_nullspace_seeds(const CertificateProblem& prob) {
  std::vector<Mat> seeds;
  if (prob.clean_features.empty()) {
    // whole space annihilates: align with the attack term instead
    return seeds;
  }
  Mat clean(prob.clean_features.size(), prob.m);
  for (std::size_t t = 0; t < prob.clean_features.size(); ++t)
    for (std::size_t i = 0; i < prob.m; ++i) clean(t, i) = prob.clean_features[t][i];
  const SvdResult svd = svd_jacobi(clean, true);
  const double sigma_max = svd.singular_values.empty() ? 0.0 : svd.singular_values.front();
  for (std::size_t j = 0; j < svd.singular_values.size(); ++j) {
    if (svd.singular_values[j] > 1e-8 * std::max(sigma_max, 1e-300)) continue;
    Mat zvec(prob.m, 1);
    for (std::size_t i = 0; i < prob.m; ++i) zvec[i] = svd.right_vectors(i, j);
    Mat u(prob.n, 1);
    for (std::size_t k = 0; k < prob.attack_features.size(); ++k) {
      const double proj = dot(zvec, prob.attack_features[k]);
      for (std::size_t i = 0; i < prob.n; ++i) u[i] += proj * prob.attack_directions[k][i];
    }
    const double un = norm2(u);
    if (un > 0.0)
      u *= 1.0 / un;
    else
      u[0] = 1.0;
    Mat seed(prob.m, prob.n);
    for (std::size_t i = 0; i < prob.m; ++i)
      for (std::size_t jj = 0; jj < prob.n; ++jj) seed(i, jj) = zvec[i] * u[jj];
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

}  // namespace detail

struct CertificateValue {
  double value = 0.0;  // always <= 0; equals 0 iff no violation was found
  Mat minimizer;       // ||Z||_F <= 1
};

/// Sphere minimization of the certificate objective by projected subgradient
/// descent. This is the engine behind the certificate and the uniqueness
/// margin; it never applies the scalar closed form, so it doubles as the
/// cross-check of that formula.
inline detail::SphereMinimum certificate_sphere_descent(const CertificateProblem& prob,
                                                        std::size_t restarts, std::size_t iters,
                                                        RngStream& rng,
                                                        const std::vector<Mat>& extra_seeds = {}) {
  const Mat v = prob.linear_term();
  std::vector<Mat> starts = extra_seeds;
  starts.push_back(v);  // aligned with the linear term
  for (Mat& seed : detail::clean_nullspace_seeds(prob)) starts.push_back(std::move(seed));
  const auto fn = [&prob, &v](const Mat& z, Mat& grad) {
    return detail::certificate_value_and_subgradient(prob, v, z, grad);
  };
  return detail::minimize_on_sphere(prob.m, prob.n, std::move(starts), restarts, iters, rng, fn);
}

/// Minimum of the certificate objective over the unit Frobenius ball. By
/// homogeneity this is min(0, sphere minimum); a strictly negative value
/// proves the ground truth is not a global minimizer. For m = 1 the exact
/// closed form is used.
inline CertificateValue optimality_certificate(const CertificateProblem& prob,
                                               std::size_t restarts, std::size_t iters,
                                               RngStream& rng,
                                               const std::vector<Mat>& extra_seeds = {}) {
  prob.validate();
  if (prob.m == 1) {
    const Mat v = prob.linear_term();
    const double vnorm = v.frobenius_norm();
    const double s = prob.clean_norm_sum();
    CertificateValue out;
    out.minimizer = Mat(1, prob.n);
    if (vnorm > s && vnorm > 0.0) {
      out.value = s - vnorm;
      for (std::size_t j = 0; j < prob.n; ++j) out.minimizer(0, j) = v(0, j) / vnorm;
    }
    return out;
  }
  detail::SphereMinimum sphere =
      certificate_sphere_descent(prob, restarts, iters, rng, extra_seeds);
  CertificateValue out;
  if (sphere.value < 0.0) {
    out.value = sphere.value;
    out.minimizer = std::move(sphere.z);
  } else {
    out.minimizer = Mat(prob.m, prob.n);  // Z = 0 attains the ball minimum
  }
  return out;
}

/// Minimum of the certificate objective over the unit sphere. Positive values
/// certify uniqueness of the ground truth (given optimality). Exact for
/// m = 1; otherwise a multi-restart estimate reported as an upper bound on
/// the true infimum.
inline double uniqueness_margin(const CertificateProblem& prob, std::size_t restarts,
                                std::size_t iters, RngStream& rng,
                                const std::vector<Mat>& extra_seeds = {}) {
  prob.validate();
  if (prob.m == 1) return prob.clean_norm_sum() - prob.linear_term().frobenius_norm();
  return certificate_sphere_descent(prob, restarts, iters, rng, extra_seeds).value;
}

/// Closed-form slack of the necessary optimality condition: clean feature
/// norm mass minus the Frobenius norm of the attack linear term. Negative
/// slack proves the ground truth is not optimal.
inline double necessary_condition_slack(const CertificateProblem& prob) {
  return prob.clean_norm_sum() - prob.linear_term().frobenius_norm();
}

struct SufficiencyResult {
  double margin = 0.0;
  bool certified = false;
};

/// Multi-restart sphere minimization of the difference-of-norms objective.
/// A nonnegative margin is heuristic evidence for the sufficient condition; a
/// negative margin disproves it at the found Z.
inline SufficiencyResult sufficient_condition_check(const CertificateProblem& prob,
                                                    std::size_t restarts, std::size_t iters,
                                                    RngStream& rng) {
  prob.validate();
  std::vector<Mat> starts;
  starts.push_back(prob.linear_term());
  for (Mat& seed : detail::clean_nullspace_seeds(prob)) starts.push_back(std::move(seed));
  const auto fn = [&prob](const Mat& z, Mat& grad) {
    return detail::balance_value_and_subgradient(prob, z, grad);
  };
  SufficiencyResult out;
  out.margin =
      detail::minimize_on_sphere(prob.m, prob.n, std::move(starts), restarts, iters, rng, fn)
          .value;
  out.certified = out.margin >= -1e-9 * (1.0 + prob.feature_scale());
  return out;
}

/// Numerical rank of the clean-feature matrix. Rank below m implies the
/// estimator's minimizers are not unique.
inline std::size_t degeneracy_rank(const CertificateProblem& prob) {
  if (prob.clean_features.empty()) return 0;
  Mat clean(prob.m, prob.clean_features.size());
  for (std::size_t t = 0; t < prob.clean_features.size(); ++t)
    for (std::size_t i = 0; i < prob.m; ++i) clean(i, t) = prob.clean_features[t][i];
  return numerical_rank(clean, 1e-8);
}

inline double loss_gap(const Mat& a_bar, const Mat& a_hat, const RegressionDataset& data) {
  return objective(a_bar, data) - objective(a_hat, data);
}

inline double solution_gap(const Mat& a_bar, const Mat& a_hat) {
  if (!a_bar.same_shape(a_hat)) throw DimensionError("solution_gap: shape mismatch");
  return (a_bar - a_hat).frobenius_norm();
}

struct CertificateOptions {
  std::size_t restarts = 16;
  std::size_t iters = 2000;
};

struct CertificateReport {
  double loss_gap = 0.0;
  double solution_gap = 0.0;
  double cert_value = 0.0;
  Mat cert_minimizer;
  double uniqueness_margin = 0.0;  // exact for m = 1, heuristic upper bound otherwise
  double necessary_slack = 0.0;
  std::size_t degeneracy_rank = 0;
  bool is_optimal = false;
  bool is_unique = false;
  bool uniqueness_undetermined = false;  // margin within tolerance of zero
};

/// Full report for one (ground truth, estimate, prefix) triple.
inline CertificateReport certify(const Mat& a_bar, const Mat& a_hat,
                                 const RegressionDataset& data, const CertificateProblem& prob,
                                 const CertificateOptions& opts, RngStream& rng) {
  CertificateReport rep;
  rep.loss_gap = loss_gap(a_bar, a_hat, data);
  rep.solution_gap = solution_gap(a_bar, a_hat);

  // The estimate direction is a guaranteed violation witness whenever the
  // ground truth is suboptimal, so it always joins the seed set.
  std::vector<Mat> seeds;
  Mat delta = (a_hat - a_bar).transposed();
  if (delta.frobenius_norm() > 0.0) seeds.push_back(std::move(delta));

  RngStream cert_rng = rng.child("certificate");
  const CertificateValue cert = optimality_certificate(prob, opts.restarts, opts.iters, cert_rng, seeds);
  rep.cert_value = cert.value;
  rep.cert_minimizer = cert.minimizer;
  RngStream margin_rng = rng.child("margin");
  rep.uniqueness_margin = uniqueness_margin(prob, opts.restarts, opts.iters, margin_rng, seeds);
  rep.necessary_slack = necessary_condition_slack(prob);
  rep.degeneracy_rank = degeneracy_rank(prob);

  const double tol = 1e-6 * (1.0 + prob.clean_norm_sum());
  rep.is_optimal = rep.cert_value >= -tol;
  rep.is_unique = rep.is_optimal && rep.uniqueness_margin > tol && rep.degeneracy_rank == prob.m;
  rep.uniqueness_undetermined = std::abs(rep.uniqueness_margin) <= tol;
  return rep;
}

inline void write_certificate_csv_header(std::ostream& out) {
  out << "Tprime,loss_gap,solution_gap,cert_value,uniq_margin,nec_slack,rank,is_optimal,is_unique\n";
}

inline void write_certificate_csv_row(std::ostream& out, std::size_t t_prime,
                                      const CertificateReport& rep) {
  out << t_prime << "," << format_double(rep.loss_gap) << "," << format_double(rep.solution_gap)
      << "," << format_double(rep.cert_value) << "," << format_double(rep.uniqueness_margin)
      << "," << format_double(rep.necessary_slack) << "," << rep.degeneracy_rank << ","
      << (rep.is_optimal ? 1 : 0) << "," << (rep.is_unique ? 1 : 0) << "\n";
}

}  // namespace rsid
