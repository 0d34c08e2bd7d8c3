#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "robust_sysid/attacks.hpp"
#include "robust_sysid/estimator.hpp"
#include "robust_sysid/rng.hpp"
#include "robust_sysid/system.hpp"

using namespace rsid;

namespace {

RegressionDataset scalar_dataset(std::vector<double> features, std::vector<double> targets) {
  RegressionDataset data;
  for (double f : features) data.features.push_back(Mat::col_vec({f}));
  for (double y : targets) data.targets.push_back(Mat::col_vec({y}));
  return data;
}

// The two-attack expanding-system instance: features [0,1,5], targets [1,5,26].
RegressionDataset witness_dataset() { return scalar_dataset({0, 1, 5}, {1, 5, 26}); }

// One attack then clean decay: features [0,1,0.7,0.49], targets [1,0.7,0.49,0.343].
RegressionDataset decay_dataset() {
  return scalar_dataset({0, 1, 0.7, 0.49}, {1, 0.7, 0.49, 0.343});
}

// Random scalar instance driven by a mix of attack models. Keeps the horizon
// short for the expanding interval model, which grows the state per attack.
RegressionDataset random_scalar_instance(std::uint64_t index, RngStream& master) {
  RngStream rng = master.child("instance", index);
  const AttackModelKind kind = static_cast<AttackModelKind>(index % 4);
  const bool expanding = kind == AttackModelKind::annulus_uniform;
  const double a_bar = rng.uniform(-1.2, 1.2);
  const std::size_t horizon =
      2 + static_cast<std::size_t>(rng.uniform01() * (expanding ? 18 : 48));
  const SystemSpec sys =
      SystemSpec::make(Mat::from_rows({{a_bar}}), BasisSpec::linear(1), horizon);
  RngStream sched_rng = rng.child("schedule");
  AttackSchedule schedule = sample_schedule(horizon, rng.uniform(0.2, 0.8), sched_rng);
  if (schedule.times.empty() || schedule.times.front() != 0)
    schedule.times.insert(schedule.times.begin(), 0);  // guarantee a nonzero feature
  RngStream attack_rng = rng.child("attacks");
  const Trajectory traj = simulate(sys, schedule.times, AttackModelSpec{kind}, attack_rng);
  return RegressionDataset::from_trajectory(traj, sys.basis, horizon);
}

}  // namespace

TEST_CASE("objective values on the hand-checked instances") {
  const RegressionDataset witness = witness_dataset();
  CHECK(objective(Mat::from_rows({{5.0}}), witness) == Catch::Approx(2.0).margin(1e-12));
  CHECK(objective(Mat::from_rows({{5.2}}), witness) == Catch::Approx(1.2).margin(1e-12));

  const RegressionDataset exact = scalar_dataset({1, 2, 3}, {2, 4, 6});
  CHECK(objective(Mat::from_rows({{2.0}}), exact) == 0.0);
  CHECK_THROWS_AS(objective(Mat(2, 2), exact), DimensionError);
}

TEST_CASE("solve interpolates a single pair exactly") {
  const RegressionDataset data = scalar_dataset({2}, {6});
  const EstimateResult res = solve(data);
  CHECK(res.a_hat(0, 0) == Catch::Approx(3.0).margin(1e-9));
  CHECK(res.objective <= 1e-9);
  CHECK(res.converged);
}

TEST_CASE("solve recovers the decay instance") {
  const EstimateResult res = solve(decay_dataset());
  CHECK(res.a_hat(0, 0) == Catch::Approx(0.7).margin(1e-6));
  CHECK(res.objective == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("solve lands on the off-truth optimum of the witness instance") {
  const EstimateResult res = solve(witness_dataset());
  CHECK(res.a_hat(0, 0) == Catch::Approx(5.2).margin(1e-6));
  CHECK(res.objective == Catch::Approx(1.2).margin(1e-9));
}

TEST_CASE("scalar oracle enumerates breakpoints") {
  const ScalarOracleResult witness = solve_1d_oracle(witness_dataset());
  CHECK(witness.a_star == Catch::Approx(5.2).margin(1e-12));
  CHECK(witness.objective == Catch::Approx(1.2).margin(1e-12));
  CHECK(witness.unique);

  const ScalarOracleResult single = solve_1d_oracle(scalar_dataset({1}, {0.7}));
  CHECK(single.a_star == 0.7);
  CHECK(single.objective == 0.0);

  const ScalarOracleResult flat = solve_1d_oracle(scalar_dataset({1, 1}, {0, 10}));
  CHECK(flat.objective == Catch::Approx(10.0).margin(1e-12));
  CHECK_FALSE(flat.unique);
  CHECK((flat.a_star == Catch::Approx(0.0) || flat.a_star == Catch::Approx(10.0)));

  CHECK_THROWS_AS(solve_1d_oracle(scalar_dataset({0, 0}, {1, 2})), AllFeaturesZeroError);
}

TEST_CASE("least squares baseline") {
  RngStream rng(20);
  // noiseless data from a known matrix with full-rank features
  const Mat a_bar = Mat::from_rows({{0.4, -0.2}, {0.1, 0.9}});
  RegressionDataset data;
  for (int i = 0; i < 12; ++i) {
    Mat f(2, 1);
    f[0] = rng.normal();
    f[1] = rng.normal();
    data.targets.push_back(a_bar * f);
    data.features.push_back(std::move(f));
  }
  const Mat fit = least_squares_baseline(data);
  CHECK((fit - a_bar).max_abs() <= 1e-9);

  // hand-computed normal equation on the witness: (0*1+1*5+5*26)/(0+1+25)
  const Mat witness_fit = least_squares_baseline(witness_dataset());
  CHECK(witness_fit(0, 0) == Catch::Approx(135.0 / 26.0).margin(1e-12));

  // all-zero features fall back to the ridge solution
  const Mat degenerate = least_squares_baseline(scalar_dataset({0, 0}, {1, 2}));
  CHECK(degenerate.all_finite());
}

TEST_CASE("solve flags rank-deficient feature sets instead of failing") {
  const RegressionDataset data = scalar_dataset({0, 0}, {1, 2});
  const EstimateResult res = solve(data);
  CHECK(res.rank_deficient);
  CHECK(res.objective == Catch::Approx(3.0).margin(1e-9));  // constant objective
}

TEST_CASE("smoothed objective is monotone within each smoothing stage") {
  RngStream rng(21);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const RegressionDataset data = random_scalar_instance(i, rng);
    SolverConfig config;
    config.record_path = true;
    const EstimateResult res = solve(data, config);
    for (std::size_t k = 1; k < res.smoothed_path.size(); ++k) {
      const auto& [eps_prev, val_prev] = res.smoothed_path[k - 1];
      const auto& [eps_cur, val_cur] = res.smoothed_path[k];
      if (eps_prev == eps_cur) {
        REQUIRE(val_cur <= val_prev + 1e-12 * (1.0 + std::abs(val_prev)));
      }
    }
  }
}

TEST_CASE("solve agrees with the scalar oracle on random instances") {
  RngStream rng(22);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const RegressionDataset data = random_scalar_instance(i, rng);
    const EstimateResult res = solve(data);
    const ScalarOracleResult oracle = solve_1d_oracle(data);
    INFO("instance " << i << ": solve " << res.objective << " oracle " << oracle.objective);
    REQUIRE(res.objective >= oracle.objective - 1e-9 * (1.0 + oracle.objective));
    REQUIRE(std::abs(res.objective - oracle.objective) <= 1e-6 * (1.0 + oracle.objective));
  }
}

TEST_CASE("dataset permutation leaves the solution unchanged") {
  RngStream rng(23);
  const RegressionDataset data = random_scalar_instance(3, rng);
  RegressionDataset shuffled = data;
  // deterministic reversal-based permutation
  std::reverse(shuffled.features.begin(), shuffled.features.end());
  std::reverse(shuffled.targets.begin(), shuffled.targets.end());
  const Mat probe = Mat::from_rows({{0.37}});
  CHECK(objective(probe, data) == Catch::Approx(objective(probe, shuffled)).margin(1e-12));
  const EstimateResult a = solve(data);
  const EstimateResult b = solve(shuffled);
  CHECK((a.a_hat - b.a_hat).max_abs() <= 1e-8);
}

TEST_CASE("positive scaling of targets scales the minimizer") {
  RngStream rng(24);
  const RegressionDataset data = random_scalar_instance(6, rng);
  RegressionDataset scaled = data;
  const double c = 3.5;
  for (Mat& y : scaled.targets) y *= c;
  const EstimateResult base = solve(data);
  const EstimateResult big = solve(scaled);
  CHECK(big.a_hat(0, 0) == Catch::Approx(c * base.a_hat(0, 0)).margin(1e-8 * (1.0 + c)));
}

TEST_CASE("minimal-norm subgradient is small at the solution") {
  RngStream rng(25);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const RegressionDataset data = random_scalar_instance(i + 100, rng);
    const EstimateResult res = solve(data);
    double feature_mass = 0.0;
    for (const Mat& f : data.features) feature_mass += norm2(f);
    REQUIRE(res.subgradient_norm <= 1e-5 * feature_mass);
  }
}

TEST_CASE("matrix-valued recovery from clean multivariate data") {
  RngStream rng(26);
  const SystemSpec sys = SystemSpec::make(
      make_ground_truth({GroundTruthStyle::spectral_uniform, 0.9}, 3, 3, rng),
      BasisSpec::multiquadric_random(3, rng), 80);
  RngStream sched_rng = rng.child("sched");
  const AttackSchedule schedule = sample_schedule(80, 0.5, sched_rng);
  RngStream attack_rng = rng.child("attacks");
  const Trajectory traj = simulate(
      sys, schedule.times, AttackModelSpec{AttackModelKind::lipschitz_subgaussian}, attack_rng);
  const RegressionDataset data = RegressionDataset::from_trajectory(traj, sys.basis, 80);
  const EstimateResult res = solve(data);
  // enough clean rows at this horizon: the true matrix is the minimizer,
  // and the optimal objective is the total attack mass
  CHECK((res.a_hat - sys.a_bar).frobenius_norm() <= 1e-5);
  double attack_mass = 0.0;
  for (const AttackRecord& rec : traj.attacks) attack_mass += rec.magnitude;
  CHECK(res.objective == Catch::Approx(attack_mass).epsilon(1e-6));
}

TEST_CASE("dataset validation rejects misaligned pairs") {
  RegressionDataset data;
  data.features.push_back(Mat::col_vec({1.0}));
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  data.targets.push_back(Mat::col_vec({1.0, 2.0}));
  data.features.push_back(Mat::col_vec({1.0, 2.0}));
  data.targets.push_back(Mat::col_vec({1.0}));
  CHECK_THROWS_AS(data.validate(), DimensionError);
}
