#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "statemat/detection.hpp"
#include "statemat/estimator.hpp"
#include "statemat/linalg.hpp"
#include "statemat/model_matrix.hpp"
#include "test_support.hpp"

using namespace statemat;
using statemat::testing::load_system;
using statemat::testing::random_matrix;
using statemat::testing::random_spd;
using statemat::testing::random_stable;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Stable swing-form system [0 I; -M^-1 K -M^-1 D].
Mat swing_matrix(const Mat& k, const Vec& m, const Vec& d) {
  const auto n = k.rows();
  Mat a = Mat::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n).setIdentity();
  a.bottomLeftCorner(n, n) = -(m.cwiseInverse().asDiagonal() * k);
  a.bottomRightCorner(n, n) = (-d.cwiseQuotient(m)).asDiagonal();
  return a;
}

}  // namespace

TEST(BatchStats, ScalarHandExample) {
  const Mat w = (Mat(1, 3) << 1.0, 2.0, 3.0).finished();
  const SampleStats s = batch_stats(w);
  EXPECT_DOUBLE_EQ(s.mean(0), 2.0);
  EXPECT_NEAR(s.cov(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.lag(0, 0), 0.0, 1e-15);
}

TEST(BatchStats, LagPairsLaterWithEarlier) {
  // (x2 - m)(x1 - m) + (x3 - m)(x2 - m), divisor N, with a non-symmetric pair.
  const Mat w = (Mat(2, 3) << 1.0, 2.0, 4.0, 0.0, 1.0, -1.0).finished();
  const SampleStats s = batch_stats(w);
  const Vec m = w.rowwise().mean();
  Mat lag = Mat::Zero(2, 2);
  for (int k = 1; k < 3; ++k) lag += (w.col(k) - m) * (w.col(k - 1) - m).transpose();
  EXPECT_LE((s.lag - lag / 3.0).norm(), 1e-15);
}

TEST(BatchStats, ConstantWindowHasNoExcitation) {
  const SampleStats s = batch_stats(Mat::Constant(2, 50, 0.3));
  EXPECT_EQ(s.cov, Mat::Zero(2, 2));
  EXPECT_EQ(s.lag, Mat::Zero(2, 2));
  EXPECT_EQ(code_of([&] { covariance_inverse(s.cov); }), ErrorCode::InsufficientExcitation);
}

TEST(BatchStats, TooShortRejected) {
  EXPECT_THROW(batch_stats(Mat::Ones(2, 1)), Error);
}

TEST(EstimateA, EqualLagAndCovarianceGivesZero) {
  std::mt19937_64 rng(1);
  const Mat c = random_spd(4, rng);
  EXPECT_LE(estimate_A(c, c.inverse(), 0.02).norm(), 1e-10);
}

TEST(EstimateA, ForwardConstructionRoundTrip) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 4 + 2 * trial % 8;
    const Mat a0 = random_stable(n, rng);
    const Mat b = random_matrix(n, n, rng);
    const Mat c = solve_lyapunov(a0, b * b.transpose());
    const Mat g = (a0 * 0.02).exp() * c;
    const Mat a = estimate_A(g, c.inverse(), 0.02);
    EXPECT_LE((a - a0).norm() / a0.norm(), 1e-8) << trial;
  }
}

TEST(EstimateA, WsccBatchStructure) {
  auto ls = load_system("scenarios/wscc9_baseline.json");
  const Trajectory t = simulate(ls.system.params, ls.system.initial, ls.scenario.noise, {},
                                ls.scenario.simulation);
  const Mat x = t.select({1, 2}).slice_time(0.0, 200.0).samples;
  const SampleStats s = batch_stats(x);
  EXPECT_GT(s.cov(0, 0), 1e-7);
  EXPECT_LT(s.cov(0, 0), 1e-4);
  const Mat a = estimate_A(s.lag, covariance_inverse(s.cov), 0.02);
  EXPECT_LE(a.topLeftCorner(2, 2).cwiseAbs().maxCoeff(), 0.2);
  EXPECT_LE((a.topRightCorner(2, 2) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.2);
}

TEST(RecursiveUpdate, ShermanMorrisonMatchesDirectInverseScalar) {
  EstimatorState s;
  s.mean = Vec::Constant(1, 0.0);
  s.cov_inv = Mat::Constant(1, 1, 1.0 / 2.0);
  s.lag = Mat::Zero(1, 1);
  s.x_prev = Vec::Zero(1);
  double c = 2.0;
  double mean = 0.0;
  const double alpha = 0.5;
  for (double x : {1.0, -2.0, 0.5, 3.0, -1.0}) {
    const double z = x - mean;
    c = (1.0 - alpha) * (c + alpha * z * z);
    mean = (1.0 - alpha) * mean + alpha * x;
    s = recursive_update(s, Vec::Constant(1, x), alpha);
    EXPECT_NEAR(s.cov_inv(0, 0), 1.0 / c, 1e-12);
    EXPECT_NEAR(s.mean(0), mean, 1e-15);
  }
}

TEST(RecursiveUpdate, MatchesDirectExponentialWeighting) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ua(1e-4, 0.2);
  const Eigen::Index n = 4;
  const Mat window = random_matrix(n, 200, rng);
  EstimatorConfig cfg;
  cfg.window = 200;
  EstimatorState s = initialize_state(window, cfg);
  const SampleStats init = batch_stats(window);
  Mat c = init.cov;
  Vec mean = init.mean;
  Mat lag = init.lag;
  Vec prev = window.col(199);
  for (int j = 0; j < 2000; ++j) {
    const Vec x = random_matrix(n, 1, rng);
    const double alpha = ua(rng);
    const Vec z = x - mean;
    const Vec prev_centered = prev - mean;
    c = (1.0 - alpha) * (c + alpha * z * z.transpose());
    mean = (1.0 - alpha) * mean + alpha * x;
    lag = (1.0 - alpha) * (lag + alpha * (x - mean) * prev_centered.transpose());
    prev = x;
    recursive_update_in_place(s, x, alpha);
  }
  EXPECT_LE((s.cov_inv * c - Mat::Identity(n, n)).norm(), 1e-6);
  EXPECT_LE((s.mean - mean).norm(), 1e-10);
  EXPECT_LE((s.lag - lag).norm(), 1e-10);
  EXPECT_LE((s.cov_inv - s.cov_inv.transpose()).norm(), 0.0);
}

TEST(RecursiveUpdate, AlphaOneMeanIsCurrentSample) {
  const Vec mean = (Vec(2) << 1.0, 2.0).finished();
  const Vec x = (Vec(2) << -3.0, 4.0).finished();
  EXPECT_EQ(smooth_mean(mean, x, 1.0), x);
  EstimatorState s;
  s.mean = mean;
  s.cov_inv = Mat::Identity(2, 2);
  s.lag = Mat::Zero(2, 2);
  s.x_prev = mean;
  EXPECT_EQ(code_of([&] { recursive_update(s, x, 1.0); }), ErrorCode::UpdateSingular);
  EXPECT_EQ(code_of([&] { recursive_update(s, x, 0.0); }), ErrorCode::InvalidInput);
}

TEST(AdaptiveAlpha, SteadyIsOneOverN) {
  EstimatorConfig cfg;
  EstimatorState s;
  EXPECT_DOUBLE_EQ(adaptive_alpha(s, false, cfg), 1e-4);
  EXPECT_FALSE(s.flag);
}

TEST(AdaptiveAlpha, EventJustSeen) {
  EstimatorConfig cfg;
  EstimatorState s;
  s.j = 41;
  EXPECT_DOUBLE_EQ(adaptive_alpha(s, true, cfg), 0.005);
  EXPECT_TRUE(s.flag);
  EXPECT_EQ(s.j_c, 42u);
  s.j = 42;
  EXPECT_DOUBLE_EQ(adaptive_alpha(s, false, cfg), 1.0 / 202.0);
}

TEST(AdaptiveAlpha, ClampsAndClearsFlag) {
  EstimatorConfig cfg;
  EstimatorState s;
  s.flag = true;
  s.j_c = 1;
  s.j = 9900;  // next sample is j_c + 9900
  EXPECT_DOUBLE_EQ(adaptive_alpha(s, false, cfg), 1e-4);
  EXPECT_FALSE(s.flag);
}

TEST(Lyapunov, IdentityInertiaNoDamping) {
  std::mt19937_64 rng(6);
  const Mat c = random_spd(4, rng);
  const auto est = lyapunov_estimate(c, Vec::Ones(2), Vec::Zero(2));
  const Mat expected = c.bottomRightCorner(2, 2) * c.topLeftCorner(2, 2).inverse();
  EXPECT_LE((est.full - expected).norm(), 1e-12);
  EXPECT_LE((est.simplified - expected).norm(), 1e-12);
}

TEST(Lyapunov, ForwardConstructionRecoversSensitivity) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = 3 + trial;
    const Mat k = random_spd(n, rng);
    Vec m = Vec::Random(n).cwiseAbs() + Vec::Constant(n, 0.2);
    const Vec d = m.cwiseProduct(Vec::Random(n).cwiseAbs() + Vec::Constant(n, 0.5));
    const Mat a = swing_matrix(k, m, d);
    ASSERT_TRUE(is_hurwitz(a));
    Mat b = Mat::Zero(2 * n, n);
    b.bottomRows(n) = random_matrix(n, n, rng) * 0.01;
    const Mat c = solve_lyapunov(a, b * b.transpose());
    const auto est = lyapunov_estimate(c, m, d);
    EXPECT_LE((est.full - k).norm() / k.norm(), 1e-2) << trial;
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 1);
    const SystemMatrix rebuilt = assemble_state_matrix(est.full, m, d, StateLayout(ids));
    EXPECT_LE((rebuilt.a - a).norm() / a.norm(), 1e-2) << trial;
  }
}

TEST(Lyapunov, SingularAngleBlockRejected) {
  EXPECT_THROW(lyapunov_estimate(Mat::Zero(4, 4), Vec::Ones(2), Vec::Zero(2)), Error);
}

TEST(RecursiveEstimator, GapOnLogBranchViolation) {
  EstimatorConfig cfg;
  cfg.window = 50;
  RecursiveEstimator est(cfg, StateLayout({1}));
  std::mt19937_64 rng(3);
  // Alternating signs give a lag correlation near -C, so G C^-1 has a
  // negative eigenvalue.
  Mat w(2, 50);
  for (Eigen::Index k = 0; k < 50; ++k) {
    const double sgn = k % 2 ? -1.0 : 1.0;
    w(0, k) = sgn * (1.0 + 0.1 * random_matrix(1, 1, rng)(0, 0));
    w(1, k) = -sgn * (1.0 + 0.1 * random_matrix(1, 1, rng)(0, 0));
  }
  const Emission e0 = est.initialize(w, 1.0);
  EXPECT_FALSE(e0.a.has_value());
  const auto e1 = est.push(Vec::Constant(2, 0.1), 1.02, false);
  ASSERT_TRUE(e1.has_value());
  EXPECT_EQ(est.state().j, 1u);
}

TEST(RecursiveEstimator, EmissionCadence) {
  auto ls = load_system("scenarios/two_machine_toy.json");
  SimulationConfig sim = ls.scenario.simulation;
  sim.horizon = 30.0;
  const Trajectory t =
      simulate(ls.system.params, ls.system.initial, ls.scenario.noise, {}, sim).select({1});
  EstimatorConfig cfg;
  cfg.window = 1000;
  cfg.recompute_every = 25;
  const RecursiveRun run = run_recursive(t, cfg, {});
  // Step 1 emission plus one every 25 of the 501 remaining samples.
  EXPECT_EQ(run.emissions.size(), 1u + 501u / 25u);
  EXPECT_EQ(run.alpha.size(), 501u);
  EXPECT_DOUBLE_EQ(run.emissions.front().t, t.time(999));
  EXPECT_EQ(run.emissions[1].j, 25u);
}

TEST(RecursiveEstimator, SteadyStateTracksBatch) {
  auto ls = load_system("scenarios/two_machine_toy.json");
  const SystemModel& sys = ls.system;
  const Vec eq = equilibrium_solve(sys.params, sys.initial, sys.reference, sys.delta0).delta_tilde;
  const double scale = coi_jacobian(sys.params, sys.initial, eq, sys.reference).a.norm();
  EstimatorConfig cfg;
  cfg.window = 5000;
  cfg.recompute_every = 1000000;
  SimulationConfig sim = ls.scenario.simulation;
  sim.horizon = 400.0;
  std::vector<Mat> batches;
  std::vector<double> gaps;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    NoiseSpec noise = ls.scenario.noise;
    noise.seed = seed;
    const Trajectory t = simulate(sys.params, sys.initial, noise, {}, sim).select({1});
    RecursiveEstimator est(cfg, t.layout);
    est.initialize(t.samples.leftCols(5000), t.time(4999));
    for (std::size_t k = 5000; k < t.size(); ++k) {
      est.push(t.samples.col(static_cast<Eigen::Index>(k)), t.time(k), false);
    }
    const SampleStats s = batch_stats(t.samples.rightCols(5000));
    batches.push_back(estimate_A(s.lag, covariance_inverse(s.cov), t.dt));
    gaps.push_back((*est.current_A() - batches.back()).norm() / scale);
  }
  Mat mean = Mat::Zero(2, 2);
  for (const Mat& b : batches) mean += b / static_cast<double>(batches.size());
  double var = 0.0;
  for (const Mat& b : batches) var += (b - mean).squaredNorm();
  const double scatter = std::sqrt(var / static_cast<double>(batches.size() - 1)) / scale;
  EXPECT_LE(median(gaps), 2.0 * scatter);
}
