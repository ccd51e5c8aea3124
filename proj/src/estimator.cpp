#include "statemat/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "statemat/linalg.hpp"

namespace statemat {

namespace {

constexpr double kMaxCovarianceCondition = 1e12;
constexpr double kMinUpdateDenominator = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void EstimatorConfig::validate(std::size_t state_dim) const {
  if (window < 2 || window < 2 * state_dim) {
    throw Error(ErrorCode::InvalidInput,
                "window N must be at least 2 x state dimension");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidInput, "dt must be positive");
  if (!(beta >= 1.0)) throw Error(ErrorCode::InvalidInput, "beta must be >= 1");
  if (!(w >= 0.0)) throw Error(ErrorCode::InvalidInput, "w must be >= 0");
  if (policy == AlphaPolicy::Fixed && fixed_alpha != 0.0 &&
      !(fixed_alpha > 0.0 && fixed_alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "fixed alpha must be in (0, 1]");
  }
  if (recompute_every == 0) {
    throw Error(ErrorCode::InvalidInput, "recompute cadence must be >= 1");
  }
}

SampleStats batch_stats(const Mat& window) {
  const Eigen::Index n = window.cols();
  if (n < 2 || window.rows() == 0) {
    throw Error(ErrorCode::InvalidInput, "batch window needs >= 2 samples");
  }
  SampleStats s;
  s.mean = window.rowwise().mean();
  const Mat centered = window.colwise() - s.mean;
  const double inv_n = 1.0 / static_cast<double>(n);
  s.cov = symmetrized(centered * centered.transpose() * inv_n);
  s.lag = centered.rightCols(n - 1) * centered.leftCols(n - 1).transpose() * inv_n;
  return s;
}

Mat covariance_inverse(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > kMaxCovarianceCondition) {
    throw Error(ErrorCode::InsufficientExcitation, "insufficient excitation");
  }
  return symmetrized(cov.ldlt().solve(Mat::Identity(cov.rows(), cov.cols())));
}

Mat estimate_A(const Mat& lag, const Mat& cov_inv, double dt) {
  if (lag.rows() != cov_inv.rows() || lag.cols() != cov_inv.cols() ||
      lag.rows() != lag.cols()) {
    throw Error(ErrorCode::InvalidInput, "G and C^-1 dimensions differ");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidInput, "dt must be positive");
  return real_matrix_log(lag * cov_inv) / dt;
}

SystemMatrix estimate_A(const Mat& lag, const Mat& cov_inv, double dt,
                        const StateLayout& layout) {
  if (layout.dim() != static_cast<std::size_t>(lag.rows())) {
    throw Error(ErrorCode::LabelMismatch, "layout does not match matrix size");
  }
  return {estimate_A(lag, cov_inv, dt), layout};
}

EstimatorState initialize_state(const Mat& window, const EstimatorConfig& cfg) {
  cfg.validate(static_cast<std::size_t>(window.rows()));
  if (static_cast<std::size_t>(window.cols()) != cfg.window) {
    throw Error(ErrorCode::InvalidInput, "initial window must hold N samples");
  }
  const auto stats = batch_stats(window);
  EstimatorState s;
  s.mean = stats.mean;
  s.lag = stats.lag;
  s.cov_inv = covariance_inverse(stats.cov);
  s.x_prev = window.col(window.cols() - 1);
  s.alpha = cfg.policy == AlphaPolicy::Fixed && cfg.fixed_alpha > 0.0
                ? cfg.fixed_alpha
                : cfg.steady_alpha();
  return s;
}

Vec smooth_mean(const Vec& mean, const Vec& x, double alpha) {
  return (1.0 - alpha) * mean + alpha * x;
}

void recursive_update_in_place(EstimatorState& s, const Vec& x, double alpha) {
  if (x.size() != s.mean.size()) {
    throw Error(ErrorCode::InvalidInput, "sample dimension mismatch");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "alpha must be in (0, 1]");
  }
  const double keep = 1.0 - alpha;
  const Vec z = x - s.mean;
  const Vec u = s.cov_inv * z;
  const double denom = 1.0 + alpha * z.dot(u);
  if (keep <= kMinUpdateDenominator || std::abs(denom) <= kMinUpdateDenominator) {
    throw Error(ErrorCode::UpdateSingular, "update singular");
  }

  const Vec prev_centered = s.x_prev - s.mean;
  s.mean = smooth_mean(s.mean, x, alpha);
  s.lag = keep * (s.lag + alpha * (x - s.mean) * prev_centered.transpose());
  s.cov_inv = (s.cov_inv - (alpha / denom) * u * u.transpose()) / keep;
  s.cov_inv = symmetrized(s.cov_inv);
  s.x_prev = x;
  s.alpha = alpha;
  ++s.j;
}

EstimatorState recursive_update(const EstimatorState& state, const Vec& x,
                                double alpha) {
  EstimatorState next = state;
  recursive_update_in_place(next, x, alpha);
  return next;
}

double adaptive_alpha(EstimatorState& state, bool event_seen,
                      const EstimatorConfig& cfg) {
  if (cfg.policy == AlphaPolicy::Fixed) {
    return cfg.fixed_alpha > 0.0 ? cfg.fixed_alpha : cfg.steady_alpha();
  }
  const std::size_t j = state.j + 1;
  if (event_seen) {
    state.j_c = j;
    state.flag = true;
  }
  const double floor = cfg.steady_alpha();
  if (!state.flag) return floor;
  const double transient =
      1.0 / (cfg.beta + static_cast<double>(j - state.j_c) * cfg.w);
  if (transient <= floor) {
    state.flag = false;
    return floor;
  }
  return transient;
}

LyapunovEstimate lyapunov_estimate(const Mat& cov, const Vec& m, const Vec& d) {
  const Eigen::Index k = m.size();
  if (cov.rows() != 2 * k || cov.cols() != 2 * k || d.size() != k) {
    throw Error(ErrorCode::InvalidInput, "covariance must be 2m x 2m");
  }
  const Mat c_dd = cov.topLeftCorner(k, k);
  const Mat c_dw = cov.topRightCorner(k, k);
  const Mat c_ww = cov.bottomRightCorner(k, k);
  Eigen::LDLT<Mat> ldlt(c_dd);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-300) {
    throw Error(ErrorCode::InsufficientExcitation,
                "singular angle covariance block");
  }
  // X C_dd^-1 = (C_dd^-1 X^T)^T since C_dd is symmetric.
  auto right_solve = [&](const Mat& x) -> Mat {
    return ldlt.solve(x.transpose()).transpose();
  };
  LyapunovEstimate out;
  out.simplified = m.asDiagonal() * right_solve(c_ww);
  out.full = out.simplified + d.asDiagonal() * right_solve(c_dw);
  return out;
}

SystemMatrix assemble_state_matrix(const Mat& k, const Vec& m, const Vec& d,
                                   const StateLayout& layout) {
  const Eigen::Index n = m.size();
  if (k.rows() != n || k.cols() != n || d.size() != n ||
      layout.generator_count() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::InvalidInput, "state matrix blocks mismatch");
  }
  SystemMatrix out;
  out.layout = layout;
  out.a = Mat::Zero(2 * n, 2 * n);
  out.a.topRightCorner(n, n).setIdentity();
  out.a.bottomLeftCorner(n, n) = -(m.cwiseInverse().asDiagonal() * k);
  out.a.bottomRightCorner(n, n) = (-d.cwiseQuotient(m)).asDiagonal();
  return out;
}

RecursiveEstimator::RecursiveEstimator(EstimatorConfig cfg, StateLayout layout)
    : cfg_(cfg), layout_(std::move(layout)) {
  cfg_.validate(layout_.dim());
}

std::optional<Mat> RecursiveEstimator::current_A() const {
  try {
    return estimate_A(state_.lag, state_.cov_inv, cfg_.dt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LogBranch) throw;
    return std::nullopt;
  }
}

Emission RecursiveEstimator::initialize(const Mat& window, double t) {
  if (static_cast<std::size_t>(window.rows()) != layout_.dim()) {
    throw Error(ErrorCode::LabelMismatch, "window rows do not match layout");
  }
  state_ = initialize_state(window, cfg_);
  initialized_ = true;
  Emission e;
  e.j = 0;
  e.t = t;
  e.alpha = state_.alpha;
  e.a = current_A();
  return e;
}

std::optional<Emission> RecursiveEstimator::push(const Vec& x, double t,
                                                  bool event_seen) {
  if (!initialized_) {
    throw Error(ErrorCode::InvalidInput, "estimator not initialized");
  }
  const auto start = Clock::now();
  const double alpha = adaptive_alpha(state_, event_seen, cfg_);
  recursive_update_in_place(state_, x, alpha);
  update_seconds_ += seconds_since(start);

  if (state_.j % cfg_.recompute_every != 0) return std::nullopt;
  const auto start_a = Clock::now();
  Emission e;
  e.j = state_.j;
  e.t = t;
  e.alpha = alpha;
  e.a = current_A();
  recompute_seconds_ += seconds_since(start_a);
  ++recompute_count_;
  return e;
}

RecursiveRun run_recursive(const Trajectory& traj, const EstimatorConfig& cfg,
                           const std::vector<double>& event_times) {
  std::vector<Emission> emissions;
  auto run = run_recursive(traj, cfg, event_times,
                           [&](const Emission& e) { emissions.push_back(e); });
  run.emissions = std::move(emissions);
  return run;
}

RecursiveRun run_recursive(const Trajectory& traj, const EstimatorConfig& cfg,
                           const std::vector<double>& event_times,
                           const std::function<void(const Emission&)>& sink) {
  if (traj.size() <= cfg.window) {
    throw Error(ErrorCode::InvalidInput,
                "trajectory must be longer than the initial window");
  }
  RecursiveEstimator est(cfg, traj.layout);
  RecursiveRun run;
  const auto n0 = static_cast<Eigen::Index>(cfg.window);
  sink(est.initialize(traj.samples.leftCols(n0), traj.time(cfg.window - 1)));

  std::vector<double> events = event_times;
  std::sort(events.begin(), events.end());
  std::size_t next_event = 0;
  const double eps = 1e-9 * traj.dt;
  // Events before the end of the initial window are absorbed by Step 1.
  while (next_event < events.size() &&
         events[next_event] <= traj.time(cfg.window - 1) + eps) {
    ++next_event;
  }

  run.alpha.reserve(traj.size() - cfg.window);
  for (std::size_t k = cfg.window; k < traj.size(); ++k) {
    const double t = traj.time(k);
    bool event_seen = false;
    while (next_event < events.size() && events[next_event] <= t + eps) {
      event_seen = true;
      ++next_event;
    }
    auto e = est.push(traj.samples.col(static_cast<Eigen::Index>(k)), t,
                      event_seen);
    run.alpha.push_back(est.state().alpha);
    if (e) sink(*e);
  }
  const auto pushes = static_cast<double>(traj.size() - cfg.window);
  run.mean_update_seconds = est.update_seconds() / pushes;
  run.mean_recompute_seconds =
      est.recompute_count()
          ? est.recompute_seconds() / static_cast<double>(est.recompute_count())
          : 0.0;
  return run;
}

}  // namespace statemat
