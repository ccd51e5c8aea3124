#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "statemat/layout.hpp"
#include "statemat/simulator.hpp"

namespace statemat {

enum class AlphaPolicy { Fixed, Adaptive };

struct EstimatorConfig {
  std::size_t window = 10000;  // N, samples in the initial batch
  double dt = 0.02;            // lag = sample interval, s
  double beta = 200.0;
  double w = 2.0;              // per-sample growth of 1/alpha after an event
  AlphaPolicy policy = AlphaPolicy::Adaptive;
  double fixed_alpha = 0.0;    // Fixed policy only; 0 means 1/N
  std::size_t recompute_every = 1;

  void validate(std::size_t state_dim) const;
  double steady_alpha() const { return 1.0 / static_cast<double>(window); }
};

// Sample mean, covariance and one-lag correlation of a window, all with
// divisor N.
struct SampleStats {
  Vec mean;
  Mat cov;
  Mat lag;
};

// `window` is dim x N, one sample per column.
SampleStats batch_stats(const Mat& window);

// Inverse of a sample covariance; Error(InsufficientExcitation) when it is
// singular or its condition number exceeds 1e12.
Mat covariance_inverse(const Mat& cov);

// A = log(G C^-1) / dt
Mat estimate_A(const Mat& lag, const Mat& cov_inv, double dt);
SystemMatrix estimate_A(const Mat& lag, const Mat& cov_inv, double dt,
                        const StateLayout& layout);

struct EstimatorState {
  Vec mean;
  Mat cov_inv;
  Mat lag;
  Vec x_prev;
  std::size_t j = 0;    // samples consumed since initialization
  std::size_t j_c = 0;  // index of the last event
  bool flag = false;    // transient mode
  double alpha = 0.0;
};

// Step 1: batch statistics of the first N samples.
EstimatorState initialize_state(const Mat& window, const EstimatorConfig& cfg);

// (1 - alpha) * mean + alpha * x
Vec smooth_mean(const Vec& mean, const Vec& x, double alpha);

// One exponentially weighted step. The inverse covariance follows the
// rank-one update of C_j = (1 - alpha) [C_{j-1} + alpha z z^T] with
// z = x - mean_{j-1}. Throws Error(UpdateSingular) when that update is
// singular (alpha = 1 or a vanishing denominator).
EstimatorState recursive_update(const EstimatorState& state, const Vec& x,
                                double alpha);
void recursive_update_in_place(EstimatorState& state, const Vec& x,
                               double alpha);

// Smoothing factor for the sample about to be consumed (index state.j + 1).
// Records the event and the transient flag in `state`.
double adaptive_alpha(EstimatorState& state, bool event_seen,
                      const EstimatorConfig& cfg);

// dP_e/d delta from the covariance blocks given inertia and damping:
// full = M C_ww C_dd^-1 + D C_dw C_dd^-1, simplified drops the C_dw term.
struct LyapunovEstimate {
  Mat full;
  Mat simplified;
};
LyapunovEstimate lyapunov_estimate(const Mat& cov, const Vec& m, const Vec& d);

// [0 I; -M^-1 K -M^-1 D]
SystemMatrix assemble_state_matrix(const Mat& k, const Vec& m, const Vec& d,
                                   const StateLayout& layout);

struct Emission {
  std::size_t j = 0;
  double t = 0.0;
  double alpha = 0.0;
  std::optional<Mat> a;  // empty: log-branch gap at this emission
};

class RecursiveEstimator {
 public:
  RecursiveEstimator(EstimatorConfig cfg, StateLayout layout);

  // Step 1 on a dim x N window ending at time `t`; returns A_0.
  Emission initialize(const Mat& window, double t);
  // Step 2 for one sample. Returns an emission on the recompute cadence.
  std::optional<Emission> push(const Vec& x, double t, bool event_seen);

  const EstimatorState& state() const { return state_; }
  const EstimatorConfig& config() const { return cfg_; }
  const StateLayout& layout() const { return layout_; }
  // A from the current statistics; empty on a log-branch violation.
  std::optional<Mat> current_A() const;

  // Wall-clock seconds spent in the statistics update and in A
  // recomputation, summed over all pushes.
  double update_seconds() const { return update_seconds_; }
  double recompute_seconds() const { return recompute_seconds_; }
  std::size_t recompute_count() const { return recompute_count_; }

 private:
  EstimatorConfig cfg_;
  StateLayout layout_;
  EstimatorState state_;
  bool initialized_ = false;
  double update_seconds_ = 0.0;
  double recompute_seconds_ = 0.0;
  std::size_t recompute_count_ = 0;
};

struct RecursiveRun {
  std::vector<Emission> emissions;
  std::vector<double> alpha;  // per consumed sample after initialization
  double mean_update_seconds = 0.0;
  double mean_recompute_seconds = 0.0;
};

// Step 1 on the first N samples of `traj`, then Step 2 over the rest.
// `event_times` mark sudden changes for the adaptive smoothing.
RecursiveRun run_recursive(const Trajectory& traj, const EstimatorConfig& cfg,
                           const std::vector<double>& event_times);
// Streams each emission to `sink` instead of storing it.
RecursiveRun run_recursive(const Trajectory& traj, const EstimatorConfig& cfg,
                           const std::vector<double>& event_times,
                           const std::function<void(const Emission&)>& sink);

}  // namespace statemat
