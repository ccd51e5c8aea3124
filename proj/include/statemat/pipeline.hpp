#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "statemat/detection.hpp"
#include "statemat/estimator.hpp"
#include "statemat/model_matrix.hpp"
#include "statemat/scenario.hpp"

namespace statemat {

// A failure inside run_scenario, tagged with the stage that raised it.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()),
        stage_(std::move(stage)),
        cause_(cause.code()) {}
  const std::string& stage() const { return stage_; }
  ErrorCode cause() const { return cause_; }

 private:
  std::string stage_;
  ErrorCode cause_;
};

// Reduced networks and parameters ready for simulation.
struct SystemModel {
  GeneratorParams params;  // pm filled in
  ReducedNetwork initial;
  Vec delta0;                  // operating angles of `initial`, any frame
  EventList switches;          // one per trip, in time order
  std::vector<double> markers;  // estimator event markers, s
  int reference = 0;
  StateLayout retained;
  std::vector<int> observed;
};

SystemModel build_system(const Scenario& s);

// True state matrix of the network active at time t, at that network's
// equilibrium, over the retained generators.
class TruthTimeline {
 public:
  explicit TruthTimeline(const SystemModel& sys);
  const SystemMatrix& at(double t) const;
  // The assumed (initial) network at its own equilibrium.
  const SystemMatrix& model() const { return matrices_.front(); }

 private:
  std::vector<double> starts_;
  std::vector<SystemMatrix> matrices_;
};

struct BatchResult {
  double start = 0.0;
  double end = 0.0;
  SystemMatrix estimate;
  SystemMatrix truth;
  SystemMatrix model;
  Mat covariance;
  double error_vs_truth = 0.0;
  double error_vs_model = 0.0;
  double model_vs_truth = 0.0;
  std::optional<SystemMatrix> lyapunov;             // full form
  std::optional<SystemMatrix> lyapunov_simplified;
  double lyapunov_error = 0.0;
  double lyapunov_simplified_error = 0.0;
};

struct TraceSummary {
  std::size_t emissions = 0;
  std::size_t gaps = 0;
  double final_time = 0.0;
  double final_error = 0.0;
  double mean_update_seconds = 0.0;
  double mean_recompute_seconds = 0.0;
  std::vector<double> times;
  std::vector<double> errors;  // vs truth; NaN at gaps
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  bool write_outputs = true;
};

struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::optional<BatchResult> batch;
  std::optional<TraceSummary> recursive;
  std::optional<DiscrepancyReport> detection;
  double simulate_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<std::string> files;
};

// Noisy COI trajectory of all generators, measurement noise included.
Trajectory simulate_scenario(const Scenario& s, const SystemModel& sys);

// Estimation and detection on an already simulated trajectory.
RunReport analyze(const Scenario& s, const SystemModel& sys,
                  const Trajectory& measured, const RunOptions& opt);

RunReport run_scenario(const Scenario& s, const RunOptions& opt = {});

enum class SweepParam { WindowLength, NoiseStd, BetaW };

SweepParam parse_sweep_param(const std::string& name);

struct SweepRow {
  std::string value;
  std::vector<double> errors;    // successful seeds
  std::vector<std::string> failures;
  std::optional<double> median;
};

// One cell per (value, seed). window_length and noise_std score the batch
// error against truth; beta_w scores the final recursive error. Cell
// failures are recorded, not thrown.
std::vector<SweepRow> sweep(const Scenario& s, SweepParam param,
                            const std::vector<std::string>& values,
                            const std::vector<std::uint64_t>& seeds);

void write_sweep_csv(const std::vector<SweepRow>& rows, SweepParam param,
                     const std::filesystem::path& path);

}  // namespace statemat
