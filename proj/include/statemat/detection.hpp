#pragma once

#include <optional>
#include <vector>

#include "statemat/layout.hpp"

namespace statemat {

// Generators with PMUs. The reference generator is never part of the state.
struct ObservedSet {
  std::vector<int> generators;  // sorted
  int reference = 0;

  // Throws Error(InvalidInput) if empty, unsorted, containing the reference
  // or a generator outside `retained`.
  void validate(const StateLayout& retained) const;
};

// ||A - A_ref||_F / ||A_ref||_F with the first argument as reference.
double normalized_frobenius(const Mat& reference, const Mat& other);

// |a_ij - b_ij| with the shared labels; Error(LabelMismatch) otherwise.
SystemMatrix element_diff(const SystemMatrix& a, const SystemMatrix& b);

struct GeneratorScore {
  int generator = 0;
  double score = 0.0;
};

struct Localization {
  std::vector<GeneratorScore> scores;  // descending
  std::vector<int> implicated;         // sorted ids
  double theta = 0.5;
};

// Scores each generator by the largest entry in its row or column of the
// lower-left (speed-by-angle) block of `diff`; implicated generators score
// at least theta times the largest score.
Localization localize(const SystemMatrix& diff, double theta = 0.5);

// Rows and columns of both states of each generator in `generators`.
SystemMatrix submatrix_select(const SystemMatrix& a,
                              const std::vector<int>& generators);

struct MonitorConfig {
  double threshold = 0.10;
  double dwell = 10.0;           // s above threshold before alarming
  double theta = 0.5;
  double settle_slope = 1e-3;    // per emission
  double settle_duration = 30.0; // s
};

struct DiscrepancyReport {
  std::vector<double> times;
  std::vector<double> distance;
  double threshold = 0.10;
  std::optional<double> alarm_time;
  std::optional<double> snapshot_time;
  std::optional<SystemMatrix> diff;
  std::optional<Localization> localization;
};

// Tracks the distance between measured and model matrices over time,
// raises an alarm after a dwell above threshold, and localizes at the first
// settled emission after the alarm.
class Monitor {
 public:
  explicit Monitor(MonitorConfig cfg = {});

  void push(double t, const SystemMatrix& measured, const SystemMatrix& model);
  // Closes the stream. An alarm without a settled snapshot is localized at
  // the last emission.
  DiscrepancyReport finish();

  const DiscrepancyReport& report() const { return report_; }

 private:
  void take_snapshot(double t, const SystemMatrix& measured,
                     const SystemMatrix& model);

  MonitorConfig cfg_;
  DiscrepancyReport report_;
  std::optional<double> above_since_;
  std::optional<double> settled_since_;
  std::optional<SystemMatrix> last_measured_;
  std::optional<SystemMatrix> last_model_;
  double last_t_ = 0.0;
};

}  // namespace statemat
