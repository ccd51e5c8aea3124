#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "statemat/detection.hpp"
#include "statemat/estimator.hpp"
#include "statemat/network.hpp"
#include "statemat/simulator.hpp"

namespace statemat {

// Scenario problem tied to a JSON field, e.g. "estimator.window".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(ErrorCode::Validation, field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Bus-level network with the power-flow operating point it was taken at.
struct NetworkCase {
  std::string name;
  BusNetwork network;
  std::vector<GeneratorOperatingPoint> operating_point;  // per generator
  std::vector<double> inertia_h;                          // s, may be empty
  double frequency_hz = 60.0;
};

NetworkCase load_network_case(const std::filesystem::path& path);

struct TripEvent {
  double time = 0.0;
  std::string branch;
  bool mark_estimator = true;
};

struct Scenario {
  std::string name;

  // Exactly one of `network` / `reduced` is set.
  std::optional<NetworkCase> network;
  std::optional<ReducedNetwork> reduced;
  Vec reduced_delta0;  // inline systems: operating angles, rad

  GeneratorParams generators;  // m, d, ids; pm filled by the pipeline
  int reference = 0;

  NoiseSpec noise;
  SimulationConfig simulation;

  EstimatorConfig estimator;
  std::optional<std::pair<double, double>> batch_window;  // s
  bool lyapunov = true;
  bool recursive = false;
  bool write_trace_matrices = true;

  std::vector<TripEvent> trips;
  std::vector<double> markers;  // extra estimator event markers, s

  std::vector<int> observed;  // empty: every retained generator
  MonitorConfig monitor;
  bool detection = false;

  std::string output_dir;
};

// Parses and validates. Relative data paths resolve against the scenario
// file's directory. Throws ValidationError naming the offending field.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text,
                        const std::filesystem::path& base_dir);

// Cross-field checks; load_scenario already calls this.
void validate_scenario(const Scenario& s);

}  // namespace statemat
