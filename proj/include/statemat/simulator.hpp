#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "statemat/layout.hpp"
#include "statemat/network.hpp"

namespace statemat {

struct GeneratorParams {
  Vec m;   // inertia, p.u. power * s^2 / rad
  Vec d;   // damping, p.u.
  Vec pm;  // mechanical power, p.u.
  std::vector<int> ids;  // external generator ids; empty means 1..n

  std::size_t size() const { return static_cast<std::size_t>(m.size()); }
  int id(std::size_t i) const;
  std::size_t index_of(int generator) const;
  std::vector<int> all_ids() const;
  void validate(std::size_t n) const;
};

struct NoiseSpec {
  Vec sigma;  // per-load relative std of the diagonal admittance
  std::uint64_t seed = 1;
  double measurement_std = 0.0;
};

// Uniformly sampled states. Column k of `samples` is the state at
// t0 + k * dt, ordered by `layout`.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.02;
  Mat samples;
  StateLayout layout;

  std::size_t size() const { return static_cast<std::size_t>(samples.cols()); }
  double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  // Samples with t in [begin, end).
  Trajectory slice_time(double begin, double end) const;
  // Rows for the given generators (angle and speed of each).
  Trajectory select(const std::vector<int>& generators) const;
};

struct NetworkSwitch {
  double time = 0.0;
  ReducedNetwork network;
};
using EventList = std::vector<NetworkSwitch>;

struct SimulationConfig {
  double horizon = 200.0;
  double dt_int = 1e-3;
  double sample_rate = 50.0;
  // Full-length (n) initial deviations; empty means the deterministic
  // equilibrium of the starting network.
  Vec delta_init;
  Vec omega_init;
};

struct CoiState {
  Vec delta_tilde;
  Vec omega_tilde;
  double delta0 = 0.0;
  double omega0 = 0.0;
};

CoiState coi_transform(const Vec& delta, const Vec& omega, const Vec& m);

// P_ei = sum_j E_i E_j [G_ij cos(d_i - d_j) + B_ij sin(d_i - d_j)]
Vec electrical_power(const Vec& delta, const ReducedNetwork& net);

// P_coi = sum_i (P_mi - P_ei)
double coi_power(const Vec& pm, const Vec& pe);

// Deterministic part of d(omega_tilde)/dt in the COI frame, one entry per
// generator.
Vec swing_drift(const GeneratorParams& params, const ReducedNetwork& net,
                const Vec& delta_tilde, const Vec& omega_tilde);

Trajectory simulate(const GeneratorParams& params, const ReducedNetwork& net,
                    const NoiseSpec& noise, const EventList& events,
                    const SimulationConfig& config);

// Adds i.i.d. N(0, std^2) to every sample. The stream is seeded from
// `seed` but kept apart from the process-noise stream.
Trajectory add_measurement_noise(const Trajectory& traj, double std,
                                 std::uint64_t seed);

// Header: t, delta_<id>..., omega_<id>...
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace statemat
