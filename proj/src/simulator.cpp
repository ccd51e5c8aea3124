#include "statemat/simulator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "statemat/model_matrix.hpp"

namespace statemat {

int GeneratorParams::id(std::size_t i) const {
  return ids.empty() ? static_cast<int>(i) + 1 : ids.at(i);
}

std::size_t GeneratorParams::index_of(int generator) const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (id(i) == generator) return i;
  }
  throw Error(ErrorCode::InvalidInput,
              "unknown generator id " + std::to_string(generator));
}

std::vector<int> GeneratorParams::all_ids() const {
  std::vector<int> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = id(i);
  return out;
}

void GeneratorParams::validate(std::size_t n) const {
  if (size() != n || static_cast<std::size_t>(d.size()) != n ||
      static_cast<std::size_t>(pm.size()) != n) {
    throw Error(ErrorCode::InvalidInput,
                "generator parameter lengths must equal " + std::to_string(n));
  }
  if (!ids.empty() && ids.size() != n) {
    throw Error(ErrorCode::InvalidInput, "generator id list length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(m(i) > 0.0)) {
      throw Error(ErrorCode::InvalidInput, "inertia must be positive");
    }
    if (!(d(i) >= 0.0)) {
      throw Error(ErrorCode::InvalidInput, "damping must be non-negative");
    }
  }
}

Trajectory Trajectory::slice_time(double begin, double end) const {
  const double eps = 1e-9 * dt;
  std::size_t first = size();
  std::size_t last = 0;
  for (std::size_t k = 0; k < size(); ++k) {
    const double t = time(k);
    if (t + eps >= begin && t + eps < end) {
      first = std::min(first, k);
      last = k + 1;
    }
  }
  Trajectory out;
  out.dt = dt;
  out.layout = layout;
  if (first >= last) {
    out.t0 = begin;
    out.samples.resize(samples.rows(), 0);
    return out;
  }
  out.t0 = time(first);
  out.samples = samples.middleCols(static_cast<Eigen::Index>(first),
                                   static_cast<Eigen::Index>(last - first));
  return out;
}

Trajectory Trajectory::select(const std::vector<int>& generators) const {
  StateLayout sub(generators);
  std::vector<Eigen::Index> rows(sub.dim());
  for (std::size_t k = 0; k < generators.size(); ++k) {
    rows[k] = static_cast<Eigen::Index>(layout.angle_index(generators[k]));
    rows[k + generators.size()] =
        static_cast<Eigen::Index>(layout.speed_index(generators[k]));
  }
  Trajectory out;
  out.t0 = t0;
  out.dt = dt;
  out.layout = std::move(sub);
  out.samples = samples(rows, Eigen::all);
  return out;
}

CoiState coi_transform(const Vec& delta, const Vec& omega, const Vec& m) {
  if (delta.size() != m.size() || omega.size() != m.size()) {
    throw Error(ErrorCode::InvalidInput, "COI transform length mismatch");
  }
  const double mt = m.sum();
  if (!(mt > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "total inertia must be positive");
  }
  CoiState out;
  out.delta0 = m.dot(delta) / mt;
  out.omega0 = m.dot(omega) / mt;
  out.delta_tilde = delta.array() - out.delta0;
  out.omega_tilde = omega.array() - out.omega0;
  return out;
}

namespace {

// Pe = c .* (K c - L s) + s .* (K s + L c) with K = E E^T .* G,
// L = E E^T .* B; avoids n^2 trig calls per evaluation.
struct PowerKernel {
  Mat k;
  Mat l;
  Vec g_noise;  // E_i^2 G_ii, the per-load diffusion gain before sigma

  explicit PowerKernel(const ReducedNetwork& net) {
    const Mat ee = net.e * net.e.transpose();
    k = ee.cwiseProduct(net.g);
    l = ee.cwiseProduct(net.b);
    g_noise = net.e.array().square() * net.g.diagonal().array();
  }

  Vec power(const Vec& delta) const {
    const Vec c = delta.array().cos();
    const Vec s = delta.array().sin();
    return c.cwiseProduct(k * c - l * s) + s.cwiseProduct(k * s + l * c);
  }
};

void check_sizes(const GeneratorParams& params, const ReducedNetwork& net) {
  const auto n = net.size();
  if (static_cast<std::size_t>(net.g.rows()) != n ||
      static_cast<std::size_t>(net.b.rows()) != n) {
    throw Error(ErrorCode::InvalidInput, "reduced network dimension mismatch");
  }
  params.validate(n);
}

}  // namespace

Vec electrical_power(const Vec& delta, const ReducedNetwork& net) {
  if (static_cast<std::size_t>(delta.size()) != net.size()) {
    throw Error(ErrorCode::InvalidInput, "angle vector length mismatch");
  }
  return PowerKernel(net).power(delta);
}

double coi_power(const Vec& pm, const Vec& pe) { return (pm - pe).sum(); }

Vec swing_drift(const GeneratorParams& params, const ReducedNetwork& net,
                const Vec& delta_tilde, const Vec& omega_tilde) {
  check_sizes(params, net);
  const Vec pe = electrical_power(delta_tilde, net);
  const double share = coi_power(params.pm, pe) / params.m.sum();
  return (params.pm - pe - share * params.m -
          params.d.cwiseProduct(omega_tilde))
      .cwiseQuotient(params.m);
}

Trajectory simulate(const GeneratorParams& params, const ReducedNetwork& net,
                    const NoiseSpec& noise, const EventList& events,
                    const SimulationConfig& config) {
  check_sizes(params, net);
  const std::size_t n = net.size();
  if (static_cast<std::size_t>(noise.sigma.size()) != n ||
      (noise.sigma.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput,
                "sigma must have one non-negative entry per generator");
  }
  if (!(config.dt_int > 0.0) || !(config.sample_rate > 0.0) ||
      !(config.horizon >= 0.0)) {
    throw Error(ErrorCode::InvalidInput, "bad simulation timing");
  }
  const double dt_sample = 1.0 / config.sample_rate;
  const double ratio = dt_sample / config.dt_int;
  const auto steps_per_sample = static_cast<long>(std::llround(ratio));
  if (steps_per_sample < 1 || std::abs(ratio - steps_per_sample) > 1e-9 * ratio) {
    throw Error(ErrorCode::InvalidInput,
                "sample interval must be an integer multiple of dt_int");
  }
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (events[k].network.size() != n) {
      throw Error(ErrorCode::InvalidInput, "switch network size mismatch");
    }
    if (events[k].time < 0.0 || events[k].time > config.horizon ||
        (k > 0 && !(events[k].time > events[k - 1].time))) {
      throw Error(ErrorCode::InvalidInput,
                  "switch times must increase within the horizon");
    }
  }

  const Vec& m = params.m;
  const double mt = m.sum();
  Vec delta;
  Vec omega;
  if (config.delta_init.size() == 0) {
    const int ref = params.id(n - 1);
    delta = equilibrium_solve(params, net, ref, Vec::Zero(n)).delta_tilde;
  } else {
    delta = config.delta_init;
  }
  omega = config.omega_init.size() == 0 ? Vec::Zero(n) : config.omega_init;
  if (static_cast<std::size_t>(delta.size()) != n ||
      static_cast<std::size_t>(omega.size()) != n || !delta.allFinite() ||
      !omega.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "initial state must be finite, length n");
  }
  auto project = [&](Vec& v) { v.array() -= m.dot(v) / mt; };
  project(delta);
  project(omega);

  const auto n_samples =
      static_cast<std::size_t>(std::floor(config.horizon * config.sample_rate + 1e-9)) + 1;
  Trajectory traj;
  traj.t0 = 0.0;
  traj.dt = dt_sample;
  traj.layout = StateLayout(params.all_ids());
  traj.samples.resize(static_cast<Eigen::Index>(2 * n),
                      static_cast<Eigen::Index>(n_samples));

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool noisy = (noise.sigma.array() > 0.0).any();

  PowerKernel kernel(net);
  Vec gain = kernel.g_noise.cwiseProduct(noise.sigma);
  std::size_t next_event = 0;
  const double sqrt_dt = std::sqrt(config.dt_int);
  const Vec inv_m = m.cwiseInverse();
  Vec eta(n);
  long step = 0;

  for (std::size_t sample = 0; sample < n_samples; ++sample) {
    const auto col = static_cast<Eigen::Index>(sample);
    traj.samples.col(col).head(n) = delta;
    traj.samples.col(col).tail(n) = omega;
    if (!delta.allFinite() || !omega.allFinite()) {
      std::ostringstream msg;
      msg << "simulation diverged at t=" << traj.time(sample);
      throw Error(ErrorCode::Diverged, msg.str());
    }
    if (sample + 1 == n_samples) break;

    for (long s = 0; s < steps_per_sample; ++s, ++step) {
      const double t = static_cast<double>(step) * config.dt_int;
      while (next_event < events.size() &&
             t + 1e-12 >= events[next_event].time) {
        kernel = PowerKernel(events[next_event].network);
        gain = kernel.g_noise.cwiseProduct(noise.sigma);
        ++next_event;
      }
      const Vec pe = kernel.power(delta);
      const double share = (params.pm - pe).sum() / mt;
      Vec accel = (params.pm - pe - share * m - params.d.cwiseProduct(omega))
                      .cwiseProduct(inv_m);
      delta += omega * config.dt_int;
      omega += accel * config.dt_int;
      if (noisy) {
        for (std::size_t i = 0; i < n; ++i) eta(static_cast<Eigen::Index>(i)) = normal(rng);
        const Vec kick = gain.cwiseProduct(eta);
        omega += (kick.sum() / mt - kick.cwiseProduct(inv_m).array()).matrix() * sqrt_dt;
      }
      project(delta);
      project(omega);
    }
  }
  return traj;
}

Trajectory add_measurement_noise(const Trajectory& traj, double std,
                                 std::uint64_t seed) {
  if (!(std >= 0.0)) {
    throw Error(ErrorCode::InvalidInput, "measurement noise std must be >= 0");
  }
  Trajectory out = traj;
  if (std == 0.0) return out;
  // Distinct seed sequence from the process-noise engine.
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x6d656173u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, std);
  for (Eigen::Index c = 0; c < out.samples.cols(); ++c) {
    for (Eigen::Index r = 0; r < out.samples.rows(); ++r) {
      out.samples(r, c) += normal(rng);
    }
  }
  return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
  os << "t";
  for (std::size_t r = 0; r < traj.layout.dim(); ++r) {
    os << ',' << traj.layout.name(r);
  }
  os << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << traj.time(k);
    for (Eigen::Index r = 0; r < traj.samples.rows(); ++r) {
      os << ',' << traj.samples(r, static_cast<Eigen::Index>(k));
    }
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
}

}  // namespace statemat
