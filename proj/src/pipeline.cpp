#include "statemat/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "statemat/linalg.hpp"
#include "statemat/matrix_io.hpp"

namespace statemat {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(name, e);
  }
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Vec select_params(const GeneratorParams& p, const Vec& v,
                  const std::vector<int>& ids) {
  Vec out(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = v(static_cast<Eigen::Index>(p.index_of(ids[k])));
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json localization_json(const Localization& loc) {
  json scores = json::array();
  for (const auto& s : loc.scores) {
    scores.push_back({{"generator", s.generator}, {"score", s.score}});
  }
  return {{"implicated", loc.implicated}, {"scores", scores}, {"theta", loc.theta}};
}

json detection_json(const DiscrepancyReport& r) {
  json j;
  j["threshold"] = r.threshold;
  j["alarm_time"] = r.alarm_time ? json(*r.alarm_time) : json(nullptr);
  j["snapshot_time"] = r.snapshot_time ? json(*r.snapshot_time) : json(nullptr);
  j["localization"] = r.localization ? localization_json(*r.localization) : json(nullptr);
  j["emissions"] = r.times.size();
  return j;
}

}  // namespace

SystemModel build_system(const Scenario& s) {
  return stage("system", [&] {
    SystemModel sys;
    sys.params = s.generators;
    sys.reference = s.reference;
    if (s.network) {
      const auto rr = reduce_to_generators(s.network->network, s.network->operating_point);
      sys.initial = rr.reduced;
      sys.delta0 = rr.delta0;
      sys.params.pm = rr.pm;
      std::vector<TripEvent> trips = s.trips;
      std::stable_sort(trips.begin(), trips.end(),
                       [](const TripEvent& a, const TripEvent& b) { return a.time < b.time; });
      BusNetwork net = s.network->network;
      for (const auto& t : trips) {
        net = apply_branch_outage(net, t.branch);
        sys.switches.push_back({t.time, reduce_with_emf(net, rr.reduced.e)});
        if (t.mark_estimator) sys.markers.push_back(t.time);
      }
    } else {
      sys.initial = *s.reduced;
      sys.delta0 = s.reduced_delta0;
      sys.params.pm = electrical_power(s.reduced_delta0, *s.reduced);
    }
    sys.markers.insert(sys.markers.end(), s.markers.begin(), s.markers.end());
    std::sort(sys.markers.begin(), sys.markers.end());
    sys.params.validate(sys.initial.size());
    sys.retained = retained_layout(sys.params, sys.reference);
    sys.observed = s.observed.empty() ? sys.retained.generators() : s.observed;
    return sys;
  });
}

TruthTimeline::TruthTimeline(const SystemModel& sys) {
  stage("truth", [&] {
    Vec guess = sys.delta0;
    auto add = [&](double start, const ReducedNetwork& net) {
      const auto eq = equilibrium_solve(sys.params, net, sys.reference, guess);
      guess = eq.delta_tilde;
      SystemMatrix a = coi_jacobian(sys.params, net, eq.delta_tilde, sys.reference);
      if (!is_hurwitz(a.a)) {
        throw Error(ErrorCode::Unstable, "unstable matrix; regression theorem inapplicable");
      }
      starts_.push_back(start);
      matrices_.push_back(std::move(a));
    };
    add(-std::numeric_limits<double>::infinity(), sys.initial);
    for (const auto& sw : sys.switches) add(sw.time, sw.network);
    return 0;
  });
}

const SystemMatrix& TruthTimeline::at(double t) const {
  std::size_t k = 0;
  while (k + 1 < starts_.size() && starts_[k + 1] <= t) ++k;
  return matrices_[k];
}

Trajectory simulate_scenario(const Scenario& s, const SystemModel& sys) {
  return stage("simulate", [&] {
    SimulationConfig cfg = s.simulation;
    cfg.delta_init =
        equilibrium_solve(sys.params, sys.initial, sys.reference, sys.delta0).delta_tilde;
    Trajectory traj = simulate(sys.params, sys.initial, s.noise, sys.switches, cfg);
    if (s.noise.measurement_std > 0.0) {
      traj = add_measurement_noise(traj, s.noise.measurement_std, s.noise.seed);
    }
    return traj;
  });
}

RunReport analyze(const Scenario& s, const SystemModel& sys,
                  const Trajectory& measured, const RunOptions& opt) {
  const auto start = Clock::now();
  RunReport rep;
  rep.scenario = s.name;
  rep.seed = s.noise.seed;
  rep.out_dir = opt.out_dir ? *opt.out_dir : std::filesystem::path(s.output_dir);
  const bool write = opt.write_outputs;
  auto out = [&](const std::string& name) {
    rep.files.push_back(name);
    return (rep.out_dir / name).string();
  };
  if (write) {
    stage("output", [&] {
      std::error_code ec;
      std::filesystem::create_directories(rep.out_dir, ec);
      if (ec) throw Error(ErrorCode::Io, "cannot create " + rep.out_dir.string());
      return 0;
    });
  }

  const TruthTimeline truth(sys);
  const auto& k = sys.observed;
  const Trajectory obs = measured.select(k);
  const SystemMatrix model = submatrix_select(truth.model(), k);
  const Vec m_obs = select_params(sys.params, sys.params.m, k);
  const Vec d_obs = select_params(sys.params, sys.params.d, k);

  // Batch estimate.
  {
    const double a = s.batch_window ? s.batch_window->first : 0.0;
    const double b = s.batch_window ? s.batch_window->second : s.simulation.horizon;
    BatchResult br;
    br.start = a;
    br.end = b;
    const Trajectory win = obs.slice_time(a, b);
    const SampleStats st = stage("batch_stats", [&] {
      if (win.size() < 2) throw Error(ErrorCode::InvalidInput, "batch window holds < 2 samples");
      SampleStats x = batch_stats(win.samples);
      return x;
    });
    const Mat cov_inv = stage("batch_stats", [&] { return covariance_inverse(st.cov); });
    br.covariance = st.cov;
    br.estimate = stage("estimate_A", [&] {
      return estimate_A(st.lag, cov_inv, s.estimator.dt, obs.layout);
    });
    br.truth = submatrix_select(truth.at(br.end - 0.5 * measured.dt), k);
    br.model = model;
    stage("compare", [&] {
      br.error_vs_truth = normalized_frobenius(br.truth.a, br.estimate.a);
      br.error_vs_model = normalized_frobenius(br.model.a, br.estimate.a);
      br.model_vs_truth = normalized_frobenius(br.truth.a, br.model.a);
      return 0;
    });
    if (s.lyapunov) {
      stage("lyapunov", [&] {
        const auto ly = lyapunov_estimate(st.cov, m_obs, d_obs);
        br.lyapunov = assemble_state_matrix(ly.full, m_obs, d_obs, obs.layout);
        br.lyapunov_simplified = assemble_state_matrix(ly.simplified, m_obs, d_obs, obs.layout);
        br.lyapunov_error = normalized_frobenius(br.truth.a, br.lyapunov->a);
        br.lyapunov_simplified_error =
            normalized_frobenius(br.truth.a, br.lyapunov_simplified->a);
        return 0;
      });
    }
    rep.batch = std::move(br);
  }

  // Recursive trace and monitoring.
  if (s.recursive) {
    TraceSummary tr;
    Monitor monitor(s.monitor);
    std::ofstream trace;
    std::optional<MatrixPackWriter> pack;
    if (write) {
      trace.open(out("atrace.csv"));
      if (!trace) throw PipelineError("output", Error(ErrorCode::Io, "cannot write atrace.csv"));
      trace << "j,t,alpha,frob_error_vs_reference,matrix_file_ref\n";
      if (s.write_trace_matrices) {
        pack = stage("output", [&] {
          return std::optional<MatrixPackWriter>(std::in_place, out("atrace_matrices.csv"), obs.layout);
        });
      }
    }
    const auto run = stage("recursive", [&] {
      return run_recursive(obs, s.estimator, sys.markers, [&](const Emission& e) {
        const SystemMatrix ref = submatrix_select(truth.at(e.t), k);
        double err = nan();
        std::string file_ref = "gap";
        if (e.a) {
          err = normalized_frobenius(ref.a, *e.a);
          if (s.detection) monitor.push(e.t, {*e.a, obs.layout}, model);
          if (pack) file_ref = pack->append(*e.a);
        } else {
          ++tr.gaps;
        }
        ++tr.emissions;
        tr.times.push_back(e.t);
        tr.errors.push_back(err);
        if (write) {
          trace << e.j << ',' << format_double(e.t) << ',' << format_double(e.alpha) << ','
                << (std::isfinite(err) ? format_double(err) : std::string()) << ','
                << (e.a ? file_ref : std::string("gap")) << '\n';
        }
      });
    });
    tr.mean_update_seconds = run.mean_update_seconds;
    tr.mean_recompute_seconds = run.mean_recompute_seconds;
    if (!tr.times.empty()) {
      tr.final_time = tr.times.back();
      tr.final_error = tr.errors.back();
    }
    rep.recursive = std::move(tr);
    if (s.detection) rep.detection = stage("detection", [&] { return monitor.finish(); });
  }

  if (write) {
    stage("output", [&] {
      write_trajectory_csv(measured, out("trajectory.csv"));
      const auto& br = *rep.batch;
      auto put = [&](const SystemMatrix& a, const std::string& stem) {
        write_system_matrix(a, (rep.out_dir / stem).string());
        rep.files.push_back(stem + ".csv");
        rep.files.push_back(stem + ".json");
      };
      put(br.truth, "truth_A");
      put(br.model, "model_A");
      put(br.estimate, "batch_A");
      if (br.lyapunov) {
        put(*br.lyapunov, "lyapunov_A");
        put(*br.lyapunov_simplified, "lyapunov_simplified_A");
      }
      if (rep.detection) {
        const auto& d = *rep.detection;
        std::ofstream ds(out("distance.csv"));
        ds << "t,distance\n";
        for (std::size_t i = 0; i < d.times.size(); ++i) {
          ds << format_double(d.times[i]) << ',' << format_double(d.distance[i]) << '\n';
        }
        if (d.diff) put(*d.diff, "diff_matrix");
        write_json(detection_json(d), out("detection_report.json"));
      }
      return 0;
    });
  }
  rep.total_seconds = seconds_since(start);

  if (write) {
    stage("output", [&] {
      const auto& br = *rep.batch;
      json j;
      j["scenario"] = rep.scenario;
      j["seed"] = rep.seed;
      j["observed_generators"] = k;
      j["reference_generator"] = sys.reference;
      j["batch"] = {
          {"window", {br.start, br.end}},
          {"error_vs_truth", br.error_vs_truth},
          {"error_vs_model", br.error_vs_model},
          {"model_error_vs_truth", br.model_vs_truth},
          {"matrix", "batch_A.csv"},
          {"truth", "truth_A.csv"},
          {"model", "model_A.csv"},
      };
      if (br.lyapunov) {
        j["lyapunov"] = {{"error_vs_truth", br.lyapunov_error},
                         {"simplified_error_vs_truth", br.lyapunov_simplified_error},
                         {"matrix", "lyapunov_A.csv"},
                         {"simplified_matrix", "lyapunov_simplified_A.csv"}};
      }
      if (rep.recursive) {
        const auto& tr = *rep.recursive;
        j["recursive"] = {{"emissions", tr.emissions},
                          {"gaps", tr.gaps},
                          {"final_time", tr.final_time},
                          {"final_error_vs_truth", number_or_null(tr.final_error)},
                          {"trace", "atrace.csv"}};
        j["timing"]["mean_update_seconds"] = tr.mean_update_seconds;
        j["timing"]["mean_recompute_seconds"] = tr.mean_recompute_seconds;
      }
      if (rep.detection) {
        j["detection"] = detection_json(*rep.detection);
        j["detection"]["report"] = "detection_report.json";
      }
      j["timing"]["simulate_seconds"] = rep.simulate_seconds;
      j["timing"]["analysis_seconds"] = rep.total_seconds;
      j["files"] = rep.files;
      write_json(j, rep.out_dir / "summary.json");
      return 0;
    });
  }
  return rep;
}

RunReport run_scenario(const Scenario& s_in, const RunOptions& opt) {
  const auto start = Clock::now();
  Scenario s = s_in;
  if (opt.seed) s.noise.seed = *opt.seed;
  const SystemModel sys = build_system(s);
  const auto t_sim = Clock::now();
  const Trajectory traj = simulate_scenario(s, sys);
  const double sim_seconds = seconds_since(t_sim);
  RunOptions o = opt;
  if (!o.write_outputs) o.out_dir.reset();
  RunReport rep = analyze(s, sys, traj, o);
  rep.simulate_seconds = sim_seconds;
  rep.total_seconds = seconds_since(start);
  return rep;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "window_length") return SweepParam::WindowLength;
  if (name == "noise_std") return SweepParam::NoiseStd;
  if (name == "beta_w") return SweepParam::BetaW;
  throw ValidationError("--param", "expected window_length, noise_std or beta_w");
}

namespace {

double parse_value(const std::string& v, const std::string& what) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("--values", "bad " + what + " '" + v + "'");
  }
}

std::pair<double, double> parse_beta_w(const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) {
    throw ValidationError("--values", "beta_w values are written beta:w");
  }
  return {parse_value(v.substr(0, colon), "beta"), parse_value(v.substr(colon + 1), "w")};
}

}  // namespace

std::vector<SweepRow> sweep(const Scenario& base, SweepParam param,
                            const std::vector<std::string>& values,
                            const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw ValidationError("--values", "at least one value is required");
  if (seeds.empty()) throw ValidationError("--seeds", "at least one seed is required");

  // Parse and validate every value before any simulation runs.
  std::vector<Scenario> cells;
  Scenario sim_base = base;
  const double start = base.batch_window ? base.batch_window->first : 0.0;
  for (const auto& v : values) {
    Scenario c = base;
    switch (param) {
      case SweepParam::WindowLength: {
        const double len = parse_value(v, "window length");
        if (!(len > 0.0)) throw ValidationError("--values", "window length must be > 0");
        c.batch_window = std::make_pair(start, start + len);
        c.recursive = false;
        c.detection = false;
        sim_base.simulation.horizon = std::max(sim_base.simulation.horizon, start + len);
        break;
      }
      case SweepParam::NoiseStd: {
        c.noise.measurement_std = parse_value(v, "noise std");
        if (!(c.noise.measurement_std >= 0.0)) {
          throw ValidationError("--values", "noise std must be >= 0");
        }
        c.recursive = false;
        c.detection = false;
        break;
      }
      case SweepParam::BetaW: {
        const auto [beta, w] = parse_beta_w(v);
        c.estimator.beta = beta;
        c.estimator.w = w;
        c.recursive = true;
        c.detection = false;
        c.write_trace_matrices = false;
        break;
      }
    }
    cells.push_back(std::move(c));
  }
  for (auto& c : cells) {
    c.simulation.horizon = sim_base.simulation.horizon;
    validate_scenario(c);
  }
  sim_base.noise.measurement_std = 0.0;

  std::vector<SweepRow> rows(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) rows[i].value = values[i];
  const SystemModel sys = build_system(sim_base);
  for (auto seed : seeds) {
    sim_base.noise.seed = seed;
    std::optional<Trajectory> clean;
    std::string sim_failure;
    try {
      clean = simulate_scenario(sim_base, sys);
    } catch (const Error& e) {
      sim_failure = e.what();
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!clean) {
        rows[i].failures.push_back("seed " + std::to_string(seed) + ": " + sim_failure);
        continue;
      }
      Scenario c = cells[i];
      c.noise.seed = seed;
      try {
        const Trajectory traj =
            c.noise.measurement_std > 0.0
                ? add_measurement_noise(*clean, c.noise.measurement_std, seed)
                : *clean;
        RunOptions opt;
        opt.write_outputs = false;
        const RunReport r = analyze(c, sys, traj, opt);
        const double err = param == SweepParam::BetaW ? r.recursive->final_error
                                                      : r.batch->error_vs_truth;
        if (!std::isfinite(err)) throw Error(ErrorCode::LogBranch, "final emission is a gap");
        rows[i].errors.push_back(err);
      } catch (const Error& e) {
        rows[i].failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
    }
  }
  for (auto& r : rows) {
    if (!r.errors.empty()) r.median = median(r.errors);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, SweepParam param,
                     const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const char* name = param == SweepParam::WindowLength ? "window_length"
                     : param == SweepParam::NoiseStd   ? "noise_std"
                                                       : "beta_w";
  os << name << ",median_error,seeds_ok,seeds_failed\n";
  for (const auto& r : rows) {
    os << r.value << ',' << (r.median ? format_double(*r.median) : std::string()) << ','
       << r.errors.size() << ',' << r.failures.size() << '\n';
  }
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace statemat
