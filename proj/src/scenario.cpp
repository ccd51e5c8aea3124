#include "statemat/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace statemat {

namespace {

using nlohmann::json;

// Typed access to one JSON object, reporting errors by dotted field path and
// rejecting keys nobody asked about.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_or_root(), "expected an object");
  }

  ~Fields() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& raw(const std::string& key) {
    if (!has(key)) throw ValidationError(at(key), "required field missing");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ValidationError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(at(key), "must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  long long integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ValidationError(at(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long fallback) {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ValidationError(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ValidationError(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ValidationError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw ValidationError(at(key) + "[" + std::to_string(i) + "]",
                              "expected a number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ValidationError(at(key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        throw ValidationError(at(key) + "[" + std::to_string(i) + "]",
                              "expected an integer");
      }
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  Mat matrix(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array() || v.empty() || !v[0].is_array()) {
      throw ValidationError(at(key), "expected an array of rows");
    }
    Mat out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_array() || v[i].size() != v[0].size()) {
        throw ValidationError(at(key) + "[" + std::to_string(i) + "]", "ragged row");
      }
      for (std::size_t k = 0; k < v[i].size(); ++k) {
        if (!v[i][k].is_number()) {
          throw ValidationError(at(key), "expected numbers");
        }
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            v[i][k].get<double>();
      }
    }
    return out;
  }

  Fields object(const std::string& key) { return Fields(raw(key), at(key)); }

  // Throws on keys that were never looked up.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(at(key), "unknown field");
    }
  }

 private:
  std::string path_or_root() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what, std::string("malformed JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path, const std::string& field) {
  std::ifstream is(path);
  if (!is) throw ValidationError(field, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Scalar or per-generator array.
Vec per_generator(Fields& f, const std::string& key, std::size_t n) {
  const json& v = f.raw(key);
  if (v.is_number()) return Vec::Constant(static_cast<Eigen::Index>(n), v.get<double>());
  const auto xs = f.numbers(key);
  if (xs.size() != n) {
    throw ValidationError(f.at(key), "expected " + std::to_string(n) + " values");
  }
  return to_vec(xs);
}

void parse_system(Fields sys, Scenario& s, const std::filesystem::path& base_dir) {
  const bool has_net = sys.has("network");
  const bool has_red = sys.has("reduced");
  if (has_net == has_red) {
    throw ValidationError(sys.at("network"),
                          "exactly one of 'network' or 'reduced' is required");
  }
  if (has_net) {
    std::filesystem::path p = sys.string("network");
    if (p.is_relative()) p = base_dir / p;
    try {
      s.network = load_network_case(p);
    } catch (const ValidationError& e) {
      throw ValidationError(sys.at("network"), e.what());
    } catch (const Error& e) {
      throw ValidationError(sys.at("network"), e.what());
    }
  } else {
    Fields red = sys.object("reduced");
    ReducedNetwork r;
    r.g = red.matrix("g");
    r.b = red.matrix("b");
    r.e = to_vec(red.numbers("e"));
    const auto n = r.e.size();
    if (r.g.rows() != n || r.g.cols() != n || r.b.rows() != n || r.b.cols() != n) {
      throw ValidationError(red.at("g"), "G, B and e sizes differ");
    }
    if ((r.g - r.g.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
        (r.b - r.b.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
      throw ValidationError(red.at("g"), "reduced admittance must be symmetric");
    }
    r.phi = Vec(n);
    for (Eigen::Index i = 0; i < n; ++i) r.phi(i) = std::atan2(r.b(i, i), r.g(i, i));
    s.reduced = r;
    s.reduced_delta0 = to_vec(red.numbers("delta0"));
    if (s.reduced_delta0.size() != n) {
      throw ValidationError(red.at("delta0"), "length differs from e");
    }
    if (red.has("generator_ids")) s.generators.ids = red.integers("generator_ids");
    red.finish();
  }
  sys.finish();
}

std::size_t generator_count(const Scenario& s) {
  return s.network ? s.network->network.generators.size() : s.reduced->size();
}

void parse_generators(Fields g, Scenario& s) {
  const std::size_t n = generator_count(s);
  if (s.network) {
    s.generators.ids.clear();
    for (const auto& gen : s.network->network.generators) s.generators.ids.push_back(gen.id);
  }
  if (g.has("m")) {
    s.generators.m = per_generator(g, "m", n);
  } else if (g.boolean("m_from_h", false)) {
    if (!s.network || s.network->inertia_h.size() != n) {
      throw ValidationError(g.at("m_from_h"), "network file carries no inertia data");
    }
    const double ws = 2.0 * std::numbers::pi * s.network->frequency_hz;
    s.generators.m = 2.0 * to_vec(s.network->inertia_h) / ws;
  } else {
    throw ValidationError(g.at("m"), "required field missing");
  }
  if (g.has("d")) {
    s.generators.d = per_generator(g, "d", n);
  } else {
    s.generators.d = g.number("d_over_m") * s.generators.m;
  }
  g.finish();
  for (Eigen::Index i = 0; i < s.generators.m.size(); ++i) {
    if (!(s.generators.m(i) > 0.0)) throw ValidationError(g.at("m"), "inertia must be > 0");
    if (!(s.generators.d(i) >= 0.0)) throw ValidationError(g.at("d"), "damping must be >= 0");
  }
}

}  // namespace

NetworkCase load_network_case(const std::filesystem::path& path) {
  const json j = parse_json(read_file(path, path.string()), path.string());
  Fields f(j, "");
  NetworkCase c;
  c.name = f.string("name", path.stem().string());
  f.string("provenance", "");
  f.number("base_mva", 100.0);
  c.frequency_hz = f.number("frequency_hz", 60.0);

  std::vector<Complex> voltage;
  const json& buses = f.raw("buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    Fields b(buses[i], "buses[" + std::to_string(i) + "]");
    Bus bus;
    bus.id = static_cast<int>(b.integer("id"));
    const double vm = b.number("vm", 1.0);
    const double va = b.number("va_deg", 0.0) * std::numbers::pi / 180.0;
    b.finish();
    c.network.buses.push_back(bus);
    voltage.push_back(std::polar(vm, va));
  }
  auto bus_voltage = [&](int id, const std::string& field) {
    for (std::size_t k = 0; k < c.network.buses.size(); ++k) {
      if (c.network.buses[k].id == id) return voltage[k];
    }
    throw ValidationError(field, "unknown bus " + std::to_string(id));
  };

  const json& branches = f.raw("branches");
  for (std::size_t i = 0; i < branches.size(); ++i) {
    Fields b(branches[i], "branches[" + std::to_string(i) + "]");
    Branch br;
    br.from = static_cast<int>(b.integer("from"));
    br.to = static_cast<int>(b.integer("to"));
    br.id = b.string("id", std::to_string(br.from) + "-" + std::to_string(br.to));
    br.r = b.number("r", 0.0);
    br.x = b.number("x");
    br.b_shunt = b.number("b", 0.0);
    br.tap = b.number("tap", 0.0);
    br.in_service = b.boolean("in_service", true);
    b.finish();
    c.network.branches.push_back(br);
  }

  if (f.has("loads")) {
    const json& loads = f.raw("loads");
    for (std::size_t i = 0; i < loads.size(); ++i) {
      const std::string field = "loads[" + std::to_string(i) + "]";
      Fields l(loads[i], field);
      Load ld;
      ld.bus = static_cast<int>(l.integer("bus"));
      ld.p = l.number("p");
      ld.q = l.number("q", 0.0);
      ld.v_nom = l.has("v_nom") ? l.number("v_nom") : std::abs(bus_voltage(ld.bus, field));
      l.finish();
      c.network.loads.push_back(ld);
    }
  }

  const json& gens = f.raw("generators");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string field = "generators[" + std::to_string(i) + "]";
    Fields g(gens[i], field);
    Generator gen;
    gen.id = static_cast<int>(g.integer("id"));
    gen.bus = static_cast<int>(g.integer("bus"));
    gen.xd_prime = g.number("xd_prime");
    GeneratorOperatingPoint op;
    op.p = g.number("p");
    op.q = g.number("q", 0.0);
    op.terminal_voltage = bus_voltage(gen.bus, field);
    if (g.has("h")) c.inertia_h.push_back(g.number("h"));
    g.finish();
    c.network.generators.push_back(gen);
    c.operating_point.push_back(op);
  }
  f.finish();
  if (!c.inertia_h.empty() && c.inertia_h.size() != c.network.generators.size()) {
    throw ValidationError("generators", "h given for some generators only");
  }
  try {
    c.network.validate();
  } catch (const Error& e) {
    throw ValidationError(path.string(), e.what());
  }
  return c;
}

Scenario parse_scenario(const std::string& text,
                        const std::filesystem::path& base_dir) {
  const json j = parse_json(text, "<root>");
  Fields f(j, "");
  Scenario s;
  s.name = f.string("name", "scenario");
  f.string("description", "");
  parse_system(f.object("system"), s, base_dir);
  const std::size_t n = generator_count(s);
  parse_generators(f.object("generators"), s);
  if (s.generators.ids.empty()) s.generators.ids = s.generators.all_ids();
  s.reference = static_cast<int>(f.integer("reference_generator"));

  {
    Fields nz = f.object("noise");
    s.noise.sigma = per_generator(nz, "sigma", n);
    s.noise.measurement_std = nz.number("measurement_std", 0.0);
    const long long seed = nz.integer("seed", 1);
    if (seed < 0) throw ValidationError(nz.at("seed"), "must be >= 0");
    s.noise.seed = static_cast<std::uint64_t>(seed);
    nz.finish();
  }
  if (f.has("simulation")) {
    Fields sim = f.object("simulation");
    s.simulation.horizon = sim.number("horizon", s.simulation.horizon);
    s.simulation.dt_int = sim.number("dt_int", s.simulation.dt_int);
    s.simulation.sample_rate = sim.number("sample_rate", s.simulation.sample_rate);
    sim.finish();
  }
  s.estimator.dt = 1.0 / s.simulation.sample_rate;
  if (f.has("estimator")) {
    Fields e = f.object("estimator");
    const long long window = e.integer("window", 10000);
    if (window < 2) throw ValidationError(e.at("window"), "must be >= 2");
    s.estimator.window = static_cast<std::size_t>(window);
    s.estimator.beta = e.number("beta", s.estimator.beta);
    s.estimator.w = e.number("w", s.estimator.w);
    const std::string policy = e.string("policy", "adaptive");
    if (policy == "adaptive") {
      s.estimator.policy = AlphaPolicy::Adaptive;
    } else if (policy == "fixed") {
      s.estimator.policy = AlphaPolicy::Fixed;
    } else {
      throw ValidationError(e.at("policy"), "expected 'adaptive' or 'fixed'");
    }
    s.estimator.fixed_alpha = e.number("alpha", 0.0);
    const long long every = e.integer("recompute_every", 1);
    if (every < 1) throw ValidationError(e.at("recompute_every"), "must be >= 1");
    s.estimator.recompute_every = static_cast<std::size_t>(every);
    if (e.has("batch_window")) {
      const auto bw = e.numbers("batch_window");
      if (bw.size() != 2) throw ValidationError(e.at("batch_window"), "expected [start, end]");
      s.batch_window = std::make_pair(bw[0], bw[1]);
    }
    s.lyapunov = e.boolean("lyapunov", true);
    s.recursive = e.boolean("recursive", false);
    s.write_trace_matrices = e.boolean("write_trace_matrices", true);
    e.finish();
  }
  if (f.has("events")) {
    const json& ev = f.raw("events");
    if (!ev.is_array()) throw ValidationError("events", "expected an array");
    for (std::size_t i = 0; i < ev.size(); ++i) {
      Fields e(ev[i], "events[" + std::to_string(i) + "]");
      const std::string type = e.string("type");
      const double t = e.number("time");
      if (type == "trip") {
        s.trips.push_back({t, e.string("branch"), e.boolean("mark_estimator", true)});
      } else if (type == "marker") {
        s.markers.push_back(t);
      } else {
        throw ValidationError(e.at("type"), "expected 'trip' or 'marker'");
      }
      e.finish();
    }
  }
  if (f.has("observed_generators")) s.observed = f.integers("observed_generators");
  if (f.has("detection")) {
    Fields d = f.object("detection");
    s.detection = d.boolean("enabled", true);
    s.monitor.threshold = d.number("threshold", s.monitor.threshold);
    s.monitor.dwell = d.number("dwell", s.monitor.dwell);
    s.monitor.theta = d.number("theta", s.monitor.theta);
    s.monitor.settle_slope = d.number("settle_slope", s.monitor.settle_slope);
    s.monitor.settle_duration = d.number("settle_duration", s.monitor.settle_duration);
    d.finish();
  }
  s.output_dir = f.string("output_dir", "out/" + s.name);
  f.finish();
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path, "<file>"), path.parent_path());
}

void validate_scenario(const Scenario& s) {
  const std::size_t n = generator_count(s);
  if (n < 2) throw ValidationError("system", "at least two generators are required");
  try {
    GeneratorParams p = s.generators;
    p.pm = Vec::Zero(static_cast<Eigen::Index>(n));
    p.validate(n);
  } catch (const Error& e) {
    throw ValidationError("generators", e.what());
  }
  const auto& ids = s.generators.ids;
  if (std::find(ids.begin(), ids.end(), s.reference) == ids.end()) {
    throw ValidationError("reference_generator",
                          "unknown generator " + std::to_string(s.reference));
  }
  if ((s.noise.sigma.array() < 0.0).any()) {
    throw ValidationError("noise.sigma", "must be >= 0");
  }
  if (!(s.noise.measurement_std >= 0.0)) {
    throw ValidationError("noise.measurement_std", "must be >= 0");
  }
  const auto& sim = s.simulation;
  if (!(sim.horizon > 0.0)) throw ValidationError("simulation.horizon", "must be > 0");
  if (!(sim.dt_int > 0.0)) throw ValidationError("simulation.dt_int", "must be > 0");
  if (!(sim.sample_rate > 0.0)) throw ValidationError("simulation.sample_rate", "must be > 0");
  const double ratio = 1.0 / (sim.sample_rate * sim.dt_int);
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0) {
    throw ValidationError("simulation.dt_int",
                          "sample interval must be a multiple of dt_int");
  }

  std::vector<int> observed = s.observed;
  if (observed.empty()) {
    for (int id : ids) {
      if (id != s.reference) observed.push_back(id);
    }
  }
  {
    std::vector<int> retained;
    for (int id : ids) {
      if (id != s.reference) retained.push_back(id);
    }
    ObservedSet k{observed, s.reference};
    try {
      k.validate(StateLayout(retained));
    } catch (const Error& e) {
      throw ValidationError("observed_generators", e.what());
    }
  }
  const std::size_t dim = 2 * observed.size();
  try {
    s.estimator.validate(dim);
  } catch (const Error& e) {
    throw ValidationError("estimator", e.what());
  }
  if (s.recursive && !(sim.horizon > static_cast<double>(s.estimator.window) / sim.sample_rate)) {
    throw ValidationError("simulation.horizon",
                          "must exceed the initial window N / sample_rate");
  }
  if (s.batch_window) {
    const auto [a, b] = *s.batch_window;
    if (!(a >= 0.0 && b > a && b <= sim.horizon + 1e-9)) {
      throw ValidationError("estimator.batch_window", "must satisfy 0 <= start < end <= horizon");
    }
    if ((b - a) * sim.sample_rate < static_cast<double>(2 * dim)) {
      throw ValidationError("estimator.batch_window", "too short for the state dimension");
    }
  }
  for (std::size_t i = 0; i < s.trips.size(); ++i) {
    const auto& t = s.trips[i];
    const std::string field = "events[" + std::to_string(i) + "]";
    if (!(t.time > 0.0 && t.time < sim.horizon)) {
      throw ValidationError(field + ".time", "must lie inside the horizon");
    }
    if (!s.network) {
      throw ValidationError(field, "branch trips need a bus-level network");
    }
    const Branch* br = s.network->network.find_branch(t.branch);
    if (!br) throw ValidationError(field + ".branch", "unknown branch '" + t.branch + "'");
  }
  for (double t : s.markers) {
    if (!(t > 0.0 && t < sim.horizon)) {
      throw ValidationError("events", "marker time must lie inside the horizon");
    }
  }
  if (s.detection && !s.recursive) {
    throw ValidationError("detection", "detection needs the recursive estimator");
  }
}

}  // namespace statemat
