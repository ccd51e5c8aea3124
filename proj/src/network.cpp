#include "statemat/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

namespace statemat {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::SingularBranch: return "singular_branch";
    case ErrorCode::Islanded: return "islanded";
    case ErrorCode::UnknownBranch: return "unknown_branch";
    case ErrorCode::BranchOutOfService: return "branch_out_of_service";
    case ErrorCode::Diverged: return "diverged";
    case ErrorCode::EquilibriumNotFound: return "equilibrium_not_found";
    case ErrorCode::SingularJacobian: return "singular_jacobian";
    case ErrorCode::Unstable: return "unstable";
    case ErrorCode::InsufficientExcitation: return "insufficient_excitation";
    case ErrorCode::LogBranch: return "log_branch";
    case ErrorCode::UpdateSingular: return "update_singular";
    case ErrorCode::LabelMismatch: return "label_mismatch";
    case ErrorCode::ZeroNorm: return "zero_norm";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

std::size_t BusNetwork::bus_index(int id) const {
  for (std::size_t k = 0; k < buses.size(); ++k) {
    if (buses[k].id == id) return k;
  }
  throw Error(ErrorCode::InvalidInput,
              "unknown bus id " + std::to_string(id));
}

const Branch* BusNetwork::find_branch(const std::string& id) const {
  for (const auto& br : branches) {
    if (br.id == id) return &br;
  }
  return nullptr;
}

void BusNetwork::validate() const {
  std::set<int> ids;
  for (const auto& bus : buses) {
    if (!ids.insert(bus.id).second) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate bus id " + std::to_string(bus.id));
    }
  }
  auto require_bus = [&](int id, const std::string& where) {
    if (!ids.count(id)) {
      throw Error(ErrorCode::InvalidInput,
                  where + " references unknown bus " + std::to_string(id));
    }
  };
  for (const auto& br : branches) {
    require_bus(br.from, "branch " + br.id);
    require_bus(br.to, "branch " + br.id);
    if (br.r * br.r + br.x * br.x <= 0.0) {
      throw Error(ErrorCode::SingularBranch, "singular branch " + br.id);
    }
  }
  for (const auto& ld : loads) {
    require_bus(ld.bus, "load");
    if (!(ld.v_nom > 0.0)) {
      throw Error(ErrorCode::InvalidInput,
                  "load at bus " + std::to_string(ld.bus) +
                      " has non-positive nominal voltage");
    }
  }
  std::set<int> gen_ids;
  for (const auto& gen : generators) {
    require_bus(gen.bus, "generator " + std::to_string(gen.id));
    if (!gen_ids.insert(gen.id).second) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate generator id " + std::to_string(gen.id));
    }
  }
}

CMat build_admittance(const BusNetwork& net) {
  net.validate();
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  std::unordered_map<int, Eigen::Index> index;
  for (Eigen::Index k = 0; k < n; ++k) index[net.buses[k].id] = k;

  CMat y = CMat::Zero(n, n);
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b_shunt / 2.0);
    const double t = (br.tap == 0.0) ? 1.0 : br.tap;
    const auto f = index.at(br.from);
    const auto k = index.at(br.to);
    y(f, f) += (ys + ysh) / (t * t);
    y(k, k) += ys + ysh;
    y(f, k) -= ys / t;
    y(k, f) -= ys / t;
  }
  for (const auto& ld : net.loads) {
    const auto k = index.at(ld.bus);
    y(k, k) += Complex(ld.p, -ld.q) / (ld.v_nom * ld.v_nom);
  }
  return y;
}

ReducedNetwork kron_reduce(const CMat& y_full,
                           const std::vector<std::size_t>& internal_nodes,
                           const Vec& e) {
  const auto n_full = static_cast<std::size_t>(y_full.rows());
  if (y_full.cols() != y_full.rows()) {
    throw Error(ErrorCode::InvalidInput, "admittance matrix must be square");
  }
  std::vector<bool> kept(n_full, false);
  for (auto k : internal_nodes) {
    if (k >= n_full || kept[k]) {
      throw Error(ErrorCode::InvalidInput, "bad internal node index set");
    }
    kept[k] = true;
  }
  std::vector<Eigen::Index> keep(internal_nodes.begin(), internal_nodes.end());
  std::vector<Eigen::Index> elim;
  for (std::size_t k = 0; k < n_full; ++k) {
    if (!kept[k]) elim.push_back(static_cast<Eigen::Index>(k));
  }

  const auto ng = static_cast<Eigen::Index>(keep.size());
  const auto nl = static_cast<Eigen::Index>(elim.size());
  CMat y_red = y_full(keep, keep);
  if (nl > 0) {
    const CMat y_ll = y_full(elim, elim);
    const CMat y_lg = y_full(elim, keep);
    const CMat y_gl = y_full(keep, elim);
    Eigen::FullPivLU<CMat> lu(y_ll);
    // Relative pivot threshold: an islanded load bus leaves Y_LL with an
    // exactly zero row (up to rounding).
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::Islanded, "islanded or degenerate network");
    }
    y_red -= y_gl * lu.solve(y_lg);
  }

  ReducedNetwork out;
  out.g = y_red.real();
  out.b = y_red.imag();
  // Symmetric up to rounding; snap exactly.
  out.g = 0.5 * (out.g + out.g.transpose()).eval();
  out.b = 0.5 * (out.b + out.b.transpose()).eval();
  out.e = (e.size() == ng) ? e : Vec::Zero(ng);
  out.phi.resize(ng);
  for (Eigen::Index i = 0; i < ng; ++i) {
    out.phi(i) = std::atan2(out.b(i, i), out.g(i, i));
  }
  return out;
}

BusNetwork apply_branch_outage(const BusNetwork& net,
                               const std::string& branch_id) {
  // Entries sharing an id are parallel circuits of one branch; trip them all.
  BusNetwork out = net;
  bool found = false;
  bool tripped = false;
  for (auto& br : out.branches) {
    if (br.id != branch_id) continue;
    found = true;
    tripped = tripped || br.in_service;
    br.in_service = false;
  }
  if (!found) {
    throw Error(ErrorCode::UnknownBranch, "unknown branch id " + branch_id);
  }
  if (!tripped) {
    throw Error(ErrorCode::BranchOutOfService,
                "branch " + branch_id + " already out of service");
  }
  return out;
}

InternalEmf compute_internal_emf(Complex terminal_voltage, double p, double q,
                                 double xd_prime) {
  if (!(std::abs(terminal_voltage) > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "terminal voltage must be nonzero");
  }
  const Complex current = std::conj(Complex(p, q) / terminal_voltage);
  const Complex emf = terminal_voltage + Complex(0.0, xd_prime) * current;
  return {std::abs(emf), std::arg(emf)};
}

namespace {

// Appends one internal bus per generator, tied to its terminal through
// j*x'_d. Returns the augmented network and the internal bus positions.
std::pair<BusNetwork, std::vector<std::size_t>> augment(const BusNetwork& net) {
  BusNetwork aug = net;
  int next_id = 0;
  for (const auto& bus : net.buses) next_id = std::max(next_id, bus.id);
  std::vector<std::size_t> internal;
  for (const auto& gen : net.generators) {
    if (!(gen.xd_prime > 0.0)) {
      throw Error(ErrorCode::InvalidInput,
                  "generator " + std::to_string(gen.id) +
                      " needs a positive transient reactance");
    }
    ++next_id;
    internal.push_back(aug.buses.size());
    aug.buses.push_back({next_id, BusKind::GeneratorInternal});
    Branch br;
    br.id = "xd'" + std::to_string(gen.id);
    br.from = next_id;
    br.to = gen.bus;
    br.x = gen.xd_prime;
    aug.branches.push_back(br);
  }
  return {std::move(aug), std::move(internal)};
}

// A load bus cut off from every generator still gives a nonsingular Y_LL
// through its own shunt, so islands are found on the graph.
void require_connected(const BusNetwork& net) {
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::set<int> seen;
  std::vector<int> stack;
  for (const auto& gen : net.generators) {
    if (seen.insert(gen.bus).second) stack.push_back(gen.bus);
  }
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    for (int nb : adj[b]) {
      if (seen.insert(nb).second) stack.push_back(nb);
    }
  }
  for (const auto& bus : net.buses) {
    if (!seen.count(bus.id)) {
      throw Error(ErrorCode::Islanded, "islanded or degenerate network (bus " +
                                           std::to_string(bus.id) +
                                           " has no path to a generator)");
    }
  }
}

}  // namespace

ReducedNetwork reduce_with_emf(const BusNetwork& net, const Vec& e) {
  if (static_cast<std::size_t>(e.size()) != net.generators.size()) {
    throw Error(ErrorCode::InvalidInput, "EMF vector length mismatch");
  }
  net.validate();
  require_connected(net);
  auto [aug, internal] = augment(net);
  return kron_reduce(build_admittance(aug), internal, e);
}

ReductionResult reduce_to_generators(
    const BusNetwork& net, const std::vector<GeneratorOperatingPoint>& op) {
  const std::size_t n = net.generators.size();
  if (op.size() != n) {
    throw Error(ErrorCode::InvalidInput,
                "operating point must list every generator");
  }
  ReductionResult out;
  Vec e(n);
  out.delta0.resize(n);
  out.pm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto emf = compute_internal_emf(op[i].terminal_voltage, op[i].p,
                                          op[i].q, net.generators[i].xd_prime);
    e(i) = emf.magnitude;
    out.delta0(i) = emf.angle;
    out.pm(i) = op[i].p;
  }
  out.reduced = reduce_with_emf(net, e);
  return out;
}

}  // namespace statemat
