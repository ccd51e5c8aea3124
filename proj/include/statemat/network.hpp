#pragma once

#include <optional>
#include <string>
#include <vector>

#include "statemat/types.hpp"

namespace statemat {

enum class BusKind { Other, GeneratorInternal };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Other;
};

// Standard pi-model branch. A nonzero `tap` is a fixed off-nominal ratio on
// the from side; 0 or 1 means a plain line.
struct Branch {
  std::string id;
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;
  double tap = 0.0;
  bool in_service = true;
};

// Constant-impedance load: Y = (P - jQ) / |V_nom|^2.
struct Load {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;
  double v_nom = 1.0;
};

struct Generator {
  int id = 0;
  int bus = 0;
  double xd_prime = 0.0;
};

struct BusNetwork {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Load> loads;
  std::vector<Generator> generators;

  // Position of a bus id in `buses`; throws on unknown id.
  std::size_t bus_index(int id) const;
  const Branch* find_branch(const std::string& id) const;
  // Throws Error(InvalidInput) describing the first violated invariant.
  void validate() const;
};

// Terminal conditions of one generator at the operating point.
struct GeneratorOperatingPoint {
  Complex terminal_voltage;
  double p = 0.0;
  double q = 0.0;
};

// Network reduced to the internal generator nodes.
struct ReducedNetwork {
  Mat g;
  Mat b;
  Vec e;
  Vec phi;

  std::size_t size() const { return static_cast<std::size_t>(e.size()); }
};

struct InternalEmf {
  double magnitude = 0.0;
  double angle = 0.0;
};

CMat build_admittance(const BusNetwork& net);

// Schur complement of `y_full` onto `internal_nodes` (indices into y_full).
// `e` becomes the EMF vector of the result; pass an empty vector to leave it
// zero-filled.
ReducedNetwork kron_reduce(const CMat& y_full,
                           const std::vector<std::size_t>& internal_nodes,
                           const Vec& e = Vec());

BusNetwork apply_branch_outage(const BusNetwork& net,
                               const std::string& branch_id);

InternalEmf compute_internal_emf(Complex terminal_voltage, double p, double q,
                                 double xd_prime);

struct ReductionResult {
  ReducedNetwork reduced;
  Vec delta0;  // internal EMF angles at the operating point, rad
  Vec pm;      // electrical output at the operating point, p.u.
};

// Adds one internal node per generator behind x'_d, then Kron-reduces onto
// those nodes. `op` is indexed like `net.generators`.
ReductionResult reduce_to_generators(
    const BusNetwork& net, const std::vector<GeneratorOperatingPoint>& op);

// Same augmentation and reduction, with E taken from a previous reduction
// (used for post-switch networks, where the EMFs stay put).
ReducedNetwork reduce_with_emf(const BusNetwork& net, const Vec& e);

}  // namespace statemat
