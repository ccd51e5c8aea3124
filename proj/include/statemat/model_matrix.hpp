#pragma once

#include <optional>
#include <string>

#include "statemat/layout.hpp"
#include "statemat/simulator.hpp"

namespace statemat {

// Input matrix of the linearized SDE, 2m x n (one column per load noise
// channel). Rows follow `layout`; the angle rows are zero.
struct NoiseInputMatrix {
  Mat b;
  StateLayout layout;
};

struct EquilibriumResult {
  Vec delta_tilde;  // all n generators, COI frame
  int iterations = 0;
  double residual = 0.0;  // infinity norm of the retained mismatch
};

// Generators kept in the state vector: every id except `reference`, in
// parameter order. With no reference, all generators.
StateLayout retained_layout(const GeneratorParams& params,
                            std::optional<int> reference);

// Expands angles of the retained generators to all n, placing the
// reference where sum_i M_i delta_i = 0.
Vec complete_coi_angles(const GeneratorParams& params, int reference,
                        const Vec& retained);

// Newton iteration on P_mi - P_ei - (M_i/M_T) P_coi = 0 over the retained
// generators. `initial_guess` holds n angles in any common frame.
EquilibriumResult equilibrium_solve(const GeneratorParams& params,
                                    const ReducedNetwork& net, int reference,
                                    const Vec& initial_guess);

// (dP_e/d delta_tilde)_coi over all n generators at the given angles:
// dP_e/d delta plus (M_i/M_T) dP_coi/d delta_j.
Mat coi_power_sensitivity(const GeneratorParams& params,
                          const ReducedNetwork& net, const Vec& delta_tilde);

// [0 I; -M^-1 K -M^-1 D] over the retained generators. With a reference,
// K has the reference angle eliminated through the COI constraint, which
// makes it the exact linearization of the retained dynamics.
SystemMatrix coi_jacobian(const GeneratorParams& params,
                          const ReducedNetwork& net, const Vec& delta_tilde,
                          std::optional<int> reference);

NoiseInputMatrix noise_input_matrix(const GeneratorParams& params,
                                    const ReducedNetwork& net,
                                    const Vec& sigma,
                                    std::optional<int> reference);

// Solves A C + C A^T = -B B^T.
Mat stationary_covariance(const SystemMatrix& a, const NoiseInputMatrix& b);

}  // namespace statemat
