#pragma once

#include "statemat/types.hpp"

namespace statemat {

// Principal logarithm of a real matrix with no eigenvalue on the closed
// negative real axis. Diagonalizable inputs go through a complex
// eigendecomposition; ill-conditioned eigenbases fall back to a
// Schur-Parlett logarithm. Throws Error(LogBranch) when the principal
// branch is not real.
Mat real_matrix_log(const Mat& p);

// Largest real part over the spectrum.
double spectral_abscissa(const Mat& a);

bool is_hurwitz(const Mat& a);

// Solves A X + X A^T = -Q for X by complex Schur (Bartels-Stewart)
// back-substitution. Requires A Hurwitz; Q symmetric.
Mat solve_lyapunov(const Mat& a, const Mat& q);

// Symmetric part (M + M^T) / 2.
inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace statemat
