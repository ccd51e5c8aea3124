#include "statemat/linalg.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace statemat {

namespace {

constexpr double kLogImagTolerance = 1e-8;
constexpr double kEigenbasisCondLimit = 1e8;

[[noreturn]] void log_branch_violation(const std::string& detail) {
  throw Error(ErrorCode::LogBranch,
              "log branch violation: window too short or dt too large (" +
                  detail + ")");
}

double cond1(const CMat& v, const CMat& v_inv) {
  auto norm1 = [](const CMat& m) {
    return m.cwiseAbs().colwise().sum().maxCoeff();
  };
  return norm1(v) * norm1(v_inv);
}

}  // namespace

Mat real_matrix_log(const Mat& p) {
  if (p.rows() != p.cols() || p.rows() == 0) {
    throw Error(ErrorCode::InvalidInput, "matrix log needs a square matrix");
  }
  if (!p.allFinite()) log_branch_violation("non-finite input");

  Eigen::EigenSolver<Mat> es(p, true);
  if (es.info() != Eigen::Success) log_branch_violation("eigensolver failed");
  const CVec lambda = es.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const Complex l = lambda(k);
    if (std::abs(l) <= 1e-14 * scale) log_branch_violation("singular matrix");
    if (l.real() <= 0.0 && std::abs(l.imag()) <= 1e-12 * std::abs(l)) {
      log_branch_violation("eigenvalue on the negative real axis");
    }
  }

  const CMat v = es.eigenvectors();
  Eigen::PartialPivLU<CMat> lu(v);
  const CMat v_inv = lu.inverse();
  if (!v_inv.allFinite() || cond1(v, v_inv) > kEigenbasisCondLimit) {
    // Defective or nearly so: Schur-Parlett handles Jordan blocks.
    Mat l = p.log();
    if (!l.allFinite()) log_branch_violation("Schur logarithm failed");
    return l;
  }

  CVec log_lambda(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    log_lambda(k) = std::log(lambda(k));
  }
  const CMat l = v * log_lambda.asDiagonal() * v_inv;
  const double re_norm = l.real().norm();
  const double im_norm = l.imag().norm();
  if (im_norm > kLogImagTolerance * std::max(re_norm, 1e-300)) {
    log_branch_violation("imaginary residual " + std::to_string(im_norm));
  }
  return l.real();
}

double spectral_abscissa(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Mat& a) {
  if (a.rows() == 0) return false;
  const double tol = 1e-10 * std::max(1.0, a.norm());
  return spectral_abscissa(a) < -tol;
}

Mat solve_lyapunov(const Mat& a, const Mat& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw Error(ErrorCode::InvalidInput, "Lyapunov operands must be n x n");
  }
  if (!is_hurwitz(a)) {
    throw Error(ErrorCode::Unstable,
                "unstable matrix; regression theorem inapplicable");
  }

  Eigen::ComplexSchur<CMat> schur(a.cast<Complex>());
  const CMat& t = schur.matrixT();
  const CMat& u = schur.matrixU();
  const CMat rhs = -(u.adjoint() * q.cast<Complex>() * u);

  // T Y + Y T^H = rhs, column by column from the right: column j of
  // Y T^H only involves columns k >= j of Y.
  CMat y = CMat::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    CVec col = rhs.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) {
      col -= std::conj(t(j, k)) * y.col(k);
    }
    const Complex shift = std::conj(t(j, j));
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      Complex acc = col(i);
      for (Eigen::Index k = i + 1; k < n; ++k) acc -= t(i, k) * y(k, j);
      y(i, j) = acc / (t(i, i) + shift);
    }
  }
  const Mat x = (u * y * u.adjoint()).real();
  return symmetrized(x);
}

}  // namespace statemat
