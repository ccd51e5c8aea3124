#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace statemat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class ErrorCode {
  InvalidInput,
  SingularBranch,
  Islanded,
  UnknownBranch,
  BranchOutOfService,
  Diverged,
  EquilibriumNotFound,
  SingularJacobian,
  Unstable,
  InsufficientExcitation,
  LogBranch,
  UpdateSingular,
  LabelMismatch,
  ZeroNorm,
  Validation,
  Io,
};

const char* to_string(ErrorCode code);

// All library failures surface as this exception; the code lets callers
// branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace statemat
