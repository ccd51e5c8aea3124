#include "statemat/model_matrix.hpp"

#include <cmath>

#include "statemat/linalg.hpp"

namespace statemat {

namespace {

constexpr int kMaxNewtonIterations = 50;
constexpr double kMismatchTolerance = 1e-10;

std::vector<std::size_t> retained_indices(const GeneratorParams& params,
                                          std::optional<int> reference) {
  std::vector<std::size_t> out;
  const std::size_t ref =
      reference ? params.index_of(*reference) : params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i != ref) out.push_back(i);
  }
  return out;
}

// COI-frame mismatch P_m - P_e - (M/M_T) P_coi for all n generators.
Vec mismatch(const GeneratorParams& params, const ReducedNetwork& net,
             const Vec& delta) {
  const Vec pe = electrical_power(delta, net);
  const double share = coi_power(params.pm, pe) / params.m.sum();
  return params.pm - pe - share * params.m;
}

// Sensitivity with the reference angle eliminated: column j picks up
// -H(:, ref) * M_j / M_ref.
Mat eliminate_reference(const GeneratorParams& params, const Mat& h,
                        const std::vector<std::size_t>& keep,
                        std::optional<int> reference) {
  const auto m = static_cast<Eigen::Index>(keep.size());
  Mat k(m, m);
  const bool has_ref = reference.has_value();
  const std::size_t r = has_ref ? params.index_of(*reference) : 0;
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = static_cast<Eigen::Index>(keep[a]);
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto j = static_cast<Eigen::Index>(keep[b]);
      k(a, b) = h(i, j);
      if (has_ref) {
        const auto ri = static_cast<Eigen::Index>(r);
        k(a, b) -= h(i, ri) * params.m(j) / params.m(ri);
      }
    }
  }
  return k;
}

}  // namespace

StateLayout retained_layout(const GeneratorParams& params,
                            std::optional<int> reference) {
  std::vector<int> ids;
  for (auto i : retained_indices(params, reference)) ids.push_back(params.id(i));
  return StateLayout(std::move(ids));
}

Vec complete_coi_angles(const GeneratorParams& params, int reference,
                        const Vec& retained) {
  const auto keep = retained_indices(params, reference);
  if (static_cast<std::size_t>(retained.size()) != keep.size()) {
    throw Error(ErrorCode::InvalidInput, "retained angle count mismatch");
  }
  const auto r = static_cast<Eigen::Index>(params.index_of(reference));
  Vec full = Vec::Zero(static_cast<Eigen::Index>(params.size()));
  double weighted = 0.0;
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const auto i = static_cast<Eigen::Index>(keep[a]);
    full(i) = retained(static_cast<Eigen::Index>(a));
    weighted += params.m(i) * full(i);
  }
  full(r) = -weighted / params.m(r);
  return full;
}

Mat coi_power_sensitivity(const GeneratorParams& params,
                          const ReducedNetwork& net, const Vec& delta_tilde) {
  const auto n = static_cast<Eigen::Index>(net.size());
  params.validate(net.size());
  if (delta_tilde.size() != n) {
    throw Error(ErrorCode::InvalidInput, "angle vector length mismatch");
  }
  Mat j = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (i == k) continue;
      const double dd = delta_tilde(i) - delta_tilde(k);
      const double ee = net.e(i) * net.e(k);
      j(i, k) = ee * (net.g(i, k) * std::sin(dd) - net.b(i, k) * std::cos(dd));
    }
    j(i, i) = -j.row(i).sum();
  }
  // dP_coi/d delta_j = -sum_k dP_ek/d delta_j
  const Vec dpcoi = -j.colwise().sum().transpose();
  const Vec share = params.m / params.m.sum();
  return j + share * dpcoi.transpose();
}

EquilibriumResult equilibrium_solve(const GeneratorParams& params,
                                    const ReducedNetwork& net, int reference,
                                    const Vec& initial_guess) {
  params.validate(net.size());
  const auto keep = retained_indices(params, reference);
  if (static_cast<std::size_t>(initial_guess.size()) != net.size()) {
    throw Error(ErrorCode::InvalidInput, "initial guess length mismatch");
  }
  const double mt = params.m.sum();
  Vec x(static_cast<Eigen::Index>(keep.size()));
  const double shift = params.m.dot(initial_guess) / mt;
  for (std::size_t a = 0; a < keep.size(); ++a) {
    x(static_cast<Eigen::Index>(a)) =
        initial_guess(static_cast<Eigen::Index>(keep[a])) - shift;
  }

  auto retained_mismatch = [&](const Vec& full) {
    const Vec f = mismatch(params, net, full);
    Vec out(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t a = 0; a < keep.size(); ++a) {
      out(static_cast<Eigen::Index>(a)) = f(static_cast<Eigen::Index>(keep[a]));
    }
    return out;
  };

  EquilibriumResult result;
  for (int iter = 0; iter <= kMaxNewtonIterations; ++iter) {
    const Vec full = complete_coi_angles(params, reference, x);
    const Vec f = retained_mismatch(full);
    result.residual = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(result.residual)) break;
    if (result.residual <= kMismatchTolerance) {
      result.delta_tilde = full;
      result.iterations = iter;
      return result;
    }
    if (iter == kMaxNewtonIterations) break;
    const Mat h = coi_power_sensitivity(params, net, full);
    const Mat k = eliminate_reference(params, h, keep, reference);
    Eigen::FullPivLU<Mat> lu(k);
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::SingularJacobian,
                  "equilibrium Jacobian is singular");
    }
    // d(mismatch)/dx = -K
    x += lu.solve(f);
  }
  throw Error(ErrorCode::EquilibriumNotFound, "equilibrium not found");
}

SystemMatrix coi_jacobian(const GeneratorParams& params,
                          const ReducedNetwork& net, const Vec& delta_tilde,
                          std::optional<int> reference) {
  const auto keep = retained_indices(params, reference);
  const Mat h = coi_power_sensitivity(params, net, delta_tilde);
  const Mat k = eliminate_reference(params, h, keep, reference);
  const auto m = static_cast<Eigen::Index>(keep.size());

  SystemMatrix out;
  out.layout = retained_layout(params, reference);
  out.a = Mat::Zero(2 * m, 2 * m);
  out.a.topRightCorner(m, m).setIdentity();
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = static_cast<Eigen::Index>(keep[a]);
    out.a.row(m + a).head(m) = -k.row(a) / params.m(i);
    out.a(m + a, m + a) = -params.d(i) / params.m(i);
  }
  return out;
}

NoiseInputMatrix noise_input_matrix(const GeneratorParams& params,
                                    const ReducedNetwork& net,
                                    const Vec& sigma,
                                    std::optional<int> reference) {
  const auto n = static_cast<Eigen::Index>(net.size());
  params.validate(net.size());
  if (sigma.size() != n) {
    throw Error(ErrorCode::InvalidInput, "sigma length mismatch");
  }
  const auto keep = retained_indices(params, reference);
  const auto m = static_cast<Eigen::Index>(keep.size());
  const double mt = params.m.sum();
  const Vec gain = net.e.array().square() * net.g.diagonal().array() * sigma.array();

  NoiseInputMatrix out;
  out.layout = retained_layout(params, reference);
  out.b = Mat::Zero(2 * m, n);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto i = static_cast<Eigen::Index>(keep[a]);
    out.b.row(m + a) = gain.transpose() / mt;
    out.b(m + a, i) -= gain(i) / params.m(i);
  }
  return out;
}

Mat stationary_covariance(const SystemMatrix& a, const NoiseInputMatrix& b) {
  if (a.a.rows() != b.b.rows()) {
    throw Error(ErrorCode::InvalidInput, "A and B row counts differ");
  }
  return solve_lyapunov(a.a, b.b * b.b.transpose());
}

}  // namespace statemat
