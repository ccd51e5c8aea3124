#include "statemat/detection.hpp"

#include <algorithm>
#include <cmath>

namespace statemat {

void ObservedSet::validate(const StateLayout& retained) const {
  if (generators.empty()) {
    throw Error(ErrorCode::InvalidInput, "observed set is empty");
  }
  if (!std::is_sorted(generators.begin(), generators.end()) ||
      std::adjacent_find(generators.begin(), generators.end()) !=
          generators.end()) {
    throw Error(ErrorCode::InvalidInput, "observed set must be sorted, unique");
  }
  for (int g : generators) {
    if (g == reference) {
      throw Error(ErrorCode::InvalidInput,
                  "observed set contains the reference generator");
    }
    if (!retained.position(g)) {
      throw Error(ErrorCode::InvalidInput,
                  "observed set references unknown generator " +
                      std::to_string(g));
    }
  }
}

double normalized_frobenius(const Mat& reference, const Mat& other) {
  if (reference.rows() != other.rows() || reference.cols() != other.cols()) {
    throw Error(ErrorCode::InvalidInput, "matrix dimensions differ");
  }
  const double denom = reference.norm();
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::ZeroNorm, "reference matrix has zero norm");
  }
  return (other - reference).norm() / denom;
}

SystemMatrix element_diff(const SystemMatrix& a, const SystemMatrix& b) {
  if (!(a.layout == b.layout) || a.a.rows() != b.a.rows() ||
      a.a.cols() != b.a.cols()) {
    throw Error(ErrorCode::LabelMismatch, "matrix labels differ");
  }
  return {(a.a - b.a).cwiseAbs(), a.layout};
}

Localization localize(const SystemMatrix& diff, double theta) {
  const auto m = static_cast<Eigen::Index>(diff.layout.generator_count());
  if (m == 0 || diff.a.rows() != 2 * m || diff.a.cols() != 2 * m) {
    throw Error(ErrorCode::InvalidInput, "empty or mislabeled difference block");
  }
  const Mat block = diff.a.bottomLeftCorner(m, m).cwiseAbs();
  Localization out;
  out.theta = theta;
  double top = 0.0;
  for (Eigen::Index p = 0; p < m; ++p) {
    const double s = std::max(block.row(p).maxCoeff(), block.col(p).maxCoeff());
    out.scores.push_back({diff.layout.generators()[static_cast<std::size_t>(p)], s});
    top = std::max(top, s);
  }
  std::stable_sort(out.scores.begin(), out.scores.end(),
                   [](const GeneratorScore& x, const GeneratorScore& y) {
                     return x.score > y.score;
                   });
  if (top > 0.0) {
    for (const auto& s : out.scores) {
      if (s.score >= theta * top) out.implicated.push_back(s.generator);
    }
  }
  std::sort(out.implicated.begin(), out.implicated.end());
  return out;
}

SystemMatrix submatrix_select(const SystemMatrix& a,
                              const std::vector<int>& generators) {
  StateLayout sub(generators);
  std::vector<Eigen::Index> idx(sub.dim());
  for (std::size_t k = 0; k < generators.size(); ++k) {
    if (!a.layout.position(generators[k])) {
      throw Error(ErrorCode::InvalidInput,
                  "unknown generator " + std::to_string(generators[k]));
    }
    idx[k] = static_cast<Eigen::Index>(a.layout.angle_index(generators[k]));
    idx[k + generators.size()] =
        static_cast<Eigen::Index>(a.layout.speed_index(generators[k]));
  }
  return {a.a(idx, idx), std::move(sub)};
}

Monitor::Monitor(MonitorConfig cfg) : cfg_(cfg) {
  report_.threshold = cfg_.threshold;
}

void Monitor::take_snapshot(double t, const SystemMatrix& measured,
                            const SystemMatrix& model) {
  report_.snapshot_time = t;
  report_.diff = element_diff(model, measured);
  report_.localization = localize(*report_.diff, cfg_.theta);
}

void Monitor::push(double t, const SystemMatrix& measured,
                   const SystemMatrix& model) {
  const double d = normalized_frobenius(model.a, measured.a);
  const bool have_prev = !report_.distance.empty();
  const double prev = have_prev ? report_.distance.back() : d;
  report_.times.push_back(t);
  report_.distance.push_back(d);
  last_measured_ = measured;
  last_model_ = model;
  last_t_ = t;

  if (!report_.alarm_time) {
    if (d > cfg_.threshold) {
      if (!above_since_) above_since_ = t;
      if (t - *above_since_ >= cfg_.dwell) report_.alarm_time = t;
    } else {
      above_since_.reset();
    }
    return;
  }
  if (report_.snapshot_time) return;
  if (have_prev && std::abs(d - prev) < cfg_.settle_slope) {
    if (!settled_since_) settled_since_ = t;
    if (t - *settled_since_ >= cfg_.settle_duration) {
      take_snapshot(t, measured, model);
    }
  } else {
    settled_since_.reset();
  }
}

DiscrepancyReport Monitor::finish() {
  if (report_.alarm_time && !report_.snapshot_time && last_measured_) {
    take_snapshot(last_t_, *last_measured_, *last_model_);
  }
  return report_;
}

}  // namespace statemat
