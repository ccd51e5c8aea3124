#include "statemat/layout.hpp"

#include <algorithm>

namespace statemat {

StateLayout::StateLayout(std::vector<int> generators)
    : generators_(std::move(generators)) {
  auto sorted = generators_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::InvalidInput, "duplicate generator in layout");
  }
}

StateLabel StateLayout::label(std::size_t index) const {
  const std::size_t m = generators_.size();
  if (index >= 2 * m) {
    throw Error(ErrorCode::InvalidInput, "state index out of range");
  }
  return index < m ? StateLabel{generators_[index], StateKind::Angle}
                   : StateLabel{generators_[index - m], StateKind::Speed};
}

std::optional<std::size_t> StateLayout::position(int generator) const {
  auto it = std::find(generators_.begin(), generators_.end(), generator);
  if (it == generators_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - generators_.begin());
}

std::size_t StateLayout::angle_index(int generator) const {
  auto pos = position(generator);
  if (!pos) {
    throw Error(ErrorCode::InvalidInput,
                "generator " + std::to_string(generator) + " not in layout");
  }
  return *pos;
}

std::size_t StateLayout::speed_index(int generator) const {
  return angle_index(generator) + generators_.size();
}

std::string StateLayout::name(std::size_t index) const {
  const auto l = label(index);
  return (l.kind == StateKind::Angle ? "delta_" : "omega_") +
         std::to_string(l.generator);
}

}  // namespace statemat
