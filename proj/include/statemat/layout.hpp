#pragma once

#include <optional>
#include <string>
#include <vector>

#include "statemat/types.hpp"

namespace statemat {

enum class StateKind { Angle, Speed };

struct StateLabel {
  int generator = 0;
  StateKind kind = StateKind::Angle;

  bool operator==(const StateLabel&) const = default;
};

// Ordering of a state vector over a set of generators: all angle deviations
// first, then all speed deviations, generators in the listed order.
class StateLayout {
 public:
  StateLayout() = default;
  explicit StateLayout(std::vector<int> generators);

  std::size_t generator_count() const { return generators_.size(); }
  std::size_t dim() const { return 2 * generators_.size(); }
  const std::vector<int>& generators() const { return generators_; }

  StateLabel label(std::size_t index) const;
  std::optional<std::size_t> position(int generator) const;
  std::size_t angle_index(int generator) const;
  std::size_t speed_index(int generator) const;

  // "delta_<id>" / "omega_<id>"
  std::string name(std::size_t index) const;

  bool operator==(const StateLayout&) const = default;

 private:
  std::vector<int> generators_;
};

// A state matrix together with the labels of its rows/columns.
struct SystemMatrix {
  Mat a;
  StateLayout layout;
};

}  // namespace statemat
