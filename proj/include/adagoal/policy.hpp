#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace adagoal {

/// Deterministic non-stationary policy over a fixed horizon: pi[h][s] for
/// h in 1..H.
struct NonStationaryPolicy {
  int horizon = 0;
  int num_states = 0;
  std::vector<std::int32_t> actions;  // horizon * num_states

  NonStationaryPolicy() = default;
  NonStationaryPolicy(int h, int s) : horizon(h), num_states(s), actions(static_cast<std::size_t>(h) * s, 0) {}

  std::int32_t& at(int h, int s) { return actions[static_cast<std::size_t>(h - 1) * num_states + s]; }
  std::int32_t at(int h, int s) const { return actions[static_cast<std::size_t>(h - 1) * num_states + s]; }

  int action(int h, int s) const {
    if (h < 1 || h > horizon) throw std::out_of_range("NonStationaryPolicy::action: step out of range");
    return at(h, s);
  }
};

/// Infinite-horizon policy of period H+1 that plays the inner policy for H
/// steps and then the reset action, repeating until the goal is hit.
struct ResettingPolicy {
  NonStationaryPolicy inner;
  int reset_action = 0;

  /// Action at global step i >= 1: reset when i == 0 (mod H+1), otherwise the
  /// inner policy's step i mod (H+1).
  int action_at(std::int64_t i, int s) const {
    const int period = inner.horizon + 1;
    const int phase = static_cast<int>(i % period);
    if (phase == 0) return reset_action;
    return inner.action(phase, s);
  }
};

}  // namespace adagoal
