#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adagoal/rng.hpp"

namespace adagoal {

/// Everything a goal-selection rule may look at. Estimates are aligned with
/// goal_space; state_visits is indexed by state and counts completed episodes
/// only. Samplers are stateless so that the tabular and linear algorithms can
/// share them.
struct SamplerInput {
  std::span<const int> goal_space;
  std::span<const double> distance;  // D(g)
  std::span<const double> error;     // E(g)
  std::span<const std::int64_t> state_visits;
  double radius = 0.0;  // L
  int start_state = 0;
};

struct GoalSampler {
  enum class Kind { AdaGoal, UniGoal, RareGoal };
  Kind kind = Kind::AdaGoal;
  double alpha = 0.1;  // RareGoal count floor

  /// Parses "adagoal" | "unigoal" | "raregoal:<alpha>".
  static GoalSampler parse(const std::string& name) {
    GoalSampler s;
    if (name == "adagoal") {
      s.kind = Kind::AdaGoal;
    } else if (name == "unigoal") {
      s.kind = Kind::UniGoal;
    } else if (name.rfind("raregoal", 0) == 0) {
      s.kind = Kind::RareGoal;
      const auto colon = name.find(':');
      if (colon != std::string::npos) s.alpha = std::stod(name.substr(colon + 1));
      if (!(s.alpha > 0.0) || s.alpha > 1.0) throw std::invalid_argument("raregoal alpha must be in (0,1]");
    } else {
      throw std::invalid_argument("unknown sampler: " + name);
    }
    return s;
  }

  std::string name() const {
    switch (kind) {
      case Kind::AdaGoal:
        return "adagoal";
      case Kind::UniGoal:
        return "unigoal";
      case Kind::RareGoal:
        return "raregoal:" + std::to_string(alpha);
    }
    return "?";
  }

  int select(const SamplerInput& in, RngStream& rng) const {
    switch (kind) {
      case Kind::AdaGoal:
        return adagoal_select(in);
      case Kind::UniGoal:
        return unigoal_select(in, rng);
      case Kind::RareGoal:
        return raregoal_select(in, rng);
    }
    return in.start_state;
  }

  /// argmax of E over { g : D(g) <= L }; ties broken by lowest state index.
  /// The feasible set contains s0 whenever s0 is in the goal space (D(s0)=0),
  /// so the defensive fallback never fires in practice.
  int adagoal_select(const SamplerInput& in) const {
    int best_goal = -1;
    double best_error = 0.0;
    for (std::size_t i = 0; i < in.goal_space.size(); ++i) {
      if (in.distance[i] > in.radius) continue;
      const int g = in.goal_space[i];
      if (best_goal < 0 || in.error[i] > best_error || (in.error[i] == best_error && g < best_goal)) {
        best_goal = g;
        best_error = in.error[i];
      }
    }
    return best_goal < 0 ? in.start_state : best_goal;
  }

  int unigoal_select(const SamplerInput& in, RngStream& rng) const {
    std::vector<int> support;
    support.reserve(in.goal_space.size());
    for (int g : in.goal_space) {
      if (g != in.start_state) support.push_back(g);
    }
    if (support.empty()) return in.start_state;
    return support[rng.next_below(static_cast<int>(support.size()))];
  }

  /// Support, normalized weights (sum to 1) for RareGoal; exposed so the
  /// distribution itself can be checked.
  std::pair<std::vector<int>, std::vector<double>> raregoal_weights(const SamplerInput& in) const {
    std::vector<int> support;
    std::vector<double> weights;
    double total = 0.0;
    for (int g : in.goal_space) {
      if (g == in.start_state) continue;
      const double floored = std::max(static_cast<double>(in.state_visits[g]), alpha);
      support.push_back(g);
      weights.push_back(1.0 / floored);
      total += weights.back();
    }
    for (double& w : weights) w /= total;
    return {std::move(support), std::move(weights)};
  }

  int raregoal_select(const SamplerInput& in, RngStream& rng) const {
    auto [support, weights] = raregoal_weights(in);
    if (support.empty()) return in.start_state;
    return support[rng.sample_weighted(weights)];
  }
};

}  // namespace adagoal
