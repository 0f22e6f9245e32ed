#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adagoal/rng.hpp"

namespace adagoal {

inline constexpr double kRowSumTolerance = 1e-12;

/// Finite MDP with a dense transition table P[s][a][s'] and a designated
/// start state. When reset_action >= 0, that action moves every state to
/// start_state with probability 1 (the reset assumption); reset-free
/// instances carry reset_action = -1 and are rejected by the exploration
/// algorithms.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int start_state = 0;
  int reset_action = -1;
  std::vector<double> p;  // num_states * num_actions * num_states, row-major

  std::size_t row_offset(int s, int a) const {
    return (static_cast<std::size_t>(s) * num_actions + a) * num_states;
  }
  std::span<const double> row(int s, int a) const { return {&p[row_offset(s, a)], static_cast<std::size_t>(num_states)}; }
  std::span<double> row_mut(int s, int a) { return {&p[row_offset(s, a)], static_cast<std::size_t>(num_states)}; }
  double prob(int s, int a, int next) const { return p[row_offset(s, a) + next]; }
  bool has_reset() const { return reset_action >= 0; }

  bool state_ok(int s) const { return s >= 0 && s < num_states; }
  bool action_ok(int a) const { return a >= 0 && a < num_actions; }
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

/// Report-style invariant check: row sums within 1e-12 of one, no negative
/// entries, reset rows putting all mass on the start state, indices in range.
/// require_reset=false exempts reset-free instances from the reset-row check.
inline ValidationReport validate_mdp(const TabularMdp& mdp, bool require_reset = true) {
  ValidationReport report;
  auto fail = [&report](const std::string& msg) { report.issues.push_back(msg); };

  if (mdp.num_states <= 0 || mdp.num_actions <= 0) {
    fail("empty state or action space");
    return report;
  }
  if (!mdp.state_ok(mdp.start_state)) fail("start_state out of range");
  if (require_reset && !mdp.has_reset()) fail("reset_action missing");
  if (mdp.has_reset() && !mdp.action_ok(mdp.reset_action)) fail("reset_action out of range");
  if (mdp.p.size() != static_cast<std::size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states) {
    fail("transition table has wrong size");
    return report;
  }

  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      double sum = 0.0;
      bool negative = false;
      for (double v : mdp.row(s, a)) {
        if (v < 0.0) negative = true;
        sum += v;
      }
      if (negative) fail("negative probability in row (" + std::to_string(s) + "," + std::to_string(a) + ")");
      if (std::fabs(sum - 1.0) > kRowSumTolerance)
        fail("row (" + std::to_string(s) + "," + std::to_string(a) + ") sums to " + std::to_string(sum));
    }
    if (mdp.has_reset() && mdp.action_ok(mdp.reset_action) && mdp.state_ok(mdp.start_state)) {
      if (mdp.prob(s, mdp.reset_action, mdp.start_state) != 1.0)
        fail("reset row at state " + std::to_string(s) + " does not move to start_state with probability 1");
    }
  }
  return report;
}

/// Construction-time cleanup: clamps float dust (entries in [-1e-15, 0)) to
/// zero and renormalizes rows whose sum is within 1e-12 of one. Anything
/// worse is rejected.
inline void finalize_mdp(TabularMdp& mdp, bool require_reset = true) {
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      auto row = mdp.row_mut(s, a);
      double sum = 0.0;
      for (double& v : row) {
        if (v < 0.0 && v >= -1e-15) v = 0.0;
        sum += v;
      }
      if (std::fabs(sum - 1.0) > kRowSumTolerance)
        throw std::invalid_argument("finalize_mdp: row (" + std::to_string(s) + "," + std::to_string(a) +
                                    ") sums to " + std::to_string(sum));
      if (sum != 1.0) {
        for (double& v : row) v /= sum;
      }
    }
  }
  auto report = validate_mdp(mdp, require_reset);
  if (!report.ok()) throw std::invalid_argument("finalize_mdp: " + report.issues.front());
}

/// p V(s,a) = sum_{s'} P(s'|s,a) V(s').
inline double apply_transition_operator(const TabularMdp& mdp, std::span<const double> value, int s, int a) {
  if (!mdp.state_ok(s) || !mdp.action_ok(a)) throw std::out_of_range("apply_transition_operator: bad index");
  if (value.size() != static_cast<std::size_t>(mdp.num_states))
    throw std::invalid_argument("apply_transition_operator: value length");
  const double* row = &mdp.p[mdp.row_offset(s, a)];
  double acc = 0.0;
  for (int next = 0; next < mdp.num_states; ++next) acc += row[next] * value[next];
  return acc;
}

/// Lazy goal-absorbed view of a base MDP: the kernel agrees with the base
/// everywhere except the goal row, which self-loops, and the cost is 1 off
/// goal. No kernel copy is made; the p_g Y = p Y identity for Y(g) = 0 means
/// callers only ever need the base kernel plus the Y(g) = 0 convention.
struct GoalAbsorbedView {
  const TabularMdp* base = nullptr;
  int goal = 0;

  GoalAbsorbedView(const TabularMdp& mdp, int g) : base(&mdp), goal(g) {
    if (!mdp.state_ok(g)) throw std::out_of_range("GoalAbsorbedView: goal out of range");
  }

  double cost(int s, int /*a*/) const { return s == goal ? 0.0 : 1.0; }

  /// p_g Y(s,a) for Y with Y(goal) = 0 (rejected otherwise).
  double apply(std::span<const double> value, int s, int a) const {
    if (value[goal] != 0.0) throw std::invalid_argument("GoalAbsorbedView::apply: value(goal) must be 0");
    if (s == goal) return 0.0;  // absorbing row only weights the goal entry
    return apply_transition_operator(*base, value, s, a);
  }

  int next_state(int s, int a, RngStream& rng) const;
};

inline int sample_step(const TabularMdp& mdp, int s, int a, RngStream& rng) {
  if (!mdp.state_ok(s) || !mdp.action_ok(a)) throw std::out_of_range("sample_step: bad index");
  return rng.sample_weighted(mdp.row(s, a));
}

inline int GoalAbsorbedView::next_state(int s, int a, RngStream& rng) const {
  if (s == goal) return goal;
  return sample_step(*base, s, a, rng);
}

inline nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  nlohmann::json p = nlohmann::json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    nlohmann::json per_state = nlohmann::json::array();
    for (int a = 0; a < mdp.num_actions; ++a) {
      per_state.push_back(std::vector<double>(mdp.row(s, a).begin(), mdp.row(s, a).end()));
    }
    p.push_back(std::move(per_state));
  }
  return nlohmann::json{{"S", mdp.num_states},
                        {"A", mdp.num_actions},
                        {"s0", mdp.start_state},
                        {"reset_action", mdp.reset_action},
                        {"P", std::move(p)}};
}

inline TabularMdp mdp_from_json(const nlohmann::json& j) {
  TabularMdp mdp;
  mdp.num_states = j.at("S").get<int>();
  mdp.num_actions = j.at("A").get<int>();
  mdp.start_state = j.at("s0").get<int>();
  mdp.reset_action = j.at("reset_action").get<int>();
  if (mdp.num_states <= 0 || mdp.num_actions <= 0) throw std::invalid_argument("mdp_from_json: empty spaces");
  mdp.p.assign(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states, 0.0);
  const auto& p = j.at("P");
  if (static_cast<int>(p.size()) != mdp.num_states) throw std::invalid_argument("mdp_from_json: P outer size");
  for (int s = 0; s < mdp.num_states; ++s) {
    if (static_cast<int>(p[s].size()) != mdp.num_actions) throw std::invalid_argument("mdp_from_json: P action size");
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (static_cast<int>(p[s][a].size()) != mdp.num_states) throw std::invalid_argument("mdp_from_json: P row size");
      for (int next = 0; next < mdp.num_states; ++next) mdp.p[mdp.row_offset(s, a) + next] = p[s][a][next].get<double>();
    }
  }
  auto report = validate_mdp(mdp, mdp.has_reset());
  if (!report.ok()) throw std::invalid_argument("mdp_from_json: " + report.issues.front());
  return mdp;
}

}  // namespace adagoal
