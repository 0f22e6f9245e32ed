#pragma once

#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adagoal/mdp.hpp"
#include "adagoal/mixture.hpp"

namespace adagoal {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator<(const Cell& a, const Cell& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; }
  friend bool operator==(const Cell& a, const Cell& b) { return a.x == b.x && a.y == b.y; }
};

/// Grid world with reflecting walls, slippery cardinal moves and an optional
/// rarely-entered room reachable only by teleport from the start cell.
/// Actions: 0=up, 1=right, 2=down, 3=left, 4=reset. A cardinal action fails
/// with probability failure_prob, in which case one of the other three
/// directions is followed uniformly; moves into walls or off the grid keep
/// the agent in place.
struct GridWorldSpec {
  int width = 5;
  int height = 5;
  std::set<Cell> walls;
  double failure_prob = 0.0;   // p_f
  double rare_prob = 0.0;      // eta, per rare cell, applied to the start row
  std::vector<Cell> rare_cells;
  Cell start{0, 0};
};

struct GridWorld {
  GridWorldSpec spec;
  TabularMdp mdp;
  std::vector<int> cell_to_state;  // width*height, -1 for walls
  std::vector<Cell> state_to_cell;

  int state_of(Cell c) const { return cell_to_state[static_cast<std::size_t>(c.y) * spec.width + c.x]; }
  bool is_rare_state(int s) const {
    for (const Cell& c : spec.rare_cells) {
      if (state_to_cell[s] == c) return true;
    }
    return false;
  }
};

inline GridWorld build_grid_world(const GridWorldSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw std::invalid_argument("build_grid_world: empty grid");
  if (spec.walls.count(spec.start)) throw std::invalid_argument("build_grid_world: start cell is a wall");
  for (const Cell& c : spec.rare_cells) {
    if (spec.walls.count(c)) throw std::invalid_argument("build_grid_world: rare cell is a wall");
  }

  GridWorld world;
  world.spec = spec;
  world.cell_to_state.assign(static_cast<std::size_t>(spec.width) * spec.height, -1);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Cell c{x, y};
      if (spec.walls.count(c)) continue;
      world.cell_to_state[static_cast<std::size_t>(y) * spec.width + x] = static_cast<int>(world.state_to_cell.size());
      world.state_to_cell.push_back(c);
    }
  }

  const int S = static_cast<int>(world.state_to_cell.size());
  const int A = 5;
  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.start_state = world.state_of(spec.start);
  mdp.reset_action = 4;
  mdp.p.assign(static_cast<std::size_t>(S) * A * S, 0.0);

  const int dx[4] = {0, 1, 0, -1};
  const int dy[4] = {-1, 0, 1, 0};
  auto move_target = [&](int s, int dir) {
    const Cell c = world.state_to_cell[s];
    const Cell t{c.x + dx[dir], c.y + dy[dir]};
    if (t.x < 0 || t.x >= spec.width || t.y < 0 || t.y >= spec.height) return s;
    const int ts = world.state_of(t);
    return ts < 0 ? s : ts;  // walls reflect
  };

  std::vector<int> rare_states;
  for (const Cell& c : spec.rare_cells) rare_states.push_back(world.state_of(c));
  const double teleport_mass = spec.rare_prob * static_cast<double>(rare_states.size());
  if (teleport_mass >= 1.0) throw std::invalid_argument("build_grid_world: rare_prob too large");

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < 4; ++a) {
      auto row = mdp.row_mut(s, a);
      for (int dir = 0; dir < 4; ++dir) {
        const double mass = dir == a ? 1.0 - spec.failure_prob : spec.failure_prob / 3.0;
        if (mass > 0.0) row[move_target(s, dir)] += mass;
      }
      if (s == mdp.start_state && !rare_states.empty()) {
        for (double& v : row) v *= 1.0 - teleport_mass;
        for (int rs : rare_states) row[rs] += spec.rare_prob;
      }
    }
    mdp.row_mut(s, 4)[mdp.start_state] = 1.0;
  }
  finalize_mdp(mdp);

  // the start cell must reach every ordinary cell by cardinal moves alone
  std::vector<bool> seen(S, false);
  std::queue<int> frontier;
  seen[mdp.start_state] = true;
  frontier.push(mdp.start_state);
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int dir = 0; dir < 4; ++dir) {
      const int t = move_target(s, dir);
      if (!seen[t] && !world.is_rare_state(t)) {
        seen[t] = true;
        frontier.push(t);
      }
    }
  }
  for (int s = 0; s < S; ++s) {
    if (!seen[s] && !world.is_rare_state(s))
      throw std::invalid_argument("build_grid_world: walls disconnect the start cell from the first room");
  }

  world.mdp = std::move(mdp);
  return world;
}

/// The default two-room layout: 8x7 cells, an L of four wall cells sealing a
/// 2x2 bottom-right room that is entered only by teleport from the start
/// cell. 52 states, 5 actions, start at the top-left.
inline GridWorldSpec two_room_default_spec(double eta = 0.001, double failure_prob = 0.1) {
  GridWorldSpec spec;
  spec.width = 8;
  spec.height = 7;
  spec.walls = {{5, 5}, {5, 6}, {6, 4}, {7, 4}};
  spec.failure_prob = failure_prob;
  spec.rare_prob = eta;
  spec.rare_cells = {{6, 5}, {7, 5}, {6, 6}, {7, 6}};
  spec.start = {0, 0};
  return spec;
}

inline GridWorldSpec deterministic_grid_spec(int width, int height) {
  GridWorldSpec spec;
  spec.width = width;
  spec.height = height;
  spec.failure_prob = 0.0;
  spec.rare_prob = 0.0;
  return spec;
}

/// Five-state instance separating exploration with and without a reset
/// action: the favorable action at the trap fork is invisible until the
/// rarely-entered fork state is visited. States: 0=s0, 1=x, 2=fork (s~),
/// 3=slow (s-), 4=goal.
struct HardResetFreeSpec {
  double eta = 1e-3;       // chance of entering the fork from s0
  double zeta = 0.5;       // goal-hit chance from x; default O(1/L) upstream
  int favorable_action = 0;  // a-dagger
  int num_base_actions = 4;
  bool include_reset = true;
};

inline constexpr int kHardResetFreeStart = 0;
inline constexpr int kHardResetFreeX = 1;
inline constexpr int kHardResetFreeFork = 2;
inline constexpr int kHardResetFreeSlow = 3;
inline constexpr int kHardResetFreeGoal = 4;

inline TabularMdp build_hard_reset_free(const HardResetFreeSpec& spec) {
  if (!(spec.eta > 0.0 && spec.eta < 1.0) || !(spec.zeta > 0.0 && spec.zeta < 1.0))
    throw std::invalid_argument("build_hard_reset_free: eta, zeta must lie in (0,1)");
  if (spec.num_base_actions < 4) throw std::invalid_argument("build_hard_reset_free: need at least 4 actions");
  if (spec.favorable_action < 0 || spec.favorable_action >= spec.num_base_actions)
    throw std::invalid_argument("build_hard_reset_free: favorable action out of range");

  const int S = 5;
  const int A = spec.num_base_actions + (spec.include_reset ? 1 : 0);
  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.start_state = kHardResetFreeStart;
  mdp.reset_action = spec.include_reset ? spec.num_base_actions : -1;
  mdp.p.assign(static_cast<std::size_t>(S) * A * S, 0.0);

  for (int a = 0; a < spec.num_base_actions; ++a) {
    mdp.row_mut(kHardResetFreeStart, a)[kHardResetFreeFork] = spec.eta;
    mdp.row_mut(kHardResetFreeStart, a)[kHardResetFreeX] = 1.0 - spec.eta;
    mdp.row_mut(kHardResetFreeX, a)[kHardResetFreeGoal] = spec.zeta;
    mdp.row_mut(kHardResetFreeX, a)[kHardResetFreeX] = 1.0 - spec.zeta;
    if (a == spec.favorable_action) {
      mdp.row_mut(kHardResetFreeFork, a)[kHardResetFreeGoal] = 1.0;
    } else {
      mdp.row_mut(kHardResetFreeFork, a)[kHardResetFreeSlow] = 1.0;
    }
    mdp.row_mut(kHardResetFreeSlow, a)[kHardResetFreeGoal] = spec.eta / 2.0;
    mdp.row_mut(kHardResetFreeSlow, a)[kHardResetFreeSlow] = 1.0 - spec.eta / 2.0;
    mdp.row_mut(kHardResetFreeGoal, a)[kHardResetFreeStart] = 1.0;
  }
  if (spec.include_reset) {
    for (int s = 0; s < S; ++s) mdp.row_mut(s, mdp.reset_action)[mdp.start_state] = 1.0;
  }
  finalize_mdp(mdp, spec.include_reset);
  return mdp;
}

/// Four-state best-policy-identification instance. Derived parameters
/// H = ceil(L/2 - 1), q = 1/H, eps~ = eps/(2(H+1)); the optimal start value
/// is exactly (1/q + 1)/(1/2 + eps~), realized by sending the failure mass at
/// the decision state straight back to s0 (the bad state keeps its
/// return-to-start row but carries no mass). States: 0=s0, 1=decision,
/// 2=goal, 3=bad.
struct BpiSspHardSpec {
  double radius = 10.0;  // L
  double eps = 0.5;
  int optimal_action = 0;  // a*
  int num_base_actions = 3;
};

inline constexpr int kBpiHardStart = 0;
inline constexpr int kBpiHardDecision = 1;
inline constexpr int kBpiHardGoal = 2;
inline constexpr int kBpiHardBad = 3;

struct BpiSspHardDerived {
  int stage_horizon = 0;  // H
  double q = 0.0;
  double eps_tilde = 0.0;
};

inline BpiSspHardDerived bpi_ssp_hard_derived(const BpiSspHardSpec& spec) {
  BpiSspHardDerived d;
  d.stage_horizon = static_cast<int>(std::ceil(spec.radius / 2.0 - 1.0));
  if (d.stage_horizon < 1) throw std::invalid_argument("build_bpi_ssp_hard: L too small (need H >= 1)");
  d.q = 1.0 / static_cast<double>(d.stage_horizon);
  d.eps_tilde = spec.eps / (2.0 * (d.stage_horizon + 1.0));
  return d;
}

inline double bpi_ssp_hard_optimal_value(const BpiSspHardSpec& spec) {
  const auto d = bpi_ssp_hard_derived(spec);
  return (1.0 / d.q + 1.0) / (0.5 + d.eps_tilde);
}

inline TabularMdp build_bpi_ssp_hard(const BpiSspHardSpec& spec) {
  if (spec.num_base_actions < 2) throw std::invalid_argument("build_bpi_ssp_hard: need at least 2 actions");
  if (spec.optimal_action < 0 || spec.optimal_action >= spec.num_base_actions)
    throw std::invalid_argument("build_bpi_ssp_hard: optimal action out of range");
  const auto derived = bpi_ssp_hard_derived(spec);

  const int S = 4;
  const int A = spec.num_base_actions + 1;
  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.start_state = kBpiHardStart;
  mdp.reset_action = spec.num_base_actions;
  mdp.p.assign(static_cast<std::size_t>(S) * A * S, 0.0);

  for (int a = 0; a < spec.num_base_actions; ++a) {
    mdp.row_mut(kBpiHardStart, a)[kBpiHardDecision] = derived.q;
    mdp.row_mut(kBpiHardStart, a)[kBpiHardStart] = 1.0 - derived.q;
    const double hit = a == spec.optimal_action ? 0.5 + derived.eps_tilde : 0.5;
    mdp.row_mut(kBpiHardDecision, a)[kBpiHardGoal] = hit;
    mdp.row_mut(kBpiHardDecision, a)[kBpiHardStart] = 1.0 - hit;
    mdp.row_mut(kBpiHardGoal, a)[kBpiHardGoal] = 1.0;  // absorbing except under reset
    mdp.row_mut(kBpiHardBad, a)[kBpiHardStart] = 1.0;
  }
  for (int s = 0; s < S; ++s) mdp.row_mut(s, mdp.reset_action)[mdp.start_state] = 1.0;
  finalize_mdp(mdp);
  return mdp;
}

/// Builds a linear mixture environment from d valid base kernels and convex
/// weights. Rows are rescaled by 1/sqrt(d) (and theta* by sqrt(d)) so the
/// aggregated features satisfy ||psi_V|| <= 1 for V into [0,1]; the rescale
/// is recorded in the model.
inline LinearMixtureModel build_mixture_env(const std::vector<TabularMdp>& base_kernels,
                                            const std::vector<double>& weights) {
  if (base_kernels.empty() || base_kernels.size() != weights.size())
    throw std::invalid_argument("build_mixture_env: need one weight per base kernel");
  const int d = static_cast<int>(base_kernels.size());
  const TabularMdp& first = base_kernels.front();
  for (const auto& k : base_kernels) {
    if (k.num_states != first.num_states || k.num_actions != first.num_actions ||
        k.start_state != first.start_state || k.reset_action != first.reset_action)
      throw std::invalid_argument("build_mixture_env: base kernels must share shape, start and reset");
    auto report = validate_mdp(k, k.has_reset());
    if (!report.ok()) throw std::invalid_argument("build_mixture_env: invalid base kernel: " + report.issues.front());
  }

  LinearMixtureModel model;
  model.dim = d;
  model.num_states = first.num_states;
  model.num_actions = first.num_actions;
  model.basis_scale = 1.0 / std::sqrt(static_cast<double>(d));

  TabularMdp realized;
  realized.num_states = first.num_states;
  realized.num_actions = first.num_actions;
  realized.start_state = first.start_state;
  realized.reset_action = first.reset_action;
  realized.p.assign(first.p.size(), 0.0);
  for (int i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < realized.p.size(); ++c) realized.p[c] += weights[i] * base_kernels[i].p[c];
  }
  for (double v : realized.p) {
    if (v < -1e-15) throw std::invalid_argument("build_mixture_env: mixture produces negative probabilities");
  }
  finalize_mdp(realized, realized.has_reset());

  model.basis.assign(static_cast<std::size_t>(d) * first.p.size(), 0.0);
  model.theta_star.assign(d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < first.p.size(); ++c)
      model.basis[static_cast<std::size_t>(i) * first.p.size() + c] = base_kernels[i].p[c] * model.basis_scale;
    model.theta_star[i] = weights[i] / model.basis_scale;
  }
  double norm2 = 0.0;
  for (double t : model.theta_star) norm2 += t * t;
  model.norm_bound = std::sqrt(norm2);
  model.realized = std::move(realized);
  return model;
}

/// Deterministic shift kernel on a cycle of num_states states: action a
/// moves s -> (s + shifts[a]) mod S, plus a trailing reset action.
inline TabularMdp cycle_shift_kernel(int num_states, const std::vector<int>& shifts) {
  TabularMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = static_cast<int>(shifts.size()) + 1;
  mdp.start_state = 0;
  mdp.reset_action = static_cast<int>(shifts.size());
  mdp.p.assign(static_cast<std::size_t>(num_states) * mdp.num_actions * num_states, 0.0);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < static_cast<int>(shifts.size()); ++a) {
      const int target = ((s + shifts[a]) % num_states + num_states) % num_states;
      mdp.row_mut(s, a)[target] = 1.0;
    }
    mdp.row_mut(s, mdp.reset_action)[0] = 1.0;
  }
  finalize_mdp(mdp);
  return mdp;
}

/// The d=2, six-state mixture used by the linear end-to-end suite.
inline LinearMixtureModel six_state_mixture_env() {
  const TabularMdp k1 = cycle_shift_kernel(6, {1, 2});
  const TabularMdp k2 = cycle_shift_kernel(6, {3, 5});
  return build_mixture_env({k1, k2}, {0.3, 0.7});
}

}  // namespace adagoal
