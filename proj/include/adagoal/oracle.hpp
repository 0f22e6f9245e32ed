#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include <json.hpp>

#include "adagoal/linalg.hpp"
#include "adagoal/mdp.hpp"
#include "adagoal/policy.hpp"

namespace adagoal {

/// Optimal values of the H-step goal-absorbed model: V[h][s] for h = 1..H+1,
/// together with the greedy policy realizing them. V[1][start] is the optimal
/// truncated distance to the goal.
struct FiniteHorizonValues {
  int goal = 0;
  int horizon = 0;
  int num_states = 0;
  std::vector<double> values;  // (horizon+1) layers of num_states, h = 1..H+1
  NonStationaryPolicy greedy;

  double at(int h, int s) const { return values[static_cast<std::size_t>(h - 1) * num_states + s]; }
  double start_value(int s0) const { return at(1, s0); }
};

/// Backward induction on the goal-absorbed model: V[h][s] = 1[s != g] +
/// min_a p_g V[h+1](s,a), with the greedy argmin tie-broken to the lowest
/// action index.
inline FiniteHorizonValues finite_horizon_optimal(const TabularMdp& mdp, int goal, int horizon) {
  if (!mdp.state_ok(goal)) throw std::out_of_range("finite_horizon_optimal: goal out of range");
  if (horizon < 1) throw std::invalid_argument("finite_horizon_optimal: horizon must be >= 1");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  FiniteHorizonValues out;
  out.goal = goal;
  out.horizon = horizon;
  out.num_states = S;
  out.values.assign(static_cast<std::size_t>(horizon + 1) * S, 0.0);
  out.greedy = NonStationaryPolicy(horizon, S);

  for (int h = horizon; h >= 1; --h) {
    const double* next = &out.values[static_cast<std::size_t>(h) * S];  // layer h+1
    double* cur = &out.values[static_cast<std::size_t>(h - 1) * S];
    for (int s = 0; s < S; ++s) {
      if (s == goal) {
        cur[s] = 0.0;
        out.greedy.at(h, s) = 0;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        const double* row = &mdp.p[mdp.row_offset(s, a)];
        double q = 0.0;
        for (int n = 0; n < S; ++n) q += row[n] * next[n];  // next[goal] = 0
        if (q < best) {
          best = q;
          best_a = a;
        }
      }
      cur[s] = 1.0 + best;
      out.greedy.at(h, s) = static_cast<std::int32_t>(best_a);
    }
  }
  return out;
}

/// Exact finite-horizon value layers of a fixed policy in the goal-absorbed
/// model; layer 1 entry at the start state is the policy's truncated cost.
inline std::vector<double> evaluate_policy_finite(const TabularMdp& mdp, int goal,
                                                  const NonStationaryPolicy& policy) {
  const int S = mdp.num_states;
  const int H = policy.horizon;
  std::vector<double> layers(static_cast<std::size_t>(H + 1) * S, 0.0);
  for (int h = H; h >= 1; --h) {
    const double* next = &layers[static_cast<std::size_t>(h) * S];
    double* cur = &layers[static_cast<std::size_t>(h - 1) * S];
    for (int s = 0; s < S; ++s) {
      if (s == goal) {
        cur[s] = 0.0;
        continue;
      }
      const double* row = &mdp.p[mdp.row_offset(s, policy.at(h, s))];
      double v = 0.0;
      for (int n = 0; n < S; ++n) v += row[n] * next[n];
      cur[s] = 1.0 + v;
    }
  }
  return layers;
}

/// Exact shortest-path values V*(. -> goal) with unreachable states flagged
/// explicitly instead of carrying infinities through the arithmetic.
struct SspValues {
  int goal = 0;
  std::vector<double> values;       // +inf where unreachable
  std::vector<bool> unreachable;
  double tolerance = 0.0;           // achieved Bellman residual on finite states
  bool used_vi_fallback = false;
  std::vector<std::int32_t> policy;  // optimal stationary policy (arbitrary at goal)

  double at(int s) const { return values[s]; }
};

struct SspOptions {
  double v_max = 1e9;        // values above this are flagged unreachable
  int max_policy_iters = 10000;
};

namespace detail {

/// States from which the goal is graph-reachable (positive-probability path,
/// actions chosen freely), found by backward BFS, plus BFS levels used to
/// seed policy iteration with a provably proper policy.
inline void goal_reach_levels(const TabularMdp& mdp, int goal, std::vector<int>& level) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  level.assign(S, -1);
  level[goal] = 0;
  std::queue<int> frontier;
  frontier.push(goal);
  // reverse adjacency: for each target, the sources with positive mass
  std::vector<std::vector<int>> rev(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double* row = &mdp.p[mdp.row_offset(s, a)];
      for (int n = 0; n < S; ++n) {
        if (row[n] > 0.0 && n != s) rev[n].push_back(s);
      }
    }
  }
  while (!frontier.empty()) {
    const int t = frontier.front();
    frontier.pop();
    for (int s : rev[t]) {
      if (level[s] < 0) {
        level[s] = level[t] + 1;
        frontier.push(s);
      }
    }
  }
}

}  // namespace detail

/// Policy iteration with exact linear solves on the goal-absorbed view.
/// The initial policy always steps toward a strictly smaller BFS level, which
/// makes it proper on every reachable state; a singular evaluation system
/// (improper greedy policy) falls back to truncated value iteration for that
/// step and flags any state whose value exceeds the cap.
inline SspValues ssp_optimal(const TabularMdp& mdp, int goal, const SspOptions& opts = {}) {
  if (!mdp.state_ok(goal)) throw std::out_of_range("ssp_optimal: goal out of range");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const double inf = std::numeric_limits<double>::infinity();

  SspValues out;
  out.goal = goal;
  out.values.assign(S, inf);
  out.unreachable.assign(S, true);
  out.policy.assign(S, 0);
  out.values[goal] = 0.0;
  out.unreachable[goal] = false;

  std::vector<int> level;
  detail::goal_reach_levels(mdp, goal, level);

  std::vector<int> live;  // reachable, non-goal states, in index order
  for (int s = 0; s < S; ++s) {
    if (s != goal && level[s] >= 0) live.push_back(s);
  }
  if (live.empty()) return out;

  std::vector<int> pos(S, -1);
  for (int i = 0; i < static_cast<int>(live.size()); ++i) pos[live[i]] = i;

  // proper initial policy: any action with positive mass toward a lower level
  std::vector<std::int32_t> policy(S, 0);
  for (int s : live) {
    for (int a = 0; a < A; ++a) {
      const double* row = &mdp.p[mdp.row_offset(s, a)];
      bool descends = false;
      for (int n = 0; n < S && !descends; ++n) {
        if (row[n] > 0.0 && level[n] >= 0 && level[n] < level[s]) descends = true;
      }
      if (descends) {
        policy[s] = static_cast<std::int32_t>(a);
        break;
      }
    }
  }

  const int m = static_cast<int>(live.size());
  std::vector<double> v(S, 0.0);

  auto evaluate_exact = [&](const std::vector<std::int32_t>& pi) -> bool {
    std::vector<double> a_mat(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> b(m, 1.0);
    for (int i = 0; i < m; ++i) {
      const int s = live[i];
      const double* row = &mdp.p[mdp.row_offset(s, pi[s])];
      a_mat[static_cast<std::size_t>(i) * m + i] = 1.0;
      for (int n = 0; n < S; ++n) {
        if (n == goal || row[n] == 0.0) continue;
        if (pos[n] < 0) return false;  // mass escaping the reachable set: improper
        a_mat[static_cast<std::size_t>(i) * m + pos[n]] -= row[n];
      }
    }
    auto solved = solve_dense(std::move(a_mat), std::move(b));
    if (!solved) return false;
    for (double x : *solved) {
      if (!(x > -1e-9) || x > 10.0 * opts.v_max) return false;
    }
    for (int i = 0; i < m; ++i) v[live[i]] = std::max(0.0, (*solved)[i]);
    return true;
  };

  auto evaluate_vi = [&](int sweeps) {
    std::fill(v.begin(), v.end(), 0.0);
    for (int it = 0; it < sweeps; ++it) {
      double delta = 0.0;
      for (int s : live) {
        double best = inf;
        for (int a = 0; a < A; ++a) {
          const double* row = &mdp.p[mdp.row_offset(s, a)];
          double q = 1.0;
          bool dead = false;
          for (int n = 0; n < S; ++n) {
            if (row[n] == 0.0 || n == goal) continue;
            if (pos[n] < 0) {
              dead = true;
              break;
            }
            q += row[n] * v[n];
          }
          if (!dead && q < best) best = q;
        }
        if (best > opts.v_max) best = opts.v_max * 10.0;
        delta = std::max(delta, std::fabs(best - v[s]));
        v[s] = best;
      }
      if (delta < 1e-13 * std::max(1.0, *std::max_element(v.begin(), v.end()))) break;
    }
  };

  bool fallback = false;
  if (!evaluate_exact(policy)) {
    fallback = true;
    evaluate_vi(2'000'000);
  } else {
    for (int iter = 0; iter < opts.max_policy_iters; ++iter) {
      bool changed = false;
      std::vector<std::int32_t> improved = policy;
      for (int s : live) {
        double best_q = inf;
        int best_a = policy[s];
        for (int a = 0; a < A; ++a) {
          const double* row = &mdp.p[mdp.row_offset(s, a)];
          double q = 1.0;
          bool dead = false;
          for (int n = 0; n < S; ++n) {
            if (row[n] == 0.0 || n == goal) continue;
            if (pos[n] < 0) {
              dead = true;
              break;
            }
            q += row[n] * v[n];
          }
          if (dead) continue;
          if (q < best_q - 1e-12 || (best_q == inf && q < best_q)) {
            best_q = q;
            best_a = a;
          }
        }
        if (best_a != policy[s] && best_q < v[s] - 1e-12) {
          improved[s] = static_cast<std::int32_t>(best_a);
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<double> prev = v;
      if (!evaluate_exact(improved)) {
        fallback = true;
        evaluate_vi(2'000'000);
        break;
      }
      policy = std::move(improved);
    }
  }

  double residual = 0.0;
  for (int s : live) {
    double best = inf;
    int best_a = 0;
    for (int a = 0; a < A; ++a) {
      const double* row = &mdp.p[mdp.row_offset(s, a)];
      double q = 1.0;
      bool dead = false;
      for (int n = 0; n < S; ++n) {
        if (row[n] == 0.0 || n == goal) continue;
        if (pos[n] < 0) {
          dead = true;
          break;
        }
        q += row[n] * v[n];
      }
      if (!dead && q < best) {
        best = q;
        best_a = a;
      }
    }
    if (v[s] <= opts.v_max) residual = std::max(residual, std::fabs(best - v[s]));
    policy[s] = static_cast<std::int32_t>(best_a);
  }

  for (int s : live) {
    if (v[s] > opts.v_max) {
      out.values[s] = inf;
      out.unreachable[s] = true;
    } else {
      out.values[s] = v[s];
      out.unreachable[s] = false;
    }
  }
  out.policy = std::move(policy);
  out.tolerance = residual;
  out.used_vi_fallback = fallback;
  return out;
}

/// G_L = { g : V*(s0 -> g) <= L + slack }, with a fixed 1e-9 comparison
/// tolerance against exact-solver noise.
inline std::vector<int> reachable_set(const TabularMdp& mdp, std::span<const int> goal_space, double radius,
                                      double slack = 0.0, double comparison_tol = 1e-9) {
  std::vector<int> result;
  for (int g : goal_space) {
    const auto ssp = ssp_optimal(mdp, g);
    if (!ssp.unreachable[mdp.start_state] && ssp.values[mdp.start_state] <= radius + slack + comparison_tol)
      result.push_back(g);
  }
  return result;
}

/// Exact probability that the state after the policy's H steps in the
/// goal-absorbed view is not the goal, by forward propagation of the state
/// distribution from the point mass at s0.
inline double reach_failure_prob(const TabularMdp& mdp, int goal, const NonStationaryPolicy& policy) {
  const int S = mdp.num_states;
  std::vector<double> dist(S, 0.0), next(S, 0.0);
  dist[mdp.start_state] = 1.0;
  for (int h = 1; h <= policy.horizon; ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      const double mass = dist[s];
      if (mass == 0.0) continue;
      if (s == goal) {
        next[goal] += mass;
        continue;
      }
      const double* row = &mdp.p[mdp.row_offset(s, policy.at(h, s))];
      for (int n = 0; n < S; ++n) {
        if (row[n] > 0.0) next[n] += mass * row[n];
      }
    }
    dist.swap(next);
  }
  return std::max(0.0, 1.0 - dist[goal]);
}

struct PolicyValue {
  bool bounded = false;
  double value = std::numeric_limits<double>::infinity();
};

/// SSP value of a resetting policy via the renewal identity
/// V = (Vbar + q) / (1 - q), where Vbar is the inner policy's exact H-step
/// value and q its exact failure probability; q = 1 (within 1e-15) means the
/// policy never reaches the goal and the value is unbounded.
inline PolicyValue evaluate_resetting_policy(const TabularMdp& mdp, int goal, const ResettingPolicy& rp) {
  const auto layers = evaluate_policy_finite(mdp, goal, rp.inner);
  const double v_bar = layers[mdp.start_state];
  const double q = reach_failure_prob(mdp, goal, rp.inner);
  PolicyValue out;
  if (1.0 - q <= 1e-15) return out;
  out.bounded = true;
  out.value = (v_bar + q) / (1.0 - q);
  return out;
}

/// Definition-3 verdict: C1 is per-goal epsilon-optimality of the returned
/// resetting policies, C2 is the sandwich G_L <= X <= G_{L+eps}.
struct PacVerdict {
  std::map<int, bool> c1_holds;
  std::map<int, double> gaps;
  bool c2_holds = false;
  std::vector<int> missing_goals;   // in G_L but not X
  std::vector<int> excess_goals;    // in X but not G_{L+eps}
  bool c1_all() const {
    for (const auto& [g, ok] : c1_holds) {
      if (!ok) return false;
    }
    return true;
  }
  bool overall() const { return c1_all() && c2_holds; }
};

inline PacVerdict verify_pac(const TabularMdp& mdp, std::span<const int> goal_space, double radius, double eps,
                             std::span<const int> candidate_goals,
                             const std::map<int, ResettingPolicy>& policies) {
  PacVerdict verdict;
  for (int g : candidate_goals) {
    const auto ssp = ssp_optimal(mdp, g);
    const double v_star = ssp.values[mdp.start_state];
    auto it = policies.find(g);
    if (it == policies.end() || ssp.unreachable[mdp.start_state]) {
      verdict.c1_holds[g] = false;
      verdict.gaps[g] = std::numeric_limits<double>::infinity();
      continue;
    }
    const auto pv = evaluate_resetting_policy(mdp, g, it->second);
    if (!pv.bounded) {
      verdict.c1_holds[g] = false;
      verdict.gaps[g] = std::numeric_limits<double>::infinity();
      continue;
    }
    const double gap = pv.value - v_star;
    verdict.gaps[g] = gap;
    verdict.c1_holds[g] = gap <= eps + 1e-9;
  }

  const auto lower = reachable_set(mdp, goal_space, radius);
  const auto upper = reachable_set(mdp, goal_space, radius + eps);
  std::vector<int> x_sorted(candidate_goals.begin(), candidate_goals.end());
  std::sort(x_sorted.begin(), x_sorted.end());
  for (int g : lower) {
    if (!std::binary_search(x_sorted.begin(), x_sorted.end(), g)) verdict.missing_goals.push_back(g);
  }
  std::vector<int> upper_sorted = upper;
  std::sort(upper_sorted.begin(), upper_sorted.end());
  for (int g : x_sorted) {
    if (!std::binary_search(upper_sorted.begin(), upper_sorted.end(), g)) verdict.excess_goals.push_back(g);
  }
  verdict.c2_holds = verdict.missing_goals.empty() && verdict.excess_goals.empty();
  return verdict;
}

inline nlohmann::json pac_verdict_to_json(const PacVerdict& v) {
  nlohmann::json c1 = nlohmann::json::array();
  for (const auto& [g, ok] : v.c1_holds) {
    double gap = v.gaps.at(g);
    nlohmann::json entry{{"goal", g}, {"holds", ok}};
    if (std::isfinite(gap)) {
      entry["gap"] = gap;
    } else {
      entry["gap"] = "unbounded";
    }
    c1.push_back(std::move(entry));
  }
  return nlohmann::json{{"c1", std::move(c1)},
                        {"c1_all", v.c1_all()},
                        {"c2_holds", v.c2_holds},
                        {"missing_goals", v.missing_goals},
                        {"excess_goals", v.excess_goals},
                        {"overall", v.overall()}};
}

inline nlohmann::json ssp_values_to_json(const SspValues& ssp) {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t s = 0; s < ssp.values.size(); ++s) {
    if (ssp.unreachable[s]) {
      values.push_back(nullptr);
    } else {
      values.push_back(ssp.values[s]);
    }
  }
  return nlohmann::json{{"goal", ssp.goal}, {"values", std::move(values)}, {"tolerance", ssp.tolerance}};
}

}  // namespace adagoal
