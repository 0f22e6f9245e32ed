#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "adagoal/bonus.hpp"
#include "adagoal/empirical.hpp"
#include "adagoal/mdp.hpp"
#include "adagoal/oracle.hpp"
#include "adagoal/policy.hpp"
#include "adagoal/rng.hpp"
#include "adagoal/samplers.hpp"

namespace adagoal {

/// Horizon rule H = ceil(5(L+2) ln(10(L+2)/eps) / ln 2).
inline int horizon_for(double radius, double eps) {
  if (!(radius >= 1.0)) throw std::invalid_argument("horizon_for: L must be >= 1");
  if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("horizon_for: eps must be in (0,1]");
  const double raw = 5.0 * (radius + 2.0) * std::log(10.0 * (radius + 2.0) / eps) / std::log(2.0);
  return static_cast<int>(std::ceil(raw));
}

struct MgeConfig {
  double radius = 1.0;   // L
  double eps = 1.0;
  double delta = 0.1;
  int horizon = 0;       // resolved upstream (derived or override)
  std::vector<int> goal_space;
  std::int64_t max_episodes = 100000;
  bool simplified_bonuses = false;
  int table_update_period = 1;
};

/// Per-goal optimistic (Q~ / V~), pessimistic (Q_ / V_) and error (U) tables
/// over (h, s, a), h = 1..H with the zero layer H+1 kept implicitly. All
/// cells live in [0, H], goal rows are exactly zero, and a rebuild against an
/// empty model reproduces the documented initialization Q~ = 1[s != g],
/// U = H 1[s != g].
struct GoalTables {
  int goal = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q_opt, q_pess, u;           // horizon * S * A
  std::vector<double> v_opt, v_pess, u_greedy;    // (horizon+1) * S, layer H+1 zero
  std::vector<std::int32_t> greedy;               // horizon * S

  GoalTables() = default;
  GoalTables(int g, int h, int s, int a)
      : goal(g),
        horizon(h),
        num_states(s),
        num_actions(a),
        q_opt(static_cast<std::size_t>(h) * s * a, 0.0),
        q_pess(q_opt.size(), 0.0),
        u(q_opt.size(), 0.0),
        v_opt(static_cast<std::size_t>(h + 1) * s, 0.0),
        v_pess(v_opt.size(), 0.0),
        u_greedy(v_opt.size(), 0.0),
        greedy(static_cast<std::size_t>(h) * s, 0) {}

  std::size_t cell(int h, int s, int a) const {
    return (static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a;
  }
  std::size_t layer(int h, int s) const { return static_cast<std::size_t>(h - 1) * num_states + s; }

  double q_opt_at(int h, int s, int a) const { return h > horizon ? 0.0 : q_opt[cell(h, s, a)]; }
  double q_pess_at(int h, int s, int a) const { return h > horizon ? 0.0 : q_pess[cell(h, s, a)]; }
  double u_at(int h, int s, int a) const { return h > horizon ? 0.0 : u[cell(h, s, a)]; }
  double v_opt_at(int h, int s) const { return v_opt[layer(h, s)]; }
  double v_pess_at(int h, int s) const { return v_pess[layer(h, s)]; }
  int greedy_at(int h, int s) const { return greedy[layer(h, s)]; }

  /// D(g) = V~[1](s0).
  double distance_estimate(int start_state) const { return v_opt[layer(1, start_state)]; }
  /// U[1](s0, a) at the greedy action; E(g) adds 8 eps / 9 on top.
  double error_core(int start_state) const { return u_greedy[layer(1, start_state)]; }

  NonStationaryPolicy greedy_policy() const {
    NonStationaryPolicy pi(horizon, num_states);
    pi.actions = greedy;
    return pi;
  }
};

inline double error_estimate(const GoalTables& tables, int start_state, double eps) {
  return tables.error_core(start_state) + 8.0 * eps / 9.0;
}

/// Per-(s,a) pieces shared by every goal and layer of a rebuild, refreshed
/// once per episode: beta*(n)/n, beta(n)/n, and the observed successor lists
/// flattened with their empirical weights.
struct BonusCache {
  std::vector<double> bstar_over_n;
  std::vector<double> b_over_n;
  std::vector<bool> visited;
  std::vector<std::int32_t> succ_begin;  // S*A+1 prefix offsets
  std::vector<std::int32_t> succ_state;
  std::vector<double> succ_weight;       // empirical probability of the successor

  void refresh(const EmpiricalModel& model, const BonusParams& params) {
    const int S = model.num_states();
    const int A = model.num_actions();
    const std::size_t pairs = static_cast<std::size_t>(S) * A;
    bstar_over_n.assign(pairs, 0.0);
    b_over_n.assign(pairs, 0.0);
    visited.assign(pairs, false);
    succ_begin.assign(pairs + 1, 0);
    succ_state.clear();
    succ_weight.clear();
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t idx = model.pair_index(s, a);
        const std::int64_t n = model.count(s, a);
        if (n > 0) {
          visited[idx] = true;
          bstar_over_n[idx] = params.beta_star(n) / static_cast<double>(n);
          b_over_n[idx] = params.beta(n) / static_cast<double>(n);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::int32_t nxt : model.observed_successors(s, a)) {
            succ_state.push_back(nxt);
            succ_weight.push_back(static_cast<double>(model.count(s, a, nxt)) * inv_n);
          }
        }
        succ_begin[idx + 1] = static_cast<std::int32_t>(succ_state.size());
      }
    }
  }
};

/// One backward pass over h = H..1 re-deriving all three recursions from the
/// empirical model. For unvisited (s,a) the initialization values stand in
/// for the infinite bonuses (Q~ = 1[s != g], Q_ = U = H 1[s != g]).
inline void rebuild_goal_tables(GoalTables& t, const BonusCache& cache, const BonusParams& params) {
  const int S = t.num_states;
  const int A = t.num_actions;
  const int H = t.horizon;
  const int g = t.goal;
  const double h_max = static_cast<double>(H);
  const double inv_h = 1.0 / h_max;
  const double propagate = 1.0 + 3.0 / h_max;
  const double c_var_v = params.var_coeff_value();
  const double c_sec_v = params.second_coeff_value();
  const double c_var_u = params.var_coeff_error();
  const double c_sec_u = params.second_coeff_error();

  for (int h = H; h >= 1; --h) {
    const double* next_v_opt = &t.v_opt[t.layer(h + 1, 0)];
    const double* next_v_pess = &t.v_pess[t.layer(h + 1, 0)];
    const double* next_u_greedy = &t.u_greedy[t.layer(h + 1, 0)];
    double* cur_v_opt = &t.v_opt[t.layer(h, 0)];
    double* cur_v_pess = &t.v_pess[t.layer(h, 0)];
    double* cur_u_greedy = &t.u_greedy[t.layer(h, 0)];
    std::int32_t* cur_greedy = &t.greedy[t.layer(h, 0)];
    double* q_opt_row = &t.q_opt[t.cell(h, 0, 0)];
    double* q_pess_row = &t.q_pess[t.cell(h, 0, 0)];
    double* u_row = &t.u[t.cell(h, 0, 0)];

    for (int s = 0; s < S; ++s, q_opt_row += A, q_pess_row += A, u_row += A) {
      if (s == g) {
        for (int a = 0; a < A; ++a) q_opt_row[a] = q_pess_row[a] = u_row[a] = 0.0;
        cur_v_opt[s] = cur_v_pess[s] = cur_u_greedy[s] = 0.0;
        cur_greedy[s] = 0;
        continue;
      }
      double best_opt = std::numeric_limits<double>::infinity();
      double best_pess = std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        const std::size_t idx = static_cast<std::size_t>(s) * A + a;
        double qo, qp, uu;
        if (!cache.visited[idx]) {
          qo = 1.0;
          qp = h_max;
          uu = h_max;
        } else {
          const std::int32_t begin = cache.succ_begin[idx];
          const std::int32_t end = cache.succ_begin[idx + 1];
          double mean_opt = 0.0, mean_pess = 0.0, mean_u = 0.0;
          for (std::int32_t j = begin; j < end; ++j) {
            const double w = cache.succ_weight[j];
            const std::int32_t nxt = cache.succ_state[j];
            mean_opt += w * next_v_opt[nxt];
            mean_pess += w * next_v_pess[nxt];
            mean_u += w * next_u_greedy[nxt];
          }
          double var = 0.0;
          for (std::int32_t j = begin; j < end; ++j) {
            const double dev = next_v_opt[cache.succ_state[j]] - mean_opt;
            var += cache.succ_weight[j] * dev * dev;
          }
          var = std::max(var, 0.0);
          const double sqrt_bonus = std::sqrt(var * cache.bstar_over_n[idx]);
          const double second_bonus = cache.b_over_n[idx];
          const double gap_term = inv_h * (mean_pess - mean_opt);
          qo = std::clamp(1.0 - c_var_v * sqrt_bonus - c_sec_v * second_bonus - gap_term + mean_opt, 0.0, h_max);
          qp = std::clamp(1.0 + c_var_v * sqrt_bonus + c_sec_v * second_bonus + gap_term + mean_pess, 0.0, h_max);
          uu = std::clamp(c_var_u * sqrt_bonus + c_sec_u * second_bonus + propagate * mean_u, 0.0, h_max);
        }
        q_opt_row[a] = qo;
        q_pess_row[a] = qp;
        u_row[a] = uu;
        if (qo < best_opt) {
          best_opt = qo;
          best_a = a;
        }
        if (qp < best_pess) best_pess = qp;
      }
      cur_v_opt[s] = best_opt;
      cur_v_pess[s] = best_pess;
      cur_greedy[s] = static_cast<std::int32_t>(best_a);
      cur_u_greedy[s] = u_row[best_a];
    }
  }
}

struct EpisodeRecord {
  std::int64_t k = 0;  // algorithmic episode index
  int goal = 0;
  double distance = 0.0;
  double error = 0.0;
  int steps = 0;  // environment steps including the trailing reset
};

/// Optional oracle-backed diagnostics gathered while the run is live: the
/// optimism and gap-bound properties at every (episode, goal), plus the
/// sufficiency check that D <= L and E <= eps certify membership in G_{L+eps}.
struct RunDiagnostics {
  bool enabled = false;
  std::int64_t checks = 0;
  std::int64_t optimism_violations = 0;
  std::int64_t gap_violations = 0;
  std::int64_t sufficiency_violations = 0;
  double max_optimism_violation = 0.0;
  double max_gap_violation = 0.0;
};

struct RunOutputs {
  std::int64_t kappa = 0;       // stopping index: inf{k : rule met}; = episodes on cap stops
  std::int64_t episodes = 0;    // episodes actually executed
  std::int64_t tau = 0;         // (H+1) * episodes
  bool stopped_by_rule = false;
  int horizon = 0;
  std::vector<int> goal_space;
  std::vector<double> final_distance;  // aligned with goal_space
  std::vector<double> final_error;
  std::vector<int> candidate_goals;  // X
  std::map<int, ResettingPolicy> policies;
  std::vector<EpisodeRecord> records;
  RunDiagnostics diagnostics;
};

struct DiagnosticsOptions {
  bool enabled = false;
  double tolerance = 1e-9;
};

/// The tabular branch of the exploration loop: select a goal, execute its
/// greedy optimistic policy for H steps plus a reset, fold the trajectory
/// into the shared empirical model, rebuild every goal's tables, and stop
/// once all goals estimated within L have error at most eps. Outputs the
/// candidate set and one resetting policy per candidate.
inline RunOutputs run_adagoal_ucbvi(const TabularMdp& mdp, const MgeConfig& cfg, const GoalSampler& sampler,
                                    std::uint64_t seed, const DiagnosticsOptions& diag_opts = {}) {
  if (!mdp.has_reset()) throw std::invalid_argument("run_adagoal_ucbvi: environment must expose a reset action");
  if (cfg.horizon < 1) throw std::invalid_argument("run_adagoal_ucbvi: horizon not resolved");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int H = cfg.horizon;
  const auto& goals = cfg.goal_space;
  const int G = static_cast<int>(goals.size());

  RngStream env_rng(seed, 0);
  RngStream sampler_rng(seed, 1);

  BonusParams bonus{S, A, H, cfg.delta, cfg.simplified_bonuses};
  EmpiricalModel model(S, A);
  BonusCache cache;
  cache.refresh(model, bonus);

  std::vector<GoalTables> tables;
  tables.reserve(G);
  for (int g : goals) {
    tables.emplace_back(g, H, S, A);
    rebuild_goal_tables(tables.back(), cache, bonus);
  }

  RunOutputs out;
  out.horizon = H;
  out.goal_space = goals;
  out.diagnostics.enabled = diag_opts.enabled;

  // oracle references, used only when diagnostics are on
  std::vector<double> truncated_optimal(G, 0.0);
  std::vector<double> ssp_from_start(G, 0.0);
  if (diag_opts.enabled) {
    for (int i = 0; i < G; ++i) {
      truncated_optimal[i] = finite_horizon_optimal(mdp, goals[i], H).start_value(mdp.start_state);
      const auto ssp = ssp_optimal(mdp, goals[i]);
      ssp_from_start[i] = ssp.unreachable[mdp.start_state] ? std::numeric_limits<double>::infinity()
                                                           : ssp.values[mdp.start_state];
    }
  }

  auto run_diag_checks = [&](std::int64_t /*table_index*/) {
    for (int i = 0; i < G; ++i) {
      const double d = tables[i].distance_estimate(mdp.start_state);
      const double opt_violation = d - truncated_optimal[i];
      const auto layers = evaluate_policy_finite(mdp, goals[i], tables[i].greedy_policy());
      const double realized = layers[mdp.start_state];
      const double gap_violation = (realized - d) - tables[i].error_core(mdp.start_state);
      ++out.diagnostics.checks;
      if (opt_violation > diag_opts.tolerance) {
        ++out.diagnostics.optimism_violations;
        out.diagnostics.max_optimism_violation = std::max(out.diagnostics.max_optimism_violation, opt_violation);
      }
      if (gap_violation > diag_opts.tolerance) {
        ++out.diagnostics.gap_violations;
        out.diagnostics.max_gap_violation = std::max(out.diagnostics.max_gap_violation, gap_violation);
      }
    }
  };

  if (diag_opts.enabled) run_diag_checks(0);

  std::vector<double> distance(G, 0.0), error(G, 0.0);
  std::int64_t executed = 0;

  for (std::int64_t k = 1;; ++k) {
    for (int i = 0; i < G; ++i) {
      distance[i] = tables[i].distance_estimate(mdp.start_state);
      error[i] = error_estimate(tables[i], mdp.start_state, cfg.eps);
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < G; ++i) {
      if (distance[i] <= cfg.radius) worst = std::max(worst, error[i]);
    }
    if (worst <= cfg.eps) {  // vacuous max stops as well
      out.kappa = k;
      out.stopped_by_rule = true;
      break;
    }
    if (executed >= cfg.max_episodes) {
      out.kappa = executed;
      out.stopped_by_rule = false;
      break;
    }

    if (diag_opts.enabled) {
      for (int i = 0; i < G; ++i) {
        if (distance[i] <= cfg.radius && error[i] <= cfg.eps &&
            ssp_from_start[i] > cfg.radius + cfg.eps + diag_opts.tolerance)
          ++out.diagnostics.sufficiency_violations;
      }
    }

    SamplerInput input{goals, distance, error, model.state_visit_counts(), cfg.radius, mdp.start_state};
    const int goal = sampler.select(input, sampler_rng);
    int goal_idx = 0;
    for (int i = 0; i < G; ++i) {
      if (goals[i] == goal) {
        goal_idx = i;
        break;
      }
    }

    int s = mdp.start_state;
    for (int h = 1; h <= H; ++h) {
      const int a = tables[goal_idx].greedy_at(h, s);
      model.record_state_visit(s);
      const int next = sample_step(mdp, s, a, env_rng);
      model.record_transition(s, a, next);
      s = next;
    }
    // trailing reset step: a known transition, outside the counted kH steps
    ++executed;
    out.records.push_back({k, goal, distance[goal_idx], error[goal_idx], H + 1});

    if (executed % cfg.table_update_period == 0) {
      cache.refresh(model, bonus);
      for (auto& t : tables) rebuild_goal_tables(t, cache, bonus);
      if (diag_opts.enabled) run_diag_checks(executed);
    }
  }

  out.episodes = executed;
  out.tau = static_cast<std::int64_t>(H + 1) * executed;
  out.final_distance = distance;
  out.final_error = error;
  for (int i = 0; i < G; ++i) {
    if (distance[i] <= cfg.radius) {
      out.candidate_goals.push_back(goals[i]);
      out.policies.emplace(goals[i], ResettingPolicy{tables[i].greedy_policy(), mdp.reset_action});
    }
  }
  return out;
}

}  // namespace adagoal
