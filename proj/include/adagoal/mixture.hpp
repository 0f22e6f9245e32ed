#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "adagoal/linalg.hpp"
#include "adagoal/mdp.hpp"
#include "adagoal/oracle.hpp"
#include "adagoal/policy.hpp"
#include "adagoal/rng.hpp"
#include "adagoal/samplers.hpp"
#include "adagoal/tabular.hpp"

namespace adagoal {

/// Transition kernel expressed as <phi(s'|s,a), theta*> over d basis
/// measures, here valid kernels rescaled by 1/sqrt(d) so that ||psi_V|| <= 1
/// for V into [0,1]. theta* is hidden from the learner; the realized tabular
/// kernel is exported for environment stepping and for the oracle.
struct LinearMixtureModel {
  int dim = 0;  // d
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> basis;       // dim * S * A * S, rescaled
  std::vector<double> theta_star;  // dim, rescaled to match
  double norm_bound = 1.0;         // B >= ||theta*||_2
  double basis_scale = 1.0;        // factor applied to the raw kernels
  TabularMdp realized;

  std::size_t basis_offset(int i, int s, int a) const {
    return ((static_cast<std::size_t>(i) * num_states + s) * num_actions + a) * num_states;
  }
  std::span<const double> basis_row(int i, int s, int a) const {
    return {&basis[basis_offset(i, s, a)], static_cast<std::size_t>(num_states)};
  }
};

/// Augmented (d+1)-vector psi^g_V(s,a): components i <= d carry
/// 1[s != g] sum_{s'} phi_i(s'|s,a) V(s'), the last carries 1[s = g] V(g).
inline void augmented_psi(const LinearMixtureModel& m, int goal, std::span<const double> value, int s, int a,
                          std::span<double> out) {
  const int d = m.dim;
  if (s == goal) {
    for (int i = 0; i < d; ++i) out[i] = 0.0;
    out[d] = value[goal];
    return;
  }
  for (int i = 0; i < d; ++i) {
    const double* row = &m.basis[m.basis_offset(i, s, a)];
    double acc = 0.0;
    for (int n = 0; n < m.num_states; ++n) acc += row[n] * value[n];
    out[i] = acc;
  }
  out[d] = 0.0;
}

/// theta*_g = (theta*; 1), satisfying <phi_g, theta*_g> = p_g.
inline std::vector<double> augmented_theta_star(const LinearMixtureModel& m) {
  std::vector<double> t(m.theta_star);
  t.push_back(1.0);
  return t;
}

/// Confidence radius beta_k = H sqrt(d log(3(1 + k H^3 (B+1)^2)/delta)) + 1.
inline double confidence_radius(std::int64_t k, int d, double norm_bound, int horizon, double delta) {
  if (k < 1) throw std::invalid_argument("confidence_radius: k >= 1 required");
  const double h = static_cast<double>(horizon);
  const double scale = (norm_bound + 1.0) * (norm_bound + 1.0);
  return h * std::sqrt(d * std::log(3.0 * (1.0 + static_cast<double>(k) * h * h * h * scale) / delta)) + 1.0;
}

/// Practical radius used when simplified bonuses are requested: the same
/// log-scale term without the horizon multiplier.
inline double simplified_confidence_radius(std::int64_t k, int d, double norm_bound, int horizon, double delta) {
  const double h = static_cast<double>(horizon);
  const double scale = (norm_bound + 1.0) * (norm_bound + 1.0);
  return std::sqrt(d * std::log(3.0 * (1.0 + static_cast<double>(k) * h * h * h * scale) / delta)) + 1.0;
}

/// Value-targeted and error-targeted ridge state for one goal. theta is the
/// closed-form minimizer Sigma^{-1} b, refreshed at episode end.
struct GoalRegressors {
  SymMatrix sigma_value, sigma_error;
  std::vector<double> b_value, b_error;
  std::vector<double> theta_value, theta_error;

  GoalRegressors() = default;
  GoalRegressors(int aug_dim, double lambda)
      : sigma_value(SymMatrix::scaled_identity(aug_dim, lambda)),
        sigma_error(SymMatrix::scaled_identity(aug_dim, lambda)),
        b_value(aug_dim, 0.0),
        b_error(aug_dim, 0.0),
        theta_value(aug_dim, 0.0),
        theta_error(aug_dim, 0.0) {}

  void refresh() {
    theta_value = robust_solve(sigma_value, b_value);
    theta_error = robust_solve(sigma_error, b_error);
  }

 private:
  // lambda*I keeps both matrices positive definite in exact arithmetic; on a
  // numerically failed factorization we recondition the diagonal once and
  // re-solve, and treat a second failure as a hard error.
  static std::vector<double> robust_solve(SymMatrix& m, const std::vector<double>& b) {
    Cholesky chol(m);
    if (!chol.ok()) {
      double trace = 0.0;
      for (int i = 0; i < m.n; ++i) trace += m.at(i, i);
      for (int i = 0; i < m.n; ++i) m.at(i, i) += 1e-12 * std::max(trace, 1.0);
      chol = Cholesky(m);
      if (!chol.ok()) throw std::runtime_error("GoalRegressors: covariance not positive definite");
    }
    return chol.solve(b);
  }
};

/// Per-goal optimistic Q/V and error U tables of the linear branch; U is
/// state-indexed because it is always evaluated at the greedy action.
struct LinTables {
  int goal = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q;               // H * S * A
  std::vector<double> v;               // (H+1) * S, layer H+1 zero
  std::vector<double> u;               // (H+1) * S
  std::vector<std::int32_t> greedy;    // H * S

  LinTables() = default;
  LinTables(int g, int h, int s, int a)
      : goal(g),
        horizon(h),
        num_states(s),
        num_actions(a),
        q(static_cast<std::size_t>(h) * s * a, 0.0),
        v(static_cast<std::size_t>(h + 1) * s, 0.0),
        u(v.size(), 0.0),
        greedy(static_cast<std::size_t>(h) * s, 0) {}

  std::size_t layer(int h, int s) const { return static_cast<std::size_t>(h - 1) * num_states + s; }
  double q_at(int h, int s, int a) const {
    return q[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a];
  }
  double v_at(int h, int s) const { return v[layer(h, s)]; }
  double u_at(int h, int s) const { return u[layer(h, s)]; }
  int greedy_at(int h, int s) const { return greedy[layer(h, s)]; }
  std::span<const double> v_layer(int h) const { return {&v[layer(h, 0)], static_cast<std::size_t>(num_states)}; }
  std::span<const double> u_layer(int h) const { return {&u[layer(h, 0)], static_cast<std::size_t>(num_states)}; }

  double distance_estimate(int start_state) const { return v[layer(1, start_state)]; }
  double error_core(int start_state) const { return u[layer(1, start_state)]; }

  NonStationaryPolicy greedy_policy() const {
    NonStationaryPolicy pi(horizon, num_states);
    pi.actions = greedy;
    return pi;
  }
};

/// Backward recursion of the linear branch, with episode-start covariances
/// inside every bonus:
///   Q = clip(1[s != g] + <theta, psi_V> - beta ||Sigma^{-1/2} psi_V||, 0, H)
///   U = clip(2 beta ||Sigma^{-1/2} psi_V(s,pi)|| + <psi_U(s,pi), theta_err>
///            + beta ||Sigma_err^{-1/2} psi_U(s,pi)||, 0, H)
inline void rebuild_lin_tables(LinTables& t, const LinearMixtureModel& m, const GoalRegressors& regs,
                               double beta_k) {
  const int S = t.num_states;
  const int A = t.num_actions;
  const int H = t.horizon;
  const int g = t.goal;
  const int aug = m.dim + 1;
  const double h_max = static_cast<double>(H);

  Cholesky chol_value(regs.sigma_value);
  Cholesky chol_error(regs.sigma_error);
  if (!chol_value.ok() || !chol_error.ok()) throw std::runtime_error("rebuild_lin_tables: covariance not PD");

  std::vector<double> psi(aug, 0.0);
  std::vector<double> greedy_bonus(static_cast<std::size_t>(S), 0.0);

  for (int h = H; h >= 1; --h) {
    const auto v_next = t.v_layer(h + 1);
    const auto u_next = t.u_layer(h + 1);
    double* v_cur = &t.v[t.layer(h, 0)];
    double* u_cur = &t.u[t.layer(h, 0)];
    std::int32_t* greedy_cur = &t.greedy[t.layer(h, 0)];
    double* q_row = &t.q[(static_cast<std::size_t>(h - 1) * S) * A];

    for (int s = 0; s < S; ++s, q_row += A) {
      double best = std::numeric_limits<double>::infinity();
      int best_a = 0;
      double best_a_bonus = 0.0;
      for (int a = 0; a < A; ++a) {
        augmented_psi(m, g, v_next, s, a, psi);
        double dot = 0.0;
        for (int i = 0; i < aug; ++i) dot += regs.theta_value[i] * psi[i];
        const double bonus = chol_value.inv_half_norm(psi);
        const double cost = s == g ? 0.0 : 1.0;
        const double qv = std::clamp(cost + dot - beta_k * bonus, 0.0, h_max);
        q_row[a] = qv;
        if (qv < best) {
          best = qv;
          best_a = a;
          best_a_bonus = bonus;
        }
      }
      v_cur[s] = best;
      greedy_cur[s] = static_cast<std::int32_t>(best_a);
      greedy_bonus[s] = best_a_bonus;
    }
    for (int s = 0; s < S; ++s) {
      const int a = greedy_cur[s];
      augmented_psi(m, g, u_next, s, a, psi);
      double dot = 0.0;
      for (int i = 0; i < aug; ++i) dot += regs.theta_error[i] * psi[i];
      const double err_bonus = chol_error.inv_half_norm(psi);
      u_cur[s] = std::clamp(2.0 * beta_k * greedy_bonus[s] + dot + beta_k * err_bonus, 0.0, h_max);
    }
  }
}

struct LinearTransition {
  int state = 0;
  int action = 0;
  int next = 0;
};

/// Rank-1 updates for one episode: contexts psi aggregated with this
/// episode's V (resp. U) tables at step h, targets the same function at the
/// observed next state; theta refreshed via the closed-form solve at the end.
inline void update_regressors(GoalRegressors& regs, const LinearMixtureModel& m, int goal,
                              std::span<const LinearTransition> trajectory, const LinTables& tables) {
  const int aug = m.dim + 1;
  std::vector<double> psi(aug, 0.0);
  for (int h = 1; h <= static_cast<int>(trajectory.size()); ++h) {
    const auto& tr = trajectory[h - 1];
    const auto v_layer = tables.v_layer(h);
    augmented_psi(m, goal, v_layer, tr.state, tr.action, psi);
    regs.sigma_value.add_outer(psi);
    const double v_target = v_layer[tr.next];
    for (int i = 0; i < aug; ++i) regs.b_value[i] += psi[i] * v_target;

    const auto u_layer = tables.u_layer(h);
    augmented_psi(m, goal, u_layer, tr.state, tr.action, psi);
    regs.sigma_error.add_outer(psi);
    const double u_target = u_layer[tr.next];
    for (int i = 0; i < aug; ++i) regs.b_error[i] += psi[i] * u_target;
  }
  regs.refresh();
}

struct LinearDiagnostics {
  bool enabled = false;
  std::int64_t checks = 0;
  std::int64_t optimism_violations = 0;
  std::int64_t ellipsoid_violations = 0;
  double max_optimism_violation = 0.0;
  double max_ellipsoid_ratio = 0.0;  // ||Sigma^{1/2}(theta - theta*)|| / beta_k(exact)
};

struct LinearRunOutputs {
  RunOutputs base;
  LinearDiagnostics diagnostics;
};

/// The linear-mixture branch of the exploration loop. Control flow matches
/// the tabular branch exactly: same samplers, same stopping rule, same
/// resetting-policy output; only the estimates differ. The ellipsoid
/// diagnostic always measures against the exact theoretical radius, whatever
/// radius drives the bonuses.
inline LinearRunOutputs run_adagoal_ucrlvtr(const LinearMixtureModel& env, const MgeConfig& cfg,
                                            const GoalSampler& sampler, std::uint64_t seed,
                                            const DiagnosticsOptions& diag_opts = {}) {
  const TabularMdp& mdp = env.realized;
  if (!mdp.has_reset()) throw std::invalid_argument("run_adagoal_ucrlvtr: environment must expose a reset action");
  if (cfg.horizon < 1) throw std::invalid_argument("run_adagoal_ucrlvtr: horizon not resolved");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int H = cfg.horizon;
  const auto& goals = cfg.goal_space;
  const int G = static_cast<int>(goals.size());
  const int aug = env.dim + 1;
  const double lambda = 1.0 / ((env.norm_bound + 1.0) * (env.norm_bound + 1.0));

  RngStream env_rng(seed, 0);
  RngStream sampler_rng(seed, 1);

  std::vector<GoalRegressors> regs;
  regs.reserve(G);
  std::vector<LinTables> tables;
  tables.reserve(G);
  for (int g : goals) {
    regs.emplace_back(aug, lambda);
    tables.emplace_back(g, H, S, A);
  }

  LinearRunOutputs out;
  out.base.horizon = H;
  out.base.goal_space = goals;
  out.diagnostics.enabled = diag_opts.enabled;

  std::vector<double> truncated_optimal(G, 0.0);
  std::vector<double> theta_truth = augmented_theta_star(env);
  if (diag_opts.enabled) {
    for (int i = 0; i < G; ++i)
      truncated_optimal[i] = finite_horizon_optimal(mdp, goals[i], H).start_value(mdp.start_state);
  }

  std::vector<std::int64_t> state_visits(S, 0);
  std::vector<double> distance(G, 0.0), error(G, 0.0);
  std::vector<LinearTransition> trajectory(H);
  std::vector<double> diff(aug, 0.0);
  std::int64_t executed = 0;

  for (std::int64_t k = 1;; ++k) {
    const double beta_k = cfg.simplified_bonuses
                              ? simplified_confidence_radius(k, env.dim, env.norm_bound, H, cfg.delta)
                              : confidence_radius(k, env.dim, env.norm_bound, H, cfg.delta);
    if ((executed % cfg.table_update_period) == 0 || k == 1) {
      for (int i = 0; i < G; ++i) rebuild_lin_tables(tables[i], env, regs[i], beta_k);
    }
    for (int i = 0; i < G; ++i) {
      distance[i] = tables[i].distance_estimate(mdp.start_state);
      error[i] = tables[i].error_core(mdp.start_state) + 8.0 * cfg.eps / 9.0;
    }

    if (diag_opts.enabled) {
      const double beta_exact = confidence_radius(k, env.dim, env.norm_bound, H, cfg.delta);
      for (int i = 0; i < G; ++i) {
        ++out.diagnostics.checks;
        const double opt_violation = distance[i] - truncated_optimal[i];
        if (opt_violation > diag_opts.tolerance) {
          ++out.diagnostics.optimism_violations;
          out.diagnostics.max_optimism_violation = std::max(out.diagnostics.max_optimism_violation, opt_violation);
        }
        for (int j = 0; j < aug; ++j) diff[j] = regs[i].theta_value[j] - theta_truth[j];
        const double radius_used = std::sqrt(std::max(0.0, regs[i].sigma_value.quad_form(diff)));
        out.diagnostics.max_ellipsoid_ratio = std::max(out.diagnostics.max_ellipsoid_ratio, radius_used / beta_exact);
        if (radius_used > beta_exact) ++out.diagnostics.ellipsoid_violations;
      }
    }

    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < G; ++i) {
      if (distance[i] <= cfg.radius) worst = std::max(worst, error[i]);
    }
    if (worst <= cfg.eps) {
      out.base.kappa = k;
      out.base.stopped_by_rule = true;
      break;
    }
    if (executed >= cfg.max_episodes) {
      out.base.kappa = executed;
      out.base.stopped_by_rule = false;
      break;
    }

    SamplerInput input{goals, distance, error, state_visits, cfg.radius, mdp.start_state};
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
      ++state_visits[s];
      const int next = sample_step(mdp, s, a, env_rng);
      trajectory[h - 1] = {s, a, next};
      s = next;
    }
    ++executed;
    out.base.records.push_back({k, goal, distance[goal_idx], error[goal_idx], H + 1});

    for (int i = 0; i < G; ++i) update_regressors(regs[i], env, goals[i], trajectory, tables[i]);
  }

  out.base.episodes = executed;
  out.base.tau = static_cast<std::int64_t>(H + 1) * executed;
  out.base.final_distance = distance;
  out.base.final_error = error;
  for (int i = 0; i < G; ++i) {
    if (distance[i] <= cfg.radius) {
      out.base.candidate_goals.push_back(goals[i]);
      out.base.policies.emplace(goals[i], ResettingPolicy{tables[i].greedy_policy(), mdp.reset_action});
    }
  }
  return out;
}

inline nlohmann::json mixture_to_json(const LinearMixtureModel& m) {
  nlohmann::json basis = nlohmann::json::array();
  for (int i = 0; i < m.dim; ++i) {
    nlohmann::json per_state = nlohmann::json::array();
    for (int s = 0; s < m.num_states; ++s) {
      nlohmann::json per_action = nlohmann::json::array();
      for (int a = 0; a < m.num_actions; ++a) {
        per_action.push_back(std::vector<double>(m.basis_row(i, s, a).begin(), m.basis_row(i, s, a).end()));
      }
      per_state.push_back(std::move(per_action));
    }
    basis.push_back(std::move(per_state));
  }
  return nlohmann::json{{"d", m.dim},           {"B", m.norm_bound},      {"theta_star", m.theta_star},
                        {"basis", std::move(basis)}, {"basis_scale", m.basis_scale}, {"mdp", mdp_to_json(m.realized)}};
}

inline LinearMixtureModel mixture_from_json(const nlohmann::json& j) {
  LinearMixtureModel m;
  m.dim = j.at("d").get<int>();
  m.norm_bound = j.at("B").get<double>();
  m.theta_star = j.at("theta_star").get<std::vector<double>>();
  m.basis_scale = j.value("basis_scale", 1.0);
  m.realized = mdp_from_json(j.at("mdp"));
  m.num_states = m.realized.num_states;
  m.num_actions = m.realized.num_actions;
  if (static_cast<int>(m.theta_star.size()) != m.dim) throw std::invalid_argument("mixture_from_json: theta_star size");
  m.basis.assign(static_cast<std::size_t>(m.dim) * m.num_states * m.num_actions * m.num_states, 0.0);
  const auto& basis = j.at("basis");
  if (static_cast<int>(basis.size()) != m.dim) throw std::invalid_argument("mixture_from_json: basis size");
  for (int i = 0; i < m.dim; ++i) {
    for (int s = 0; s < m.num_states; ++s) {
      for (int a = 0; a < m.num_actions; ++a) {
        for (int n = 0; n < m.num_states; ++n) {
          m.basis[m.basis_offset(i, s, a) + n] = basis[i][s][a][n].get<double>();
        }
      }
    }
  }
  return m;
}

}  // namespace adagoal
