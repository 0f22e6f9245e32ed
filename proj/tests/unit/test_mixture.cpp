#include <doctest.h>

#include <cmath>

#include "adagoal/envs.hpp"
#include "adagoal/mixture.hpp"
#include "test_util.hpp"

using namespace adagoal;

TEST_CASE("confidence radius: frozen arithmetic and monotonicity") {
  const double direct = 4.0 * std::sqrt(2.0 * std::log(3.0 * (1.0 + 64.0 * 4.0) / 0.1)) + 1.0;
  CHECK(confidence_radius(1, 2, 1.0, 4, 0.1) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(confidence_radius(2, 2, 1.0, 4, 0.1) > confidence_radius(1, 2, 1.0, 4, 0.1));
  CHECK(confidence_radius(5, 2, 1.0, 4, 0.05) > confidence_radius(5, 2, 1.0, 4, 0.1));
  CHECK(simplified_confidence_radius(5, 2, 1.0, 4, 0.1) < confidence_radius(5, 2, 1.0, 4, 0.1));
}

TEST_CASE("augmented features: indicator structure and kernel consistency") {
  const auto env = six_state_mixture_env();
  const int S = env.num_states;
  std::vector<double> psi(env.dim + 1, 0.0);
  const auto theta_aug = augmented_theta_star(env);

  std::vector<double> ones(S, 1.0);
  augmented_psi(env, 2, ones, 2, 0, psi);  // s == goal
  CHECK(psi[0] == 0.0);
  CHECK(psi[1] == 0.0);
  CHECK(psi[2] == 1.0);  // carries value(goal)

  // s != goal with the all-ones vector: components are the basis row masses
  augmented_psi(env, 2, ones, 0, 0, psi);
  for (int i = 0; i < env.dim; ++i) {
    double mass = 0.0;
    for (double v : env.basis_row(i, 0, 0)) mass += v;
    CHECK(psi[i] == doctest::Approx(mass).epsilon(1e-14));
  }
  double dot = 0.0;
  for (int i = 0; i <= env.dim; ++i) dot += psi[i] * theta_aug[i];
  CHECK(dot == doctest::Approx(1.0).epsilon(1e-12));  // kernel normalization

  // <psi_V, theta*_g> equals the goal-absorbed expectation for arbitrary V,
  // including V(g) != 0 (the augmented coordinate carries it)
  RngStream rng(4, 0);
  std::vector<double> value(S);
  for (double& v : value) v = rng.next_double() * 3.0 - 1.0;
  for (int goal = 0; goal < S; ++goal) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < env.num_actions; ++a) {
        augmented_psi(env, goal, value, s, a, psi);
        double got = 0.0;
        for (int i = 0; i <= env.dim; ++i) got += psi[i] * theta_aug[i];
        const double expected =
            s == goal ? value[goal] : apply_transition_operator(env.realized, value, s, a);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("feature norm bound holds after the recorded rescale") {
  const auto env = six_state_mixture_env();
  CHECK(env.basis_scale == doctest::Approx(1.0 / std::sqrt(2.0)));
  std::vector<double> psi(env.dim + 1, 0.0);
  RngStream rng(6, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> value(env.num_states);
    for (double& v : value) v = rng.next_double();  // V into [0,1]
    const int goal = rng.next_below(env.num_states);
    for (int s = 0; s < env.num_states; ++s) {
      for (int a = 0; a < env.num_actions; ++a) {
        augmented_psi(env, goal, value, s, a, psi);
        double norm2 = 0.0;
        for (double v : psi) norm2 += v * v;
        worst = std::max(worst, norm2);
      }
    }
  }
  CHECK(worst <= 1.0 + 1e-12);
}

TEST_CASE("regressors: zero targets leave theta at zero") {
  const auto env = six_state_mixture_env();
  GoalRegressors regs(env.dim + 1, 0.25);
  LinTables tables(3, 4, env.num_states, env.num_actions);  // all-zero tables
  std::vector<LinearTransition> traj{{0, 0, 1}, {1, 1, 3}, {3, 0, 0}, {0, 1, 2}};
  update_regressors(regs, env, 3, traj, tables);
  for (double t : regs.theta_value) CHECK(t == 0.0);
  for (double t : regs.theta_error) CHECK(t == 0.0);
}

TEST_CASE("regressors: sequential rank-one updates match a from-scratch solve") {
  const auto env = six_state_mixture_env();
  const int aug = env.dim + 1;
  const double lambda = 1.0 / ((env.norm_bound + 1.0) * (env.norm_bound + 1.0));
  GoalRegressors regs(aug, lambda);

  // synthetic episodes with varying value tables
  RngStream rng(9, 0);
  std::vector<std::vector<double>> contexts;
  std::vector<double> targets;
  for (int episode = 0; episode < 5; ++episode) {
    LinTables tables(1, 6, env.num_states, env.num_actions);
    for (double& v : tables.v) v = rng.next_double() * 4.0;
    for (double& v : tables.u) v = rng.next_double() * 4.0;
    std::vector<LinearTransition> traj;
    int s = 0;
    for (int h = 1; h <= 6; ++h) {
      const int a = rng.next_below(env.num_actions);
      const int next = rng.next_below(env.num_states);
      traj.push_back({s, a, next});
      std::vector<double> psi(aug, 0.0);
      augmented_psi(env, 1, tables.v_layer(h), s, a, psi);
      contexts.push_back(psi);
      targets.push_back(tables.v_layer(h)[next]);
      s = next;
    }
    update_regressors(regs, env, 1, traj, tables);
  }

  // independent normal-equation solve via Gaussian elimination
  std::vector<double> a_mat(static_cast<std::size_t>(aug) * aug, 0.0);
  std::vector<double> b(aug, 0.0);
  for (int i = 0; i < aug; ++i) a_mat[static_cast<std::size_t>(i) * aug + i] = lambda;
  for (std::size_t r = 0; r < contexts.size(); ++r) {
    for (int i = 0; i < aug; ++i) {
      b[i] += contexts[r][i] * targets[r];
      for (int j = 0; j < aug; ++j) a_mat[static_cast<std::size_t>(i) * aug + j] += contexts[r][i] * contexts[r][j];
    }
  }
  const auto direct = solve_dense(a_mat, b);
  REQUIRE(direct.has_value());
  for (int i = 0; i < aug; ++i)
    CHECK(regs.theta_value[i] == doctest::Approx((*direct)[i]).epsilon(1e-8));
}

TEST_CASE("regressors: deterministic mixture drives the residuals to zero") {
  // with a deterministic realized kernel the targets are exact linear
  // functions of the contexts, so after enough diverse transitions the ridge
  // bias is all that remains
  const auto k1 = cycle_shift_kernel(6, {1, 2});
  const auto k2 = cycle_shift_kernel(6, {4, 3});
  const auto env = build_mixture_env({k1, k2}, {1.0, 0.0});  // realized kernel = k1, deterministic
  const int aug = env.dim + 1;
  GoalRegressors regs(aug, 1.0 / ((env.norm_bound + 1.0) * (env.norm_bound + 1.0)));

  RngStream rng(41, 0);
  LinTables tables(2, 6, env.num_states, env.num_actions);
  std::vector<std::vector<double>> contexts;
  std::vector<double> targets;
  for (int episode = 0; episode < 400; ++episode) {
    for (double& v : tables.v) v = rng.next_double() * 3.0;
    for (double& v : tables.u) v = rng.next_double() * 3.0;
    // the algorithm's tables always carry V(g) = U(g) = 0, which is what
    // keeps goal-row contexts consistent with the absorbed kernel
    for (int h = 1; h <= 7; ++h) {
      tables.v[tables.layer(h, 2)] = 0.0;
      tables.u[tables.layer(h, 2)] = 0.0;
    }
    std::vector<LinearTransition> traj;
    int s = rng.next_below(6);
    for (int h = 1; h <= 6; ++h) {
      const int a = rng.next_below(env.num_actions);
      const int next = sample_step(env.realized, s, a, rng);
      traj.push_back({s, a, next});
      std::vector<double> psi(aug, 0.0);
      augmented_psi(env, 2, tables.v_layer(h), s, a, psi);
      contexts.push_back(psi);
      targets.push_back(tables.v_layer(h)[next]);
      s = next;
    }
    update_regressors(regs, env, 2, traj, tables);
  }
  double worst = 0.0;
  for (std::size_t r = 0; r < contexts.size(); ++r) {
    double fit = 0.0, norm2 = 0.0;
    for (int i = 0; i < aug; ++i) {
      fit += contexts[r][i] * regs.theta_value[i];
      norm2 += contexts[r][i] * contexts[r][i];
    }
    if (norm2 == 0.0) continue;  // goal-row contexts are identically zero
    worst = std::max(worst, std::fabs(fit - targets[r]));
  }
  CHECK(worst <= 1e-3);  // residual is the vanishing lambda bias
}

TEST_CASE("initial linear tables follow the closed form at theta = 0") {
  const auto env = six_state_mixture_env();
  const int aug = env.dim + 1;
  const double lambda = 1.0 / ((env.norm_bound + 1.0) * (env.norm_bound + 1.0));
  GoalRegressors regs(aug, lambda);
  const int horizon = 5;
  LinTables tables(2, horizon, env.num_states, env.num_actions);
  const double beta1 = confidence_radius(1, env.dim, env.norm_bound, horizon, 0.1);
  rebuild_lin_tables(tables, env, regs, beta1);

  // layer H: psi aggregates the zero layer H+1, so Q = 1[s != g] exactly
  for (int s = 0; s < env.num_states; ++s) {
    for (int a = 0; a < env.num_actions; ++a) {
      CHECK(tables.q_at(horizon, s, a) == doctest::Approx(s == 2 ? 0.0 : 1.0));
    }
  }
  // deeper layers stay clipped to [0, H] and keep the goal at zero
  for (int h = 1; h <= horizon; ++h) {
    CHECK(tables.v_at(h, 2) == 0.0);
    CHECK(tables.u_at(h, 2) == 0.0);
    for (int s = 0; s < env.num_states; ++s) {
      CHECK(tables.v_at(h, s) >= 0.0);
      CHECK(tables.v_at(h, s) <= horizon);
    }
  }
  // spot-check one cell against the closed form at theta = 0
  std::vector<double> psi(aug, 0.0);
  augmented_psi(env, 2, tables.v_layer(2), 0, 1, psi);
  double norm2 = 0.0;
  for (double v : psi) norm2 += v * v;
  const double expected = std::clamp(1.0 - beta1 * std::sqrt(norm2 / lambda), 0.0, static_cast<double>(horizon));
  CHECK(tables.q_at(1, 0, 1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("linear run: singleton goal space stops immediately") {
  const auto env = six_state_mixture_env();
  MgeConfig cfg;
  cfg.radius = 6.0;
  cfg.eps = 0.5;
  cfg.delta = 0.1;
  cfg.horizon = 12;
  cfg.goal_space = {0};
  cfg.max_episodes = 50;
  const auto out = run_adagoal_ucrlvtr(env, cfg, GoalSampler::parse("adagoal"), 3);
  CHECK(out.base.stopped_by_rule);
  CHECK(out.base.kappa == 1);
  CHECK(out.base.tau == 0);
}

TEST_CASE("linear run: exact radius keeps the ellipsoid and optimism clean on a short run") {
  const auto env = six_state_mixture_env();
  MgeConfig cfg;
  cfg.radius = 8.0;
  cfg.eps = 0.5;
  cfg.delta = 0.1;
  cfg.horizon = 12;
  cfg.goal_space = {0, 1, 2, 3, 4, 5};
  cfg.max_episodes = 150;
  cfg.simplified_bonuses = false;
  DiagnosticsOptions diag;
  diag.enabled = true;
  const auto out = run_adagoal_ucrlvtr(env, cfg, GoalSampler::parse("adagoal"), 17, diag);
  CHECK(out.diagnostics.ellipsoid_violations == 0);
  CHECK(out.diagnostics.optimism_violations == 0);
  CHECK(out.diagnostics.max_ellipsoid_ratio < 1.0);
}

TEST_CASE("covariances never lose the ridge floor") {
  const auto env = six_state_mixture_env();
  const int aug = env.dim + 1;
  const double lambda = 1.0 / ((env.norm_bound + 1.0) * (env.norm_bound + 1.0));
  GoalRegressors regs(aug, lambda);
  RngStream rng(55, 0);
  LinTables tables(4, 6, env.num_states, env.num_actions);
  for (int episode = 0; episode < 50; ++episode) {
    for (double& v : tables.v) v = rng.next_double() * 5.0;
    for (double& v : tables.u) v = rng.next_double() * 5.0;
    for (int h = 1; h <= 7; ++h) tables.v[tables.layer(h, 4)] = tables.u[tables.layer(h, 4)] = 0.0;
    std::vector<LinearTransition> traj;
    int s = 0;
    for (int h = 1; h <= 6; ++h) {
      const int a = rng.next_below(env.num_actions);
      const int next = sample_step(env.realized, s, a, rng);
      traj.push_back({s, a, next});
      s = next;
    }
    update_regressors(regs, env, 4, traj, tables);

    // rank-one updates only raise the spectrum: quad forms stay above the
    // ridge floor in every direction
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> v(aug);
      double norm2 = 0.0;
      for (double& x : v) {
        x = rng.next_double() * 2.0 - 1.0;
        norm2 += x * x;
      }
      CHECK(regs.sigma_value.quad_form(v) >= (lambda - 1e-10) * norm2);
      CHECK(regs.sigma_error.quad_form(v) >= (lambda - 1e-10) * norm2);
    }
    CHECK(Cholesky(regs.sigma_value).ok());
    CHECK(Cholesky(regs.sigma_error).ok());
  }
}

TEST_CASE("mixture json round trip") {
  const auto env = six_state_mixture_env();
  const auto j = mixture_to_json(env);
  const auto back = mixture_from_json(j);
  CHECK(back.dim == env.dim);
  CHECK(back.theta_star == env.theta_star);
  CHECK(back.basis == env.basis);
  CHECK(back.realized.p == env.realized.p);
}
