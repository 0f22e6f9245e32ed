// Acceptance suite: one checker per numbered criterion, each printing a
// single PASS/FAIL line. Run with no arguments for the full gauntlet or with
// criterion numbers to run a subset (the ctest harness runs them one by one).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adagoal/envs.hpp"
#include "adagoal/harness.hpp"
#include "adagoal/mixture.hpp"
#include "adagoal/oracle.hpp"
#include "adagoal/tabular.hpp"
#include "../unit/test_util.hpp"

using namespace adagoal;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// 1. finite_horizon_optimal vs exhaustive non-stationary-policy enumeration
//    on >= 50 random instances with S <= 4, A <= 3, H <= 4, error <= 1e-12.
Outcome criterion_1() {
  RngStream rng(101, 0);
  double worst = 0.0;
  int instances = 0;
  // sweep the whole shape grid, several random instances per shape; the
  // largest shape (4,3,4) enumerates 3^16 policies
  for (int s_dim = 2; s_dim <= 4; ++s_dim) {
    for (int a_dim = 2; a_dim <= 3; ++a_dim) {
      for (int horizon = 1; horizon <= 4; ++horizon) {
        const double policies = std::pow(a_dim, s_dim * horizon);
        const int repeats = policies > 5e6 ? 1 : 3;
        for (int rep = 0; rep < repeats; ++rep) {
          const auto mdp = testutil::random_mdp(s_dim, a_dim, rng);
          const int goal = rng.next_below(s_dim);
          const auto fast = finite_horizon_optimal(mdp, goal, horizon);
          const auto brute = testutil::brute_force_truncated_optimal(mdp, goal, horizon);
          for (int s = 0; s < s_dim; ++s) worst = std::max(worst, std::fabs(fast.at(1, s) - brute[s]));
          ++instances;
        }
      }
    }
  }
  std::ostringstream ss;
  ss << instances << " instances, max abs error " << worst;
  return {instances >= 50 && worst <= 1e-12, ss.str()};
}

// ---------------------------------------------------------------------------
// 2. Self-loop identity: goal-absorbed operator equals the base operator for
//    every (s,a) and 100 random (MDP, goal, Y with Y(goal)=0) draws, exactly.
Outcome criterion_2() {
  RngStream rng(202, 0);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int s_dim = 2 + rng.next_below(5);  // up to 6 states
    const auto mdp = testutil::random_mdp(s_dim, 2 + rng.next_below(2), rng);
    const int goal = rng.next_below(s_dim);
    const GoalAbsorbedView view(mdp, goal);
    std::vector<double> y(s_dim);
    for (double& v : y) v = rng.next_double() * 4.0 - 2.0;
    y[goal] = 0.0;
    for (int s = 0; s < s_dim; ++s) {
      for (int a = 0; a < mdp.num_actions; ++a) {
        const double via_view = view.apply(y, s, a);
        const double via_base = s == goal ? 0.0 : apply_transition_operator(mdp, y, s, a);
        if (via_view != via_base) ++mismatches;
      }
    }
  }
  return {mismatches == 0, "100 draws, " + std::to_string(mismatches) + " exact mismatches"};
}

// ---------------------------------------------------------------------------
// 3. Resetting-policy evaluator vs 1e5 Monte-Carlo rollouts (capped at 1e4
//    steps) on 10 random triples with finite value: within 3 standard errors.
Outcome criterion_3() {
  RngStream rng(303, 0);
  RngStream mc_rng(304, 0);
  int agreeing = 0;
  double worst_sigma = 0.0;
  int produced = 0;
  while (produced < 10) {
    const int s_dim = 3 + rng.next_below(3);
    const auto mdp = testutil::random_mdp(s_dim, 3, rng);
    const int goal = rng.next_below(s_dim);
    const int horizon = 4 + rng.next_below(4);
    NonStationaryPolicy pi(horizon, s_dim);
    for (auto& a : pi.actions) a = rng.next_below(3);
    const ResettingPolicy rp{pi, mdp.reset_action};
    const auto exact = evaluate_resetting_policy(mdp, goal, rp);
    if (!exact.bounded || exact.value > 100.0) continue;  // keep MC tractable
    ++produced;
    const auto mc = testutil::mc_resetting_value(mdp, goal, rp, 100000, 10000, mc_rng);
    if (mc.capped) continue;
    const double sigmas = mc.std_error > 0.0 ? std::fabs(mc.mean - exact.value) / mc.std_error
                                             : (mc.mean == exact.value ? 0.0 : 1e9);
    worst_sigma = std::max(worst_sigma, sigmas);
    if (sigmas <= 3.0) ++agreeing;
  }
  std::ostringstream ss;
  ss << agreeing << "/10 triples within 3 SE, worst deviation " << worst_sigma << " SE";
  return {agreeing == 10, ss.str()};
}

// ---------------------------------------------------------------------------
// Shared runner for criteria 4 and 5: the deterministic 5x5 suite.
struct PacSuiteResult {
  int rule_stops = 0;
  int verified = 0;
  int clean_optimism = 0;
  int clean_gap = 0;
  int clean_sufficiency = 0;
  int seeds = 0;
};

PacSuiteResult run_pac_suite_tabular(bool diagnostics) {
  const auto world = build_grid_world(deterministic_grid_spec(5, 5));
  MgeConfig cfg;
  cfg.radius = 10.0;
  cfg.eps = 0.5;
  cfg.delta = 0.1;
  cfg.horizon = 20;  // override; the derived rule yields 475 (recorded deviation)
  cfg.goal_space.resize(world.mdp.num_states);
  for (int s = 0; s < world.mdp.num_states; ++s) cfg.goal_space[s] = s;
  cfg.max_episodes = 30000;
  cfg.simplified_bonuses = true;
  DiagnosticsOptions diag;
  diag.enabled = diagnostics;

  PacSuiteResult result;
  result.seeds = 20;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto out = run_adagoal_ucbvi(world.mdp, cfg, GoalSampler::parse("adagoal"), seed, diag);
    if (!out.stopped_by_rule) continue;
    ++result.rule_stops;
    const auto verdict =
        verify_pac(world.mdp, cfg.goal_space, cfg.radius, cfg.eps, out.candidate_goals, out.policies);
    if (verdict.overall()) ++result.verified;
    if (diagnostics) {
      if (out.diagnostics.optimism_violations == 0) ++result.clean_optimism;
      if (out.diagnostics.gap_violations == 0) ++result.clean_gap;
      if (out.diagnostics.sufficiency_violations == 0) ++result.clean_sufficiency;
    }
  }
  return result;
}

// 4. PAC end-to-end (tabular): rule stops and oracle verification on >= 18/20.
Outcome criterion_4() {
  const auto r = run_pac_suite_tabular(false);
  std::ostringstream ss;
  ss << r.rule_stops << "/20 rule stops, " << r.verified << "/20 oracle-verified";
  return {r.rule_stops >= 18 && r.verified >= 18, ss.str()};
}

// 5. Optimism and gap bounds at every (episode, goal) on >= 18/20 seeds,
//    checked from the per-episode logged estimates of the criterion-4 runs.
Outcome criterion_5() {
  const auto r = run_pac_suite_tabular(true);
  std::ostringstream ss;
  ss << r.clean_optimism << "/20 optimism-clean, " << r.clean_gap << "/20 gap-bound-clean";
  return {r.clean_optimism >= 18 && r.clean_gap >= 18, ss.str()};
}

// ---------------------------------------------------------------------------
// 6. Two-room qualitative reproduction: final-third selection share of the
//    four rarely-reachable room states, pooled over 5 seeds per sampler.
Outcome criterion_6() {
  const auto spec = two_room_default_spec(0.001, 0.1);
  const auto world = build_grid_world(spec);
  std::set<int> rare_states;
  for (const Cell& c : spec.rare_cells) rare_states.insert(world.state_of(c));

  MgeConfig cfg;
  cfg.radius = 40.0;
  cfg.eps = 1.0;
  cfg.delta = 0.1;
  cfg.horizon = 50;  // the published experimental override
  cfg.goal_space.resize(world.mdp.num_states);
  for (int s = 0; s < world.mdp.num_states; ++s) cfg.goal_space[s] = s;
  cfg.max_episodes = 1000;
  cfg.simplified_bonuses = true;

  auto final_third_share = [&](const GoalSampler& sampler) {
    std::int64_t rare = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto out = run_adagoal_ucbvi(world.mdp, cfg, sampler, seed);
      const std::int64_t start = (out.episodes * 2) / 3;  // final third of executed episodes
      for (std::int64_t e = start; e < out.episodes; ++e) {
        ++total;
        if (rare_states.count(out.records[static_cast<std::size_t>(e)].goal)) ++rare;
      }
    }
    return std::pair<std::int64_t, std::int64_t>{rare, total};
  };

  const auto [ada_rare, ada_total] = final_third_share(GoalSampler::parse("adagoal"));
  const auto [uni_rare, uni_total] = final_third_share(GoalSampler::parse("unigoal"));
  const auto [rar_rare, rar_total] = final_third_share(GoalSampler::parse("raregoal:0.1"));
  const double ada = static_cast<double>(ada_rare) / ada_total;
  const double uni = static_cast<double>(uni_rare) / uni_total;
  const double rar = static_cast<double>(rar_rare) / rar_total;
  const double uni_target = 4.0 / 51.0;

  std::ostringstream ss;
  ss << "room-2 share: adagoal " << ada << " (<0.02), raregoal " << rar << " (>0.10), unigoal " << uni
     << " (in " << uni_target - 0.02 << ".." << uni_target + 0.02 << ")";
  const bool pass = ada < 0.02 && rar > 0.10 && std::fabs(uni - uni_target) <= 0.02;
  return {pass, ss.str()};
}

// ---------------------------------------------------------------------------
// 7. Hard-MDP closed forms against the oracle, to 1e-9.
Outcome criterion_7() {
  double worst = 0.0;
  // even radii: there 2(H+1) = L exactly and the optimal start value sits
  // inside the radius for every accuracy level
  for (const auto& [radius, eps] : std::vector<std::pair<double, double>>{{10.0, 0.5}, {20.0, 1.0}, {14.0, 0.25}, {8.0, 0.3}}) {
    BpiSspHardSpec spec;
    spec.radius = radius;
    spec.eps = eps;
    const auto mdp = build_bpi_ssp_hard(spec);
    const auto ssp = ssp_optimal(mdp, kBpiHardGoal);
    worst = std::max(worst, std::fabs(ssp.values[kBpiHardStart] - bpi_ssp_hard_optimal_value(spec)));
    if (ssp.values[kBpiHardStart] > radius + 1e-9) worst = std::max(worst, 1.0);
  }

  HardResetFreeSpec hspec;
  hspec.eta = 1e-3;
  hspec.zeta = 0.5;
  hspec.include_reset = false;  // the separation instance the identities describe
  const auto reset_free = build_hard_reset_free(hspec);
  const auto ssp = ssp_optimal(reset_free, kHardResetFreeGoal);
  worst = std::max(worst, std::fabs(ssp.values[kHardResetFreeX] - 1.0 / hspec.zeta));
  worst = std::max(worst, std::fabs(ssp.values[kHardResetFreeSlow] - 2.0 / hspec.eta));

  std::ostringstream ss;
  ss << "max closed-form deviation " << worst;
  return {worst <= 1e-9, ss.str()};
}

// ---------------------------------------------------------------------------
// 8. Reset-free separation Monte Carlo: fraction of 1e4 random walks visiting
//    the fork state within floor(1/(9 eta)) steps is at most 0.55.
Outcome criterion_8() {
  HardResetFreeSpec spec;
  spec.eta = 1e-3;
  spec.zeta = 0.5;
  spec.include_reset = false;
  const auto mdp = build_hard_reset_free(spec);
  const std::int64_t budget = static_cast<std::int64_t>(1.0 / (9.0 * spec.eta));
  RngStream rng(808, 0);
  int visited = 0;
  for (int run = 0; run < 10000; ++run) {
    int s = mdp.start_state;
    for (std::int64_t t = 0; t < budget; ++t) {
      s = sample_step(mdp, s, rng.next_below(mdp.num_actions), rng);
      if (s == kHardResetFreeFork) {
        ++visited;
        break;
      }
    }
  }
  const double fraction = visited / 10000.0;
  std::ostringstream ss;
  ss << "fork visited within " << budget << " steps on fraction " << fraction << " of walks";
  return {fraction <= 0.55, ss.str()};
}

// ---------------------------------------------------------------------------
// 9. PAC end-to-end (linear): rule stops, oracle verification and exact-radius
//    ellipsoid containment throughout, on >= 18/20 seeds.
Outcome criterion_9() {
  const auto env = six_state_mixture_env();
  MgeConfig cfg;
  cfg.radius = 8.0;
  cfg.eps = 0.5;
  cfg.delta = 0.1;
  cfg.horizon = 20;  // override (recorded deviation), derived rule yields 383
  cfg.goal_space = {0, 1, 2, 3, 4, 5};
  cfg.max_episodes = 400000;
  cfg.simplified_bonuses = true;
  DiagnosticsOptions diag;
  diag.enabled = true;

  int rule_stops = 0, verified = 0, contained = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto out = run_adagoal_ucrlvtr(env, cfg, GoalSampler::parse("adagoal"), seed, diag);
    if (!out.base.stopped_by_rule) continue;
    ++rule_stops;
    const auto verdict = verify_pac(env.realized, cfg.goal_space, cfg.radius, cfg.eps,
                                    out.base.candidate_goals, out.base.policies);
    if (verdict.overall()) ++verified;
    if (out.diagnostics.ellipsoid_violations == 0) ++contained;
  }
  std::ostringstream ss;
  ss << rule_stops << "/20 rule stops, " << verified << "/20 verified, " << contained
     << "/20 ellipsoid-contained";
  return {rule_stops >= 18 && verified >= 18 && contained >= 18, ss.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism: repeated runs of the same config and seed produce
//     byte-identical summary and frequency files.
Outcome criterion_10() {
  const auto base = std::filesystem::temp_directory_path() / "adagoal-acceptance" / "determinism";
  std::filesystem::remove_all(base);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const std::vector<nlohmann::json> configs{
      {{"env", {{"kind", "two-room-default"}}},
       {"algorithm", "adagoal-ucbvi"},
       {"sampler", "raregoal:0.1"},
       {"L", 40.0},
       {"epsilon", 1.0},
       {"delta", 0.1},
       {"horizon_override", 50},
       {"simplified_bonuses", true},
       {"max_episodes", 120},
       {"seeds", {5}},
       {"output_dir", ""}},
      {{"env", {{"kind", "grid"}, {"width", 5}, {"height", 5}}},
       {"algorithm", "adagoal-ucbvi"},
       {"sampler", "adagoal"},
       {"L", 10.0},
       {"epsilon", 0.5},
       {"delta", 0.1},
       {"horizon_override", 20},
       {"simplified_bonuses", true},
       {"max_episodes", 30000},
       {"seeds", {3}},
       {"output_dir", ""},
       {"verify", true}},
      {{"env", {{"kind", "mixture"}, {"preset", "six-state"}}},
       {"algorithm", "adagoal-ucrlvtr"},
       {"sampler", "unigoal"},
       {"L", 8.0},
       {"epsilon", 0.5},
       {"delta", 0.1},
       {"horizon_override", 20},
       {"simplified_bonuses", true},
       {"max_episodes", 500},
       {"seeds", {11}},
       {"output_dir", ""}}};

  int identical = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto spec = configs[i];
    spec["output_dir"] = (base / ("cfg" + std::to_string(i)) / "first").string();
    auto first = run_experiment(run_config_from_json(spec));
    spec["output_dir"] = (base / ("cfg" + std::to_string(i)) / "second").string();
    auto second = run_experiment(run_config_from_json(spec));
    const auto& a = first.seeds.front().dir;
    const auto& b = second.seeds.front().dir;
    const bool same = slurp(a / "summary.json") == slurp(b / "summary.json") &&
                      slurp(a / "frequencies.csv") == slurp(b / "frequencies.csv") &&
                      slurp(a / "policies.json") == slurp(b / "policies.json");
    if (same) ++identical;
  }
  std::ostringstream ss;
  ss << identical << "/" << configs.size() << " configs byte-identical across reruns";
  return {identical == static_cast<int>(configs.size()), ss.str()};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {1, {"oracle exactness vs exhaustive policy enumeration", criterion_1}},
    {2, {"self-loop transition identity", criterion_2}},
    {3, {"resetting-policy evaluator vs Monte Carlo", criterion_3}},
    {4, {"tabular PAC end-to-end on the deterministic 5x5 grid", criterion_4}},
    {5, {"optimism and gap bounds on the tabular suite", criterion_5}},
    {6, {"two-room goal-frequency pattern across samplers", criterion_6}},
    {7, {"hard-MDP closed-form identities", criterion_7}},
    {8, {"reset-free separation Monte Carlo", criterion_8}},
    {9, {"linear PAC end-to-end with ellipsoid containment", criterion_9}},
    {10, {"byte-identical reruns per seed", criterion_10}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [number, _] : kCriteria) selected.push_back(number);
  }

  bool all_pass = true;
  for (int number : selected) {
    const auto it = kCriteria.find(number);
    if (it == kCriteria.end()) {
      std::printf("[FAIL] criterion %d: unknown criterion\n", number);
      all_pass = false;
      continue;
    }
    const auto outcome = it->second.second();
    std::printf("[%s] criterion %d: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", number,
                it->second.first.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
