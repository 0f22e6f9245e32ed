#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adagoal/envs.hpp"
#include "adagoal/mixture.hpp"
#include "adagoal/oracle.hpp"
#include "adagoal/samplers.hpp"
#include "adagoal/tabular.hpp"

namespace adagoal {

/// A fully described batch run: environment spec (inline object or file
/// reference), algorithm and sampler names, exploration parameters, seed list
/// and output location. Validated before any run starts.
struct RunConfig {
  nlohmann::json env_spec;
  std::string algorithm = "adagoal-ucbvi";  // or "adagoal-ucrlvtr"
  std::string sampler = "adagoal";
  double radius = 1.0;  // L
  double eps = 0.5;
  double delta = 0.1;
  std::optional<int> horizon_override;
  bool simplified_bonuses = false;
  std::int64_t max_episodes = 100000;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  std::optional<std::vector<int>> goal_space;
  int bucket_count = 3;
  int table_update_period = 1;
  bool verify = false;
  bool diagnostics = false;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "env",          "algorithm",  "sampler",      "L",
      "epsilon",      "delta",      "horizon_override",
      "simplified_bonuses",         "max_episodes", "seeds",
      "output_dir",   "goal_space", "bucket_count",
      "table_update_period",        "verify",       "diagnostics"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("run config: unknown field '" + key + "'");
  }
  RunConfig cfg;
  cfg.env_spec = j.at("env");
  cfg.algorithm = j.at("algorithm").get<std::string>();
  if (cfg.algorithm != "adagoal-ucbvi" && cfg.algorithm != "adagoal-ucrlvtr")
    throw std::invalid_argument("run config: unknown algorithm '" + cfg.algorithm + "'");
  cfg.sampler = j.value("sampler", std::string("adagoal"));
  GoalSampler::parse(cfg.sampler);  // validates
  cfg.radius = j.at("L").get<double>();
  cfg.eps = j.at("epsilon").get<double>();
  cfg.delta = j.at("delta").get<double>();
  if (!(cfg.radius >= 1.0)) throw std::invalid_argument("run config: L must be >= 1");
  if (!(cfg.eps > 0.0 && cfg.eps <= 1.0)) throw std::invalid_argument("run config: epsilon must be in (0,1]");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw std::invalid_argument("run config: delta must be in (0,1)");
  if (j.contains("horizon_override")) cfg.horizon_override = j.at("horizon_override").get<int>();
  cfg.simplified_bonuses = j.value("simplified_bonuses", false);
  cfg.max_episodes = j.value("max_episodes", static_cast<std::int64_t>(100000));
  if (cfg.max_episodes < 0) throw std::invalid_argument("run config: max_episodes must be >= 0");
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (cfg.seeds.empty()) throw std::invalid_argument("run config: at least one seed required");
  cfg.output_dir = j.value("output_dir", std::string("runs"));
  if (j.contains("goal_space")) cfg.goal_space = j.at("goal_space").get<std::vector<int>>();
  cfg.bucket_count = j.value("bucket_count", 3);
  if (cfg.bucket_count < 1) throw std::invalid_argument("run config: bucket_count must be >= 1");
  cfg.table_update_period = j.value("table_update_period", 1);
  if (cfg.table_update_period < 1) throw std::invalid_argument("run config: table_update_period must be >= 1");
  cfg.verify = j.value("verify", false);
  cfg.diagnostics = j.value("diagnostics", false);
  return cfg;
}

/// Environment resolved from its spec: always a tabular kernel, plus the
/// mixture structure when the spec describes one. canonical is the fully
/// expanded spec used for hashing and persisted next to every run.
struct ResolvedEnv {
  TabularMdp mdp;
  std::optional<LinearMixtureModel> mixture;
  nlohmann::json canonical;
};

inline ResolvedEnv resolve_env(const nlohmann::json& spec) {
  ResolvedEnv env;
  nlohmann::json body = spec;
  if (body.is_object() && body.value("kind", std::string()) == "file") {
    std::ifstream in(body.at("path").get<std::string>());
    if (!in) throw std::runtime_error("resolve_env: cannot open " + body.at("path").get<std::string>());
    in >> body;
  }
  if (!body.is_object()) throw std::invalid_argument("resolve_env: spec must be an object");

  if (body.contains("P")) {  // bare tabular MDP json
    env.mdp = mdp_from_json(body);
    env.canonical = mdp_to_json(env.mdp);
    return env;
  }
  if (body.contains("basis")) {  // bare mixture json
    env.mixture = mixture_from_json(body);
    env.mdp = env.mixture->realized;
    env.canonical = mixture_to_json(*env.mixture);
    return env;
  }

  const std::string kind = body.value("kind", std::string());
  if (kind == "grid") {
    GridWorldSpec gspec;
    gspec.width = body.value("width", 5);
    gspec.height = body.value("height", 5);
    gspec.failure_prob = body.value("failure_prob", 0.0);
    gspec.rare_prob = body.value("rare_prob", 0.0);
    if (body.contains("walls")) {
      for (const auto& w : body.at("walls")) gspec.walls.insert(Cell{w.at(0).get<int>(), w.at(1).get<int>()});
    }
    if (body.contains("rare_cells")) {
      for (const auto& w : body.at("rare_cells")) gspec.rare_cells.push_back(Cell{w.at(0).get<int>(), w.at(1).get<int>()});
    }
    if (body.contains("start")) gspec.start = Cell{body.at("start").at(0).get<int>(), body.at("start").at(1).get<int>()};
    env.mdp = build_grid_world(gspec).mdp;
    env.canonical = mdp_to_json(env.mdp);
    return env;
  }
  if (kind == "two-room-default") {
    const double eta = body.value("eta", 0.001);
    const double pf = body.value("failure_prob", 0.1);
    env.mdp = build_grid_world(two_room_default_spec(eta, pf)).mdp;
    env.canonical = mdp_to_json(env.mdp);
    return env;
  }
  if (kind == "reset-free") {
    HardResetFreeSpec hspec;
    hspec.eta = body.value("eta", 1e-3);
    hspec.zeta = body.value("zeta", 0.5);
    hspec.favorable_action = body.value("favorable_action", 0);
    hspec.num_base_actions = body.value("num_base_actions", 4);
    hspec.include_reset = body.value("include_reset", true);
    env.mdp = build_hard_reset_free(hspec);
    env.canonical = mdp_to_json(env.mdp);
    return env;
  }
  if (kind == "bpi-ssp") {
    BpiSspHardSpec bspec;
    bspec.radius = body.value("L", 10.0);
    bspec.eps = body.value("eps", 0.5);
    bspec.optimal_action = body.value("optimal_action", 0);
    bspec.num_base_actions = body.value("num_base_actions", 3);
    env.mdp = build_bpi_ssp_hard(bspec);
    env.canonical = mdp_to_json(env.mdp);
    return env;
  }
  if (kind == "mixture") {
    if (body.value("preset", std::string()) == "six-state") {
      env.mixture = six_state_mixture_env();
    } else {
      const int S = body.at("num_states").get<int>();
      const auto weights = body.at("weights").get<std::vector<double>>();
      const auto shifts = body.at("shifts").get<std::vector<std::vector<int>>>();
      if (shifts.size() != weights.size()) throw std::invalid_argument("mixture spec: one shift row per weight");
      std::vector<TabularMdp> kernels;
      for (const auto& row : shifts) kernels.push_back(cycle_shift_kernel(S, row));
      env.mixture = build_mixture_env(kernels, weights);
    }
    env.mdp = env.mixture->realized;
    env.canonical = mixture_to_json(*env.mixture);
    return env;
  }
  throw std::invalid_argument("resolve_env: unknown env kind '" + kind + "'");
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

/// Hash over the semantically meaningful fields only; seeds, output paths and
/// the verify/diagnostics switches do not change it.
inline std::string config_hash(const RunConfig& cfg, const ResolvedEnv& env, const std::vector<int>& goal_space) {
  nlohmann::json semantic{{"algorithm", cfg.algorithm},
                          {"sampler", cfg.sampler},
                          {"env", env.canonical},
                          {"L", cfg.radius},
                          {"epsilon", cfg.eps},
                          {"delta", cfg.delta},
                          {"simplified_bonuses", cfg.simplified_bonuses},
                          {"max_episodes", cfg.max_episodes},
                          {"goal_space", goal_space},
                          {"bucket_count", cfg.bucket_count},
                          {"table_update_period", cfg.table_update_period}};
  semantic["horizon_override"] = cfg.horizon_override ? nlohmann::json(*cfg.horizon_override) : nlohmann::json();
  return hex64(fnv1a64(semantic.dump()));
}

/// Selection counts per goal per episode bucket. Bucket size is derived from
/// the episode cap so that a config's bucket boundaries do not depend on
/// where a particular seed stopped; the last bucket may be ragged.
struct GoalFrequencyLog {
  std::vector<int> goal_space;
  std::int64_t bucket_size = 1;
  std::vector<std::vector<std::int64_t>> counts;  // [goal][bucket]

  int buckets() const { return counts.empty() ? 0 : static_cast<int>(counts.front().size()); }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& row : counts) {
      for (auto c : row) t += c;
    }
    return t;
  }
};

inline GoalFrequencyLog build_frequency_log(const RunOutputs& outputs, std::int64_t max_episodes, int bucket_count) {
  GoalFrequencyLog log;
  log.goal_space = outputs.goal_space;
  log.bucket_size = std::max<std::int64_t>(1, (max_episodes + bucket_count - 1) / bucket_count);
  const int buckets =
      std::max<int>(1, static_cast<int>((outputs.episodes + log.bucket_size - 1) / log.bucket_size));
  log.counts.assign(outputs.goal_space.size(), std::vector<std::int64_t>(buckets, 0));
  std::map<int, int> goal_pos;
  for (int i = 0; i < static_cast<int>(outputs.goal_space.size()); ++i) goal_pos[outputs.goal_space[i]] = i;
  std::int64_t episode = 0;
  for (const auto& rec : outputs.records) {
    const int bucket = static_cast<int>(episode / log.bucket_size);
    ++log.counts[goal_pos.at(rec.goal)][std::min(bucket, buckets - 1)];
    ++episode;
  }
  return log;
}

inline void write_frequency_csv(const GoalFrequencyLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "goal_state";
  for (int b = 0; b < log.buckets(); ++b) out << ",bucket_" << b;
  out << "\n";
  for (std::size_t i = 0; i < log.goal_space.size(); ++i) {
    out << log.goal_space[i];
    for (std::int64_t c : log.counts[i]) out << "," << c;
    out << "\n";
  }
}

inline nlohmann::json policies_to_json(const RunOutputs& outputs) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [goal, rp] : outputs.policies) {
    nlohmann::json actions = nlohmann::json::array();
    for (int h = 1; h <= rp.inner.horizon; ++h) {
      std::vector<int> layer(rp.inner.num_states);
      for (int s = 0; s < rp.inner.num_states; ++s) layer[s] = rp.inner.at(h, s);
      actions.push_back(layer);
    }
    list.push_back(nlohmann::json{{"goal", goal}, {"actions", std::move(actions)}});
  }
  nlohmann::json j{{"reset_action", 0}, {"horizon", 0}, {"policies", std::move(list)}};
  if (!outputs.policies.empty()) {
    j["reset_action"] = outputs.policies.begin()->second.reset_action;
    j["horizon"] = outputs.policies.begin()->second.inner.horizon;
  } else {
    j["horizon"] = outputs.horizon;
  }
  return j;
}

inline std::map<int, ResettingPolicy> policies_from_json(const nlohmann::json& j) {
  std::map<int, ResettingPolicy> out;
  const int reset_action = j.at("reset_action").get<int>();
  for (const auto& entry : j.at("policies")) {
    const auto& actions = entry.at("actions");
    const int horizon = static_cast<int>(actions.size());
    const int num_states = horizon > 0 ? static_cast<int>(actions[0].size()) : 0;
    NonStationaryPolicy pi(horizon, num_states);
    for (int h = 1; h <= horizon; ++h) {
      for (int s = 0; s < num_states; ++s) pi.at(h, s) = actions[h - 1][s].get<int>();
    }
    out.emplace(entry.at("goal").get<int>(), ResettingPolicy{std::move(pi), reset_action});
  }
  return out;
}

struct SeedResult {
  std::uint64_t seed = 0;
  RunOutputs outputs;
  LinearDiagnostics linear_diag;
  std::optional<PacVerdict> verdict;
  std::optional<std::string> error;  // per-seed failures are isolated, never silent
  std::filesystem::path dir;
  nlohmann::json summary;
};

struct ExperimentResult {
  std::string hash;
  ResolvedEnv env;
  std::vector<int> goal_space;
  int horizon = 0;
  std::vector<SeedResult> seeds;
};

inline nlohmann::json make_summary(const RunConfig& cfg, const std::string& hash, std::uint64_t seed, int horizon,
                                   int derived_horizon, const RunOutputs& outputs) {
  nlohmann::json deviations = nlohmann::json::array();
  if (cfg.horizon_override) deviations.push_back("horizon_override");
  if (cfg.table_update_period > 1) deviations.push_back("table_update_period");
  nlohmann::json j{{"config_hash", hash},
                   {"seed", seed},
                   {"algorithm", cfg.algorithm},
                   {"sampler", cfg.sampler},
                   {"L", cfg.radius},
                   {"epsilon", cfg.eps},
                   {"delta", cfg.delta},
                   {"horizon", horizon},
                   {"horizon_derived", derived_horizon},
                   {"simplified_bonuses", cfg.simplified_bonuses},
                   {"max_episodes", cfg.max_episodes},
                   {"kappa", outputs.kappa},
                   {"episodes", outputs.episodes},
                   {"tau", outputs.tau},
                   {"stopped_by", outputs.stopped_by_rule ? "rule" : "cap"},
                   {"goal_space", outputs.goal_space},
                   {"candidate_goals", outputs.candidate_goals},
                   {"distance", outputs.final_distance},
                   {"error", outputs.final_error},
                   {"pac", nullptr},
                   {"deviations", std::move(deviations)}};
  return j;
}

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

/// Executes the configured algorithm for every seed, writing one directory
/// per (config hash, seed) with summary.json, frequencies.csv, policies.json
/// and env.json, plus a top-level index.json. Seeds are independent and may
/// run on worker threads; outputs are deterministic either way.
inline ExperimentResult run_experiment(const RunConfig& cfg, bool write_files = true, int jobs = 1) {
  ExperimentResult result;
  result.env = resolve_env(cfg.env_spec);
  const TabularMdp& mdp = result.env.mdp;
  if (cfg.algorithm == "adagoal-ucrlvtr" && !result.env.mixture)
    throw std::invalid_argument("run_experiment: adagoal-ucrlvtr needs a mixture environment");

  if (cfg.goal_space) {
    result.goal_space = *cfg.goal_space;
    for (int g : result.goal_space) {
      if (!mdp.state_ok(g)) throw std::invalid_argument("run_experiment: goal_space entry out of range");
    }
  } else {
    result.goal_space.resize(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) result.goal_space[s] = s;
  }

  const int derived_horizon = horizon_for(cfg.radius, cfg.eps);
  result.horizon = cfg.horizon_override.value_or(derived_horizon);
  result.hash = config_hash(cfg, result.env, result.goal_space);

  MgeConfig mge;
  mge.radius = cfg.radius;
  mge.eps = cfg.eps;
  mge.delta = cfg.delta;
  mge.horizon = result.horizon;
  mge.goal_space = result.goal_space;
  mge.max_episodes = cfg.max_episodes;
  mge.simplified_bonuses = cfg.simplified_bonuses;
  mge.table_update_period = cfg.table_update_period;

  const GoalSampler sampler = GoalSampler::parse(cfg.sampler);
  DiagnosticsOptions diag;
  diag.enabled = cfg.diagnostics;

  result.seeds.resize(cfg.seeds.size());
  auto run_one = [&](std::size_t index) {
    const std::uint64_t seed = cfg.seeds[index];
    SeedResult& sr = result.seeds[index];
    sr.seed = seed;
    try {
      if (cfg.algorithm == "adagoal-ucbvi") {
        sr.outputs = run_adagoal_ucbvi(mdp, mge, sampler, seed, diag);
      } else {
        auto lin = run_adagoal_ucrlvtr(*result.env.mixture, mge, sampler, seed, diag);
        sr.outputs = std::move(lin.base);
        sr.linear_diag = lin.diagnostics;
      }
    } catch (const std::exception& e) {
      sr.error = e.what();
      return;
    }
    sr.summary = make_summary(cfg, result.hash, seed, result.horizon, derived_horizon, sr.outputs);
    if (cfg.verify) {
      sr.verdict = verify_pac(mdp, result.goal_space, cfg.radius, cfg.eps, sr.outputs.candidate_goals,
                              sr.outputs.policies);
      sr.summary["pac"] = pac_verdict_to_json(*sr.verdict);
    }
    if (write_files) {
      sr.dir = std::filesystem::path(cfg.output_dir) / (result.hash + "-seed" + std::to_string(seed));
      std::filesystem::create_directories(sr.dir);
      write_json_file(sr.summary, sr.dir / "summary.json");
      write_json_file(result.env.canonical, sr.dir / "env.json");
      write_json_file(policies_to_json(sr.outputs), sr.dir / "policies.json");
      write_frequency_csv(build_frequency_log(sr.outputs, cfg.max_episodes, cfg.bucket_count),
                          sr.dir / "frequencies.csv");
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cfg.seeds.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.seeds.size(); i = next.fetch_add(1)) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  if (write_files) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& sr : result.seeds) {
      if (sr.error) {
        runs.push_back(nlohmann::json{{"seed", sr.seed}, {"error", *sr.error}});
        continue;
      }
      runs.push_back(nlohmann::json{{"seed", sr.seed},
                                    {"dir", sr.dir.filename().string()},
                                    {"stopped_by", sr.outputs.stopped_by_rule ? "rule" : "cap"},
                                    {"kappa", sr.outputs.kappa},
                                    {"episodes", sr.outputs.episodes},
                                    {"tau", sr.outputs.tau}});
    }
    std::filesystem::create_directories(cfg.output_dir);
    write_json_file(nlohmann::json{{"config_hash", result.hash}, {"runs", std::move(runs)}},
                    std::filesystem::path(cfg.output_dir) / "index.json");
  }
  return result;
}

/// Re-verifies a stored run directory against its recorded environment and
/// rewrites summary.json with the verdict attached.
inline PacVerdict verify_run_dir(const std::filesystem::path& dir) {
  auto summary = read_json_file(dir / "summary.json");
  const auto env_json = read_json_file(dir / "env.json");
  ResolvedEnv env = resolve_env(env_json);
  const auto policies = policies_from_json(read_json_file(dir / "policies.json"));
  const auto goal_space = summary.at("goal_space").get<std::vector<int>>();
  const auto candidates = summary.at("candidate_goals").get<std::vector<int>>();
  for (int g : candidates) {
    if (!policies.count(g)) throw std::runtime_error("verify: policy missing for goal " + std::to_string(g));
  }
  const auto verdict = verify_pac(env.mdp, goal_space, summary.at("L").get<double>(),
                                  summary.at("epsilon").get<double>(), candidates, policies);
  summary["pac"] = pac_verdict_to_json(verdict);
  write_json_file(summary, dir / "summary.json");
  return verdict;
}

struct CurriculumStage {
  double radius = 0.0;
  nlohmann::json summary;
  bool stopped_by_rule = false;
  std::int64_t tau = 0;
  std::vector<int> candidate_goals;
};

struct CurriculumResult {
  std::uint64_t seed = 0;
  std::vector<CurriculumStage> stages;
  bool aborted = false;
  std::int64_t cumulative_tau = 0;
  std::vector<int> final_candidates;
};

/// Successive runs for L in {2, 4, ..., 2^f} on the same environment,
/// reporting cumulative exploration steps and the final candidate set. A
/// stage that exhausts its episode cap aborts the curriculum.
inline std::vector<CurriculumResult> run_curriculum(const RunConfig& cfg, int f, bool write_files = true) {
  if (f < 1) throw std::invalid_argument("run_curriculum: f must be >= 1");
  std::vector<CurriculumResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    CurriculumResult cr;
    cr.seed = seed;
    std::filesystem::path seed_dir;
    for (int stage = 1; stage <= f; ++stage) {
      RunConfig stage_cfg = cfg;
      stage_cfg.radius = std::pow(2.0, stage);
      stage_cfg.seeds = {seed + static_cast<std::uint64_t>(stage - 1) * 1000003ULL};
      stage_cfg.verify = false;
      auto exp = run_experiment(stage_cfg, false);
      const auto& sr = exp.seeds.front();
      if (sr.error) throw std::runtime_error("curriculum stage " + std::to_string(stage) + " failed: " + *sr.error);

      if (write_files && seed_dir.empty()) {
        seed_dir = std::filesystem::path(cfg.output_dir) / ("curriculum-" + exp.hash + "-seed" + std::to_string(seed));
      }
      CurriculumStage cs;
      cs.radius = stage_cfg.radius;
      cs.summary = sr.summary;
      cs.stopped_by_rule = sr.outputs.stopped_by_rule;
      cs.tau = sr.outputs.tau;
      cs.candidate_goals = sr.outputs.candidate_goals;
      cr.cumulative_tau += cs.tau;
      cr.stages.push_back(std::move(cs));
      if (!sr.outputs.stopped_by_rule) {
        cr.aborted = true;
        break;
      }
      cr.final_candidates = sr.outputs.candidate_goals;
    }
    if (write_files) {
      nlohmann::json stages = nlohmann::json::array();
      for (const auto& cs : cr.stages) {
        stages.push_back(nlohmann::json{{"L", cs.radius},
                                        {"stopped_by", cs.stopped_by_rule ? "rule" : "cap"},
                                        {"tau", cs.tau},
                                        {"candidate_goals", cs.candidate_goals},
                                        {"summary", cs.summary}});
      }
      std::filesystem::create_directories(seed_dir);
      write_json_file(nlohmann::json{{"seed", cr.seed},
                                     {"aborted", cr.aborted},
                                     {"cumulative_tau", cr.cumulative_tau},
                                     {"final_candidates", cr.final_candidates},
                                     {"stages", std::move(stages)}},
                      seed_dir / "curriculum.json");
    }
    results.push_back(std::move(cr));
  }
  return results;
}

}  // namespace adagoal
