// Batch experiment runner for the multi-goal exploration library:
//   run        execute a configured experiment over its seed list
//   curriculum successive runs with doubling exploration radius
//   verify     re-check a stored run against the exact planning oracle
//   gen-env    build one of the bundled environments and dump its JSON

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adagoal/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, int jobs) {
  auto cfg = adagoal::run_config_from_json(adagoal::read_json_file(config_path));
  auto result = adagoal::run_experiment(cfg, true, jobs);
  int failures = 0;
  for (const auto& sr : result.seeds) {
    if (sr.error) {
      ++failures;
      std::cout << "seed " << sr.seed << ": FAILED (" << *sr.error << ")\n";
      continue;
    }
    std::cout << "seed " << sr.seed << ": stopped_by=" << (sr.outputs.stopped_by_rule ? "rule" : "cap")
              << " kappa=" << sr.outputs.kappa << " episodes=" << sr.outputs.episodes << " tau=" << sr.outputs.tau
              << " |X|=" << sr.outputs.candidate_goals.size();
    if (sr.verdict) std::cout << " pac=" << (sr.verdict->overall() ? "true" : "false");
    std::cout << " -> " << sr.dir.string() << "\n";
  }
  std::cout << "index: " << (std::filesystem::path(cfg.output_dir) / "index.json").string() << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_curriculum(const std::string& config_path, int f) {
  auto cfg = adagoal::run_config_from_json(adagoal::read_json_file(config_path));
  auto results = adagoal::run_curriculum(cfg, f);
  bool aborted = false;
  for (const auto& cr : results) {
    std::cout << "seed " << cr.seed << ": stages=" << cr.stages.size() << " cumulative_tau=" << cr.cumulative_tau
              << " final_|X|=" << cr.final_candidates.size() << (cr.aborted ? " ABORTED (episode cap)" : "") << "\n";
    aborted = aborted || cr.aborted;
  }
  return aborted ? 1 : 0;
}

int cmd_verify(const std::string& run_dir) {
  const auto verdict = adagoal::verify_run_dir(run_dir);
  std::cout << "c1=" << (verdict.c1_all() ? "true" : "false") << " c2=" << (verdict.c2_holds ? "true" : "false")
            << " overall=" << (verdict.overall() ? "true" : "false") << "\n";
  for (const auto& [goal, ok] : verdict.c1_holds) {
    if (!ok) std::cout << "  goal " << goal << ": policy gap check failed\n";
  }
  for (int g : verdict.missing_goals) std::cout << "  goal " << g << ": reachable within L but not returned\n";
  for (int g : verdict.excess_goals) std::cout << "  goal " << g << ": returned but outside G_{L+eps}\n";
  return verdict.overall() ? 0 : 2;
}

int cmd_gen_env(const std::string& kind, const std::string& params, const std::string& out_path) {
  nlohmann::json spec = params.empty() ? nlohmann::json::object() : nlohmann::json::parse(params);
  spec["kind"] = kind;
  auto env = adagoal::resolve_env(spec);
  if (out_path.empty()) {
    std::cout << env.canonical.dump(2) << "\n";
  } else {
    adagoal::write_json_file(env.canonical, out_path);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-goal exploration experiment runner"};
  app.require_subcommand(1);

  std::string config_path, run_dir, kind, params, out_path;
  int f = 1;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "execute a configured experiment");
  run->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "seeds to run in parallel")->check(CLI::PositiveNumber);

  auto* curriculum = app.add_subcommand("curriculum", "doubling-radius curriculum");
  curriculum->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  curriculum->add_option("--f", f, "final exponent: runs L in {2,...,2^f}")->required()->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "oracle-verify a stored run directory");
  verify->add_option("--run-dir", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  auto* gen = app.add_subcommand("gen-env", "build a bundled environment");
  gen->add_option("--kind", kind, "grid | two-room-default | reset-free | bpi-ssp | mixture")->required();
  gen->add_option("--params", params, "JSON parameter object");
  gen->add_option("--out", out_path, "output file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, jobs);
    if (curriculum->parsed()) return cmd_curriculum(config_path, f);
    if (verify->parsed()) return cmd_verify(run_dir);
    if (gen->parsed()) return cmd_gen_env(kind, params, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
