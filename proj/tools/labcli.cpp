// Command-line front end: configure experiments, run them, list the built-in
// generator gallery, and replay stored runs for reproducibility audits.
//
// Exit codes: 0 success, 1 a check failed (or replay mismatch), 2 invalid
// configuration, 3 solver divergence, 4 runtime data error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsdelab/config.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/runner.hpp"

namespace {

struct Overrides {
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::string out;

  void apply(bsdelab::ExperimentConfig& cfg) const {
    if (has_seed) cfg.seed = seed;
    if (paths > 0) cfg.n_paths = paths;
    if (steps > 0) cfg.n_steps = steps;
    if (!out.empty()) cfg.out_dir = out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsde-mc-lab: Monte Carlo laboratory for random-horizon BSDEs"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker thread count")
      ->envname("BSDE_LAB_THREADS");

  Overrides ov;
  std::string config_path, run_dir;

  auto add_common = [&](CLI::App* sub) {
    auto* seed_opt = sub->add_option("--seed", ov.seed, "override the config seed");
    seed_opt->each([&](const std::string&) { ov.has_seed = true; });
    sub->add_option("--paths", ov.paths, "override n_paths");
    sub->add_option("--steps", ov.steps, "override n_steps");
    sub->add_option("--out", ov.out, "override the output directory");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment from a JSON config");
  run_cmd->add_option("config", config_path, "config JSON file")->required();
  add_common(run_cmd);

  CLI::App* check_cmd =
      app.add_subcommand("check", "run only the assumption checkers of a config");
  check_cmd->add_option("config", config_path, "config JSON file")->required();
  add_common(check_cmd);

  CLI::App* gallery_cmd = app.add_subcommand("gallery", "list built-in generators");

  CLI::App* replay_cmd =
      app.add_subcommand("replay", "re-execute a stored run and verify it matches");
  replay_cmd->add_option("dir", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) bsdelab::set_thread_count(threads);

  try {
    if (gallery_cmd->parsed()) {
      bsdelab::print_gallery(std::cout);
      return 0;
    }
    if (replay_cmd->parsed()) {
      return bsdelab::replay_run(run_dir, std::cout);
    }
    bsdelab::ExperimentConfig cfg = bsdelab::load_config(config_path);
    ov.apply(cfg);
    cfg.validate();
    if (check_cmd->parsed()) {
      return bsdelab::check_only(cfg, std::cout) ? 0 : 1;
    }
    const bsdelab::RunArtifacts art = bsdelab::run_experiment(cfg);
    std::cout << "run directory: " << art.dir.string() << "\n";
    if (art.summary.contains("norms")) {
      const auto& n = art.summary["norms"];
      std::printf("norm        value         std_error     saturated\n");
      for (const char* key : {"terminal", "sup", "z", "class_D"}) {
        const auto& r = n[key];
        std::printf("%-10s  %-12.6g  %-12.3g  %zu\n", key, r["value"].get<double>(),
                    r["std_error"].get<double>(),
                    r["saturated_paths"].get<std::size_t>());
      }
    }
    if (art.summary.contains("residual")) {
      const auto& r = art.summary["residual"];
      std::printf("residual: mean %.3g  max %.3g  terminal %.3g\n",
                  r["mean_abs"].get<double>(), r["max_abs"].get<double>(),
                  r["terminal_mismatch"].get<double>());
    }
    if (art.any_check_failed) {
      std::cout << "verdict: at least one check failed\n";
      return 1;
    }
    std::cout << "verdict: ok\n";
    return 0;
  } catch (const bsdelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bsdelab::SolverDivergence& e) {
    std::cerr << "solver divergence: " << e.what() << "\npicard_history:";
    for (double d : e.picard_history) std::cerr << " " << d;
    std::cerr << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
