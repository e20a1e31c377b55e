#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bsdelab/config.hpp"

namespace bsdelab {

struct RunArtifacts {
  std::filesystem::path dir;
  bool any_check_failed = false;
  nlohmann::json summary;
};

// Full pipeline: simulate, check, solve, measure; writes the run directory
// (paths/solution artifacts, JSON reports, CSV summary, plot data, MANIFEST).
// Throws ConfigError / SolverDivergence / DataError for the CLI to map to
// exit codes.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

// Re-executes the stored config and compares: paths.bin must match bit for
// bit, reports numerically to 1e-12. Returns 0 on match; otherwise prints
// the first divergent field and returns 1.
int replay_run(const std::filesystem::path& dir, std::ostream& log);

// Assumption checkers only; returns true when every verdict is pass.
bool check_only(const ExperimentConfig& cfg, std::ostream& log);

void print_gallery(std::ostream& out);

// First divergence between two JSON documents at 1e-12 numeric tolerance;
// empty when they agree.
std::string first_json_divergence(const nlohmann::json& a, const nlohmann::json& b,
                                  const std::string& path = "$");

}  // namespace bsdelab
