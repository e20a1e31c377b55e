#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsdelab/expr.hpp"
#include "bsdelab/paths.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

struct SolverConfig {
  std::string scheme = "auto";  // auto | zfree | picard | subdivided | truncation
  int basis_degree = 3;
  double ridge = 1e-8;
  int picard_max_iters = 20;
  double picard_tol = 1e-6;
  int subdivision_N = 4;
  double q = 2.0;
  std::vector<int> truncation_schedule = {1, 2, 4, 8, 16};
};

struct ComparisonRequest {
  std::string other;      // gallery name of the primed generator
  std::string side = "i"; // i: ordering on the primed trajectory, ii: on the plain one
  bool enforce_ordering = true;  // false: negative-control mode, breaches recorded
};

struct ChecksConfig {
  bool assumptions = true;
  std::vector<std::string> estimates;  // subset of P2.1-(2.1) P2.1-(2.2) P2.2-(2.8)
  std::optional<ComparisonRequest> comparison;
  std::size_t probes = 2000;
  int estimate_seeds = 3;
};

struct ExperimentConfig {
  std::string generator;                      // gallery name, or empty when
  std::optional<ExprGeneratorSpec> expression;  // an expression spec is given
  std::optional<StoppingTimeSpec> stopping;   // preset default when absent
  double t_max = 1.0;
  std::size_t n_steps = 100;
  std::string spacing = "uniform";
  double grid_ratio = 1.0;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 12345;
  WeightParams weights;
  SolverConfig solver;
  ChecksConfig checks;
  std::string out_dir = "runs";

  void validate() const;
};

// Strict parse: unknown keys anywhere are a ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json stopping_to_json(const StoppingTimeSpec& spec);
StoppingTimeSpec stopping_from_json(const nlohmann::json& j);

}  // namespace bsdelab
