#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/grid.hpp"

namespace bsdelab {

// First-passage rule for the random horizon, evaluated on grid nodes only
// (the decision at node i never looks past node i).
struct StoppingTimeSpec {
  enum class Kind { Deterministic, Hitting, CappedIntegral, Infinite };
  Kind kind = Kind::Deterministic;
  double T = 0.0;               // Deterministic
  double level = 0.0;           // Hitting
  std::string functional = "absB";  // Hitting: absB | b1
  double threshold = 0.0;       // CappedIntegral
  std::string integrand = "nu2";    // CappedIntegral: nu2 | track name
};

// Realized Brownian paths, horizon indices and named coefficient tracks on a
// shared grid. All arrays are path-major. Tracks live on nodes [0, n_steps].
struct PathBundle {
  TimeGrid grid;
  std::size_t n_paths = 0;
  int d = 0;
  std::uint64_t seed = 0;

  std::vector<double> increments;  // [path][step][dim], already scaled by sqrt(dt)
  std::vector<double> states;      // [path][node][dim], B at nodes
  std::vector<double> abs_b;       // [path][node]
  std::vector<double> sup_abs_b;   // [path][node], running max of |B|
  std::vector<std::uint32_t> tau_index;  // realized horizon node per path
  std::vector<std::uint8_t> censored;    // rule never fired before t_max
  std::map<std::string, std::vector<double>> tracks;  // mu, nu, gamma, g1, g2, alpha

  std::size_t n_nodes() const { return grid.n_nodes(); }
  double t(std::size_t node) const { return grid.nodes[node]; }

  double incr(std::size_t p, std::size_t step, int dim) const {
    return increments[(p * grid.n_steps + step) * d + dim];
  }
  const double* b(std::size_t p, std::size_t node) const {
    return &states[(p * n_nodes() + node) * d];
  }
  double absb(std::size_t p, std::size_t node) const {
    return abs_b[p * n_nodes() + node];
  }
  double supb(std::size_t p, std::size_t node) const {
    return sup_abs_b[p * n_nodes() + node];
  }
  bool has_track(const std::string& name) const { return tracks.count(name) > 0; }
  std::span<const double> track(const std::string& name) const;
  double track_at(const std::string& name, std::size_t p, std::size_t node) const {
    return track(name)[p * n_nodes() + node];
  }
  double censored_fraction() const;
};

// Gaussian increments with variance = step size from per-path Philox
// substreams; bit-identical for identical inputs under any thread count.
PathBundle simulate_brownian(const TimeGrid& grid, std::size_t n_paths, int d,
                             std::uint64_t seed);

// Fills tau_index / censored per the rule. CappedIntegral rules read a
// coefficient track, so those tracks must be filled first. Realizing a
// horizon also zeroes integrand tracks past the new tau (alpha is frozen at
// its tau value instead, keeping it in (0,1]).
void realize_stopping_time(PathBundle& bundle, const StoppingTimeSpec& spec);

// Pure variant: returns per-path first-passage indices without touching the
// bundle. Used by the class (D) stopping family and by tests.
std::vector<std::uint32_t> realize_indices(const PathBundle& bundle,
                                           const StoppingTimeSpec& spec,
                                           std::vector<std::uint8_t>* censored_out = nullptr);

// Re-applies the past-tau convention to every track: integrands drop to 0,
// alpha holds its tau value.
void mask_tracks_past_tau(PathBundle& bundle);

struct MomentDiagnostics {
  double step_pass_fraction = 0.0;  // steps passing both mean and variance gates
  double worst_abs_mean = 0.0;
  double worst_var_rel_err = 0.0;
  double max_abs_cross_corr = 0.0;  // across dimension pairs, pooled over steps
};

// Sanity gates: per-step sample mean within 5/sqrt(n_paths) of 0 and sample
// variance within 20% of the step size.
MomentDiagnostics brownian_moment_diagnostics(const PathBundle& bundle);

void save_bundle(const PathBundle& bundle, const std::filesystem::path& file);
PathBundle load_bundle(const std::filesystem::path& file);

}  // namespace bsdelab
