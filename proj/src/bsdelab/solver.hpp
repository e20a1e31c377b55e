#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsdelab/generator.hpp"
#include "bsdelab/norms.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/truncation.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

struct SolverOptions {
  RegressionBasis basis;
  int picard_max_iters = 20;
  double picard_tol = 1e-6;
  double q = 2.0;          // iteration exponent: subdivision thresholds and
                           // the Picard distance norm
  int subdivision_N = 4;
  std::vector<int> truncation_schedule = {1, 2, 4, 8, 16};
  int implicit_max_iters = 100;
};

// Discrete (Y, Z) pair on the bundle's grid. Y holds xi at and past each
// path's terminal node; Z is zero there.
struct DiscreteSolution {
  std::size_t n_paths = 0;
  int k = 0;
  int d = 0;
  std::size_t n_steps = 0;
  std::vector<double> Y;  // [path][node][k]
  std::vector<double> Z;  // [path][step][k*d]
  std::vector<std::uint32_t> start, end;  // solved node range per path

  std::string scheme;
  std::string basis_desc;
  int iterations = 0;
  std::vector<double> node_residual_rms;           // regression martingale gap per node
  std::vector<double> picard_history;              // successive-difference norms
  std::vector<std::vector<double>> interval_histories;  // per subdivision interval
  std::vector<double> cauchy_history;              // truncation scheme distances

  double y_at(std::size_t p, std::size_t node, int c) const {
    return Y[(p * (n_steps + 1) + node) * k + c];
  }
  double z_at(std::size_t p, std::size_t step, int cell) const {
    return Z[(p * n_steps + step) * (k * d) + cell];
  }
};

// Backward induction for a z-independent driver: Z from the martingale-
// increment regression, Y from the implicit step
//   Y_i = E[Y_{i+1} | F_i] + dt_i g(t_i, Y_i).
DiscreteSolution solve_backward_zfree(std::shared_ptr<const Generator> gen,
                                      const GeneratorAux& aux,
                                      std::span<const double> xi,
                                      const PathBundle& bundle,
                                      const SolverOptions& opts);

// Iterates the z-frozen backward solve until the weighted H^q distance
// between successive iterates drops below tol. Throws SolverDivergence when
// the distance fails to decrease over 3 consecutive iterations.
DiscreteSolution solve_picard(std::shared_ptr<const Generator> gen,
                              const GeneratorAux& aux, std::span<const double> xi,
                              const PathBundle& bundle, const WeightParams& params,
                              const SolverOptions& opts);

// Stopping-time partition of [0, tau] along (int nu^2)^{q/2} crossing
// j M^{q/2} / N.
struct SubdivisionPlan {
  int N = 0;
  double q = 2.0;
  double threshold = 0.0;  // M^{q/2} / N
  std::vector<std::vector<std::uint32_t>> tau_js;  // [j in 0..N][path]
};

SubdivisionPlan build_subdivision(const PathBundle& bundle, const WeightParams& params,
                                  double q, int N);

// Chains Picard solves over the plan's intervals from the last to the
// first, replacing the terminal value by the previous interval's solution.
DiscreteSolution solve_subdivided(std::shared_ptr<const Generator> gen,
                                  const GeneratorAux& aux, std::span<const double> xi,
                                  const PathBundle& bundle, const WeightParams& params,
                                  const SubdivisionPlan& plan, const SolverOptions& opts);

// Solves the bounded-data approximations along the given rank schedule and
// records the weighted H^p distance between consecutive solutions.
std::pair<DiscreteSolution, std::vector<double>> solve_via_truncation(
    std::shared_ptr<const Generator> gen, const GeneratorAux& aux,
    std::span<const double> xi, const PathBundle& bundle, const WeightParams& params,
    std::span<const int> n_schedule, const SolverOptions& opts);

struct ResidualReport {
  double mean_abs = 0.0;
  double max_abs = 0.0;
  std::size_t max_path = 0;
  std::size_t max_node = 0;
  double terminal_mismatch = 0.0;
  std::vector<double> martingale_rms;  // per node
  // mean one-step residual times sqrt(n_steps); feeds the comparison tolerance
  double scheme_error_estimate = 0.0;
};

ResidualReport residual_report(const DiscreteSolution& sol, const Generator& gen,
                               const GeneratorAux& aux, const PathBundle& bundle,
                               std::span<const double> xi,
                               const RegressionBasis& basis);

// Per-path terminal values from the generator's terminal functional.
std::vector<double> terminal_values(const Generator& gen, const GeneratorAux& aux,
                                    const PathBundle& bundle);

}  // namespace bsdelab
