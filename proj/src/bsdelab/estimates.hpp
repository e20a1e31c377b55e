#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/checks.hpp"
#include "bsdelab/generator.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

// Data of the one-sided growth bound <y/|y|, g> <= u|y| + v|z| + f, plus
// the derived exponent abar = beta u + rho/(2 min(p-1,1)) v^2 [p>1 only].
struct AprioriBoundSpec {
  double p = 2.0;
  std::vector<double> u, v, f;  // [path][node]
};

// u = mu, v = nu, f = |g(t,0,0)| from the generator's own structure.
AprioriBoundSpec apriori_spec_from_generator(const Generator& gen,
                                             const GeneratorAux& aux,
                                             const PathBundle& bundle, double p);

WeightTrack abar_weights(const PathBundle& bundle, const AprioriBoundSpec& spec,
                         const WeightParams& params);

// Empirical two-sided record of one a priori inequality: both sides as MC
// estimates and their ratio (the unknown constant is not recovered).
struct EstimateReport {
  std::string inequality_id;  // P2.1-(2.1) | P2.1-(2.2) | P2.2-(2.8)
  std::size_t t_node = 0;
  double lhs = 0.0;
  double rhs_without_constant = 0.0;
  double empirical_ratio = 0.0;
  bool zero_over_zero = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_ratios;
  std::string verdict;  // bounded | unstable
  std::size_t saturated_paths = 0;
};

// E[(int_{t^tau}^tau e^{2 int abar} |Z|^2)^{p/2}] against
// E[sup e^{p int abar}|Y|^p] + E[(int e^{int abar} f)^p].
// p > 1 evaluates inequality (2.1); p <= 1 evaluates (2.2), which requires
// int v^2 <= M on every path.
EstimateReport apriori_zbound(const DiscreteSolution& sol, const AprioriBoundSpec& spec,
                              const PathBundle& bundle, const WeightParams& params,
                              std::size_t t_node);

// E[sup e^{p int abar}|Y|^p] + E[(int e^{2 int abar}|Z|^2)^{p/2}] against
// E[e^{p int abar}|xi|^p] + E[(int e^{int abar} f)^p]; p > 1 only.
EstimateReport apriori_full(const DiscreteSolution& sol, const AprioriBoundSpec& spec,
                            const PathBundle& bundle, const WeightParams& params,
                            std::size_t t_node);

// Merges same-inequality reports from independent seeds; verdict turns
// "unstable" when the across-seed ratio spread exceeds 50%.
EstimateReport combine_seed_reports(std::span<const EstimateReport> reports);

CheckReport verify_assumption_A(const Generator& gen, const GeneratorAux& aux,
                                const AprioriBoundSpec& spec, const PathBundle& bundle,
                                std::size_t probes, std::uint64_t seed);

}  // namespace bsdelab
