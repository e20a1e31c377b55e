#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bsdelab/generator.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

// Pairwise record of a one-dimensional comparison run: U = Y - Y', the
// Girsanov drift diagnostic b = nu V*/|V| and the uniform-integrability
// exponent q = PQ/(P+Q).
struct ComparisonWitness {
  std::vector<double> U;  // [path][node]
  std::vector<std::pair<std::uint32_t, std::uint32_t>> violations;  // (path, node)
  std::vector<double> girsanov_b;  // [path][step][d]
  double q_exponent = 0.0;
  double tol_comp = 0.0;
  double weighted_sup_uplus = 0.0;  // sup-norm of U^+ in the abar weight
  double max_uplus = 0.0;
  std::size_t ordering_breaches = 0;  // driver-ordering violations observed
};

// q = p (m + rho) / ((p+1) m + rho) with m = min(p-1, 1).
double comparison_q_exponent(double p, double rho);

enum class ComparisonSide { OnPrimeTrajectory, OnPlainTrajectory };  // (i) / (ii)

// Verifies xi <= xi' pathwise and the driver ordering on the designated
// trajectory, then reports every (path, node <= tau) where (Y - Y')^+
// exceeds tol_comp. k must be 1. nu is the designated generator's Lipschitz
// track; abar weights come from the same generator's structure.
// enforce_ordering = false records ordering breaches in the witness instead
// of throwing; negative-control runs use it to confirm the check has power.
ComparisonWitness compare_solutions(const DiscreteSolution& solA,
                                    const DiscreteSolution& solB,
                                    std::span<const double> xiA,
                                    std::span<const double> xiB, const Generator& genA,
                                    const GeneratorAux& auxA, const Generator& genB,
                                    const GeneratorAux& auxB, ComparisonSide side,
                                    const PathBundle& bundle,
                                    const WeightParams& params,
                                    std::span<const double> nu_track,
                                    const WeightTrack& abar, double tol_comp,
                                    bool enforce_ordering = true);

}  // namespace bsdelab
