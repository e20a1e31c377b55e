#include "bsdelab/comparison.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/norms.hpp"

namespace bsdelab {

double comparison_q_exponent(double p, double rho) {
  const double m = std::min(p - 1.0, 1.0);
  return p * (m + rho) / ((p + 1.0) * m + rho);
}

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
                                    bool enforce_ordering) {
  if (genA.k() != 1 || genB.k() != 1) {
    throw ConfigError("compare_solutions: comparison is one-dimensional (k = 1)");
  }
  const std::size_t n_paths = bundle.n_paths;
  const std::size_t n_nodes = bundle.n_nodes();
  const std::size_t n_steps = bundle.grid.n_steps;
  const int d = bundle.d;

  // Preconditions: ordered terminals, ordered drivers along the designated
  // solution's trajectory.
  for (std::size_t p = 0; p < n_paths; ++p) {
    if (xiA[p] > xiB[p] + 1e-12) {
      throw DataError("compare_solutions: xi > xi' on path " + std::to_string(p));
    }
  }
  const DiscreteSolution& traj =
      (side == ComparisonSide::OnPrimeTrajectory) ? solB : solA;
  std::size_t ordering_breaches = 0;
  std::vector<double> ga(1), gb(1), y(1);
  for (std::size_t p = 0; p < n_paths; ++p) {
    const std::size_t tau = bundle.tau_index[p];
    for (std::size_t i = 0; i < tau; ++i) {
      y[0] = traj.y_at(p, i, 0);
      std::span<const double> z(&traj.Z[(p * n_steps + i) * d], d);
      NodeCtx ctxA{&bundle, &auxA, p, i};
      NodeCtx ctxB{&bundle, &auxB, p, i};
      genA.driver(ctxA, y, z, ga);
      genB.driver(ctxB, y, z, gb);
      if (ga[0] > gb[0] + 1e-9) {
        if (enforce_ordering) {
          throw DataError("compare_solutions: driver ordering violated at path " +
                          std::to_string(p) + " node " + std::to_string(i));
        }
        ++ordering_breaches;
      }
    }
  }

  ComparisonWitness w;
  w.ordering_breaches = ordering_breaches;
  w.tol_comp = tol_comp;
  w.q_exponent = comparison_q_exponent(params.p, params.rho);
  w.U.assign(n_paths * n_nodes, 0.0);
  w.girsanov_b.assign(n_paths * n_steps * static_cast<std::size_t>(d), 0.0);

  std::vector<double> uplus(n_paths * n_nodes, 0.0);
  for (std::size_t p = 0; p < n_paths; ++p) {
    const std::size_t tau = bundle.tau_index[p];
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const double u = solA.y_at(p, i, 0) - solB.y_at(p, i, 0);
      w.U[p * n_nodes + i] = u;
      if (i <= tau) {
        uplus[p * n_nodes + i] = std::max(u, 0.0);
        if (u > tol_comp) {
          w.violations.emplace_back(static_cast<std::uint32_t>(p),
                                    static_cast<std::uint32_t>(i));
        }
        w.max_uplus = std::max(w.max_uplus, u);
      }
    }
    for (std::size_t i = 0; i < tau; ++i) {
      double vnorm = 0.0;
      for (int e = 0; e < d; ++e) {
        const double v = solA.z_at(p, i, e) - solB.z_at(p, i, e);
        vnorm += v * v;
      }
      vnorm = std::sqrt(vnorm);
      if (vnorm > 0.0) {
        const double nu = nu_track[p * n_nodes + i];
        for (int e = 0; e < d; ++e) {
          const double v = solA.z_at(p, i, e) - solB.z_at(p, i, e);
          w.girsanov_b[(p * n_steps + i) * d + e] = nu * v / vnorm;
        }
      }
    }
  }

  const NormResult sup = sup_norm(bundle, uplus, 1, abar, params.p);
  w.weighted_sup_uplus = sup.value;
  return w;
}

}  // namespace bsdelab
