#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsdelab/generator.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

// Tolerance separating genuine violations from rounding on the pointwise
// hypothesis inequalities.
constexpr double kCheckTolAbs = 1e-8;

enum class CheckKind { MonotoneY, LipschitzZ, SublinearZ, AssumptionA };

struct ProbeRecord {
  std::size_t path = 0;
  std::size_t node = 0;
  std::vector<double> y1, y2;  // y2 unused except MonotoneY
  std::vector<double> z1, z2;  // z2 used by LipschitzZ
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = -std::numeric_limits<double>::infinity();
  std::size_t probe_index = 0;
};

// A checker can only certify that no violation was found among its probes;
// fail verdicts carry a witness that reproduces the violation.
struct CheckReport {
  std::string assumption;
  std::string verdict;  // pass | fail | inconclusive
  std::string note;     // "no-violation-found" on pass
  std::size_t n_probes = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  double tol_abs = kCheckTolAbs;
  std::optional<ProbeRecord> witness;
  double estimate = 0.0;   // integral-condition estimate where applicable
  double std_error = 0.0;
  std::map<std::string, double> details;
};

// Pointwise margin of one probe; used by the checkers and by witness
// re-evaluation. u/v/f override the mu/nu track lookup for AssumptionA.
struct AssumptionATracks {
  std::span<const double> u, v, f;
};
double probe_margin(const Generator& gen, const GeneratorAux& aux,
                    const PathBundle& bundle, CheckKind kind, ProbeRecord& probe,
                    const AssumptionATracks* a_tracks = nullptr);

CheckReport check_monotonicity_y(const Generator& gen, const GeneratorAux& aux,
                                 const PathBundle& bundle, std::size_t probes,
                                 std::uint64_t seed);

CheckReport check_lipschitz_z(const Generator& gen, const GeneratorAux& aux,
                              const PathBundle& bundle, std::size_t probes,
                              std::uint64_t seed);

// Pointwise sub-linear growth in z plus the integral side conditions on
// gamma/g1/g2 (quadrature against M along every path).
CheckReport check_sublinear_z(const Generator& gen, const GeneratorAux& aux,
                              const PathBundle& bundle, const WeightParams& params,
                              std::size_t probes, std::uint64_t seed);

// Monte Carlo integrability estimate for the driver-at-origin variants.
// variant: H1 (full-a weight, p-th power), H1' (beta-mu weight), H1''
// (unweighted), H1c (unweighted, p-th power).
CheckReport check_integrability(const Generator& gen, const GeneratorAux& aux,
                                const PathBundle& bundle, const WeightParams& params,
                                const std::string& variant,
                                const WeightTrack* weights);

struct PsiGrowthResult {
  std::vector<double> track;  // [path][node] discrete sup estimate
  double estimate = 0.0;      // E[ int_0^tau e^{beta int mu} psi dt ]
  double std_error = 0.0;
  std::size_t n_probes_per_point = 0;
};

// Lower-bound estimate of sup_{|y| <= r alpha_t} |g(t,y,0) - g(t,0,0)| via
// directions x radial ladder; monotone in the probe set by construction.
PsiGrowthResult psi_growth(const Generator& gen, const GeneratorAux& aux,
                           const PathBundle& bundle, double r,
                           std::span<const double> alpha, std::size_t n_sphere,
                           const WeightParams& params, std::size_t radial_levels = 8);

// Probe check of <y/|y|, g(t,y,z)> <= u|y| + v|z| + f on the given tracks.
CheckReport check_assumption_a(const Generator& gen, const GeneratorAux& aux,
                               const PathBundle& bundle,
                               const AssumptionATracks& tracks, std::size_t probes,
                               std::uint64_t seed);

// Runs every checker the generator's declared assumption set calls for.
std::vector<CheckReport> run_declared_checks(const Generator& gen,
                                             const GeneratorAux& aux,
                                             const PathBundle& bundle,
                                             const WeightParams& params,
                                             std::size_t probes, std::uint64_t seed,
                                             const WeightTrack* full_a_weights);

}  // namespace bsdelab
