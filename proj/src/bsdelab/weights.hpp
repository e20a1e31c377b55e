#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bsdelab/paths.hpp"

namespace bsdelab {

// Standing constants of the weighted-space setup: p > 0, beta >= 1, rho > 1,
// M > 0 and the sub-linear exponent l in (0,1) for the L^1 route.
struct WeightParams {
  double p = 2.0;
  double beta = 1.0;
  double rho = 2.0;
  double M = 1.0;
  double l = 0.5;

  // min(p-1, 1), the exponent bracket used throughout the p > 1 theory.
  double pm1_capped() const { return (p - 1.0 < 1.0) ? p - 1.0 : 1.0; }
  double c_p() const { return p * pm1_capped() / 2.0; }
  void validate() const;
};

enum class WeightVariant { FullA, BetaMuOnly };

// Overflow guard for exp(cum): beyond this the weight is meaningless in
// double precision, so the path is flagged saturated and excluded from
// weighted averages (with a count surfaced in every report).
constexpr double kSaturationLogCap = 700.0;

// Exponent integrand a, its left-rule cumulative integral and the weight
// exp(cum) on every node of every path.
struct WeightTrack {
  std::size_t n_paths = 0;
  std::size_t n_nodes = 0;
  WeightVariant variant = WeightVariant::FullA;
  std::vector<double> a_values;      // [path][node]
  std::vector<double> cum_integral;  // [path][node]
  std::vector<double> weight;        // [path][node] = exp(cum)
  std::vector<std::uint8_t> saturated;  // [path]

  double a(std::size_t p, std::size_t i) const { return a_values[p * n_nodes + i]; }
  double cum(std::size_t p, std::size_t i) const { return cum_integral[p * n_nodes + i]; }
  double w(std::size_t p, std::size_t i) const { return weight[p * n_nodes + i]; }
  std::size_t saturated_count() const;
};

// FullA: a = beta*mu + rho/(2 min(p-1,1)) nu^2 (requires p > 1).
// BetaMuOnly: a = beta*mu. Missing tracks count as the zero process.
WeightTrack accumulate_weight(const PathBundle& bundle, const WeightParams& params,
                              WeightVariant variant);

// Weight track from an arbitrary nonnegative exponent process.
WeightTrack weight_from_exponent(const PathBundle& bundle,
                                 std::span<const double> a_values);

// alpha_hat = min(alpha_t, exp(-beta int_0^t mu - t)) pathwise.
std::vector<double> modified_alpha(const PathBundle& bundle,
                                   std::span<const double> alpha,
                                   std::span<const double> mu, double beta);

void validate_weight_track(const WeightTrack& track);

}  // namespace bsdelab
