#pragma once

#include <span>
#include <string>
#include <vector>

#include "bsdelab/paths.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

// Monte Carlo value of a weighted norm. The outer exponent follows the
// 1 min 1/p convention: 1/p for p >= 1 and 1 for p < 1. Saturated paths are
// excluded from the average and counted.
struct NormResult {
  double value = 0.0;
  double p = 0.0;
  std::string weight_variant;
  double std_error = 0.0;       // across-path MC error after the outer power
  std::size_t saturated_paths = 0;
  std::size_t used_paths = 0;
  std::string note;             // class (D): member attaining the max
};

// E[ e^{p int_0^tau a} |xi|^p ]^(1 min 1/p); xi is [path][k], evaluated with
// the weight at the path's tau node.
NormResult terminal_norm(const PathBundle& bundle, std::span<const double> xi,
                         int k, const WeightTrack& weights, double p);

// E[ sup_{i in [start, end]} e^{p cum_i} |Y_i|^p ]^(1 min 1/p).
// Y is [path][node][k]; empty start/end default to [0, tau].
NormResult sup_norm(const PathBundle& bundle, std::span<const double> Y, int k,
                    const WeightTrack& weights, double p,
                    std::span<const std::uint32_t> start = {},
                    std::span<const std::uint32_t> end = {});

// E[ ( sum_{i in [start, end)} e^{2 cum_i} |Z_i|^2 dt_i )^{p/2} ]^(1 min 1/p).
// Z is [path][step][k*d].
NormResult z_norm(const PathBundle& bundle, std::span<const double> Z, int kd,
                  const WeightTrack& weights, double p,
                  std::span<const std::uint32_t> start = {},
                  std::span<const std::uint32_t> end = {});

// Lower bound of the class (D) norm: max over the supplied stopping family
// of E[ e^{cum} |Y| ] at the realized (rule min tau) node.
NormResult class_D_norm(const PathBundle& bundle, std::span<const double> Y, int k,
                        const WeightTrack& weights,
                        const std::vector<StoppingTimeSpec>& family,
                        const std::vector<std::string>& labels = {});

// sup-norm of the Y difference plus z-norm of the Z difference; the solver's
// iteration metric.
double hp_distance(const PathBundle& bundle, std::span<const double> Y1,
                   std::span<const double> Y2, std::span<const double> Z1,
                   std::span<const double> Z2, int k, int d,
                   const WeightTrack& weights, double p,
                   std::span<const std::uint32_t> start = {},
                   std::span<const std::uint32_t> end = {});

}  // namespace bsdelab
