#include "bsdelab/weights.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

void WeightParams::validate() const {
  if (!(p > 0.0)) throw ConfigError("WeightParams: p must be > 0");
  if (!(beta >= 1.0)) throw ConfigError("WeightParams: beta must be >= 1");
  if (!(rho > 1.0)) throw ConfigError("WeightParams: rho must be > 1");
  if (!(M > 0.0)) throw ConfigError("WeightParams: M must be > 0");
  if (!(l > 0.0 && l < 1.0)) throw ConfigError("WeightParams: l must be in (0,1)");
}

std::size_t WeightTrack::saturated_count() const {
  std::size_t c = 0;
  for (auto f : saturated) c += f;
  return c;
}

namespace {

WeightTrack from_exponent_impl(const PathBundle& b, WeightVariant variant,
                               const std::function<double(std::size_t, std::size_t)>& a_at) {
  WeightTrack t;
  t.n_paths = b.n_paths;
  t.n_nodes = b.n_nodes();
  t.variant = variant;
  t.a_values.resize(t.n_paths * t.n_nodes);
  t.cum_integral.resize(t.n_paths * t.n_nodes);
  t.weight.resize(t.n_paths * t.n_nodes);
  t.saturated.assign(t.n_paths, 0);

  parallel_blocks(b.n_paths, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t p = begin; p < end; ++p) {
      double cum = 0.0;
      bool sat = false;
      for (std::size_t i = 0; i < t.n_nodes; ++i) {
        const double a = a_at(p, i);
        t.a_values[p * t.n_nodes + i] = a;
        t.cum_integral[p * t.n_nodes + i] = cum;
        t.weight[p * t.n_nodes + i] = std::exp(std::min(cum, kSaturationLogCap + 9.0));
        if (cum > kSaturationLogCap) sat = true;
        if (i < b.grid.n_steps) cum += a * b.grid.step(i);  // left rule
      }
      t.saturated[p] = sat ? 1 : 0;
    }
  });
  return t;
}

}  // namespace

WeightTrack accumulate_weight(const PathBundle& b, const WeightParams& params,
                              WeightVariant variant) {
  params.validate();
  if (variant == WeightVariant::FullA && !(params.p > 1.0)) {
    throw ConfigError("accumulate_weight: the full-a exponent requires p > 1");
  }
  const std::size_t n_nodes = b.n_nodes();
  const bool has_mu = b.has_track("mu");
  const bool has_nu = b.has_track("nu");
  std::span<const double> mu = has_mu ? b.track("mu") : std::span<const double>{};
  std::span<const double> nu = has_nu ? b.track("nu") : std::span<const double>{};
  const double nu_coef =
      variant == WeightVariant::FullA ? params.rho / (2.0 * params.pm1_capped()) : 0.0;

  auto a_at = [&](std::size_t p, std::size_t i) {
    double a = 0.0;
    if (has_mu) a += params.beta * mu[p * n_nodes + i];
    if (variant == WeightVariant::FullA && has_nu) {
      const double v = nu[p * n_nodes + i];
      a += nu_coef * v * v;
    }
    return a;
  };
  WeightTrack t = from_exponent_impl(b, variant, a_at);
  validate_weight_track(t);
  return t;
}

WeightTrack weight_from_exponent(const PathBundle& b, std::span<const double> a_values) {
  if (a_values.size() != b.n_paths * b.n_nodes()) {
    throw ConfigError("weight_from_exponent: exponent track size mismatch");
  }
  const std::size_t n_nodes = b.n_nodes();
  return from_exponent_impl(b, WeightVariant::FullA,
                            [&](std::size_t p, std::size_t i) { return a_values[p * n_nodes + i]; });
}

std::vector<double> modified_alpha(const PathBundle& b, std::span<const double> alpha,
                                   std::span<const double> mu, double beta) {
  const std::size_t n_nodes = b.n_nodes();
  if (alpha.size() != b.n_paths * n_nodes || mu.size() != b.n_paths * n_nodes) {
    throw ConfigError("modified_alpha: track size mismatch");
  }
  std::vector<double> out(alpha.size());
  parallel_blocks(b.n_paths, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t p = begin; p < end; ++p) {
      double cum_mu = 0.0;
      for (std::size_t i = 0; i < n_nodes; ++i) {
        const double cap = std::exp(-beta * cum_mu - b.t(i));
        out[p * n_nodes + i] = std::min(alpha[p * n_nodes + i], cap);
        if (i < b.grid.n_steps) cum_mu += mu[p * n_nodes + i] * b.grid.step(i);
      }
    }
  });
  return out;
}

void validate_weight_track(const WeightTrack& t) {
  for (std::size_t p = 0; p < t.n_paths; ++p) {
    if (t.cum(p, 0) != 0.0 || t.w(p, 0) != 1.0) {
      throw DataError("weight track: weight at node 0 must be exactly 1");
    }
    for (std::size_t i = 0; i + 1 < t.n_nodes; ++i) {
      if (t.a(p, i) < 0.0 || !std::isfinite(t.a(p, i))) {
        throw DataError("weight track: exponent must be finite and nonnegative");
      }
      if (t.cum(p, i + 1) < t.cum(p, i)) {
        throw DataError("weight track: cumulative integral must be non-decreasing");
      }
    }
  }
}

}  // namespace bsdelab
