#include "bsdelab/norms.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

namespace {

const char* variant_name(WeightVariant v) {
  return v == WeightVariant::FullA ? "full_a" : "beta_mu_only";
}

// Averages per-path values excluding saturated paths, then applies the
// outer power with a delta-method standard error.
NormResult finish(const WeightTrack& weights, double p,
                  std::span<const double> per_path,
                  std::span<const std::uint8_t> excluded) {
  NormResult res;
  res.p = p;
  res.weight_variant = variant_name(weights.variant);
  std::vector<double> used;
  used.reserve(per_path.size());
  for (std::size_t i = 0; i < per_path.size(); ++i) {
    if (!excluded[i]) used.push_back(per_path[i]);
  }
  res.saturated_paths = per_path.size() - used.size();
  res.used_paths = used.size();
  if (used.empty()) throw DataError("norm: every path saturated its weight");
  const auto ms = mean_std(used);
  const double se_mean = ms.sd / std::sqrt(static_cast<double>(used.size()));
  if (p >= 1.0) {
    res.value = std::pow(ms.mean, 1.0 / p);
    res.std_error = (ms.mean > 0.0)
                        ? se_mean * res.value / (p * ms.mean)
                        : 0.0;
  } else {
    res.value = ms.mean;
    res.std_error = se_mean;
  }
  return res;
}

double vnorm(const double* v, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

std::uint32_t range_start(std::span<const std::uint32_t> start, std::size_t p) {
  return start.empty() ? 0u : start[p];
}
std::uint32_t range_end(std::span<const std::uint32_t> end, const PathBundle& b,
                        std::size_t p) {
  return end.empty() ? b.tau_index[p] : end[p];
}

}  // namespace

NormResult terminal_norm(const PathBundle& bundle, std::span<const double> xi,
                         int k, const WeightTrack& weights, double p) {
  if (!(p > 0.0)) throw ConfigError("terminal_norm: p must be > 0");
  if (bundle.n_paths == 0) throw ConfigError("terminal_norm: empty bundle");
  if (xi.size() != bundle.n_paths * static_cast<std::size_t>(k)) {
    throw ConfigError("terminal_norm: xi size mismatch");
  }
  std::vector<double> per_path(bundle.n_paths);
  std::vector<std::uint8_t> excl(bundle.n_paths, 0);
  parallel_blocks(bundle.n_paths, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t pth = b0; pth < b1; ++pth) {
      const double cum = weights.cum(pth, bundle.tau_index[pth]);
      if (weights.saturated[pth] || p * cum > kSaturationLogCap) {
        excl[pth] = 1;
        per_path[pth] = 0.0;
        continue;
      }
      per_path[pth] = std::exp(p * cum) * std::pow(vnorm(&xi[pth * k], k), p);
    }
  });
  return finish(weights, p, per_path, excl);
}

NormResult sup_norm(const PathBundle& bundle, std::span<const double> Y, int k,
                    const WeightTrack& weights, double p,
                    std::span<const std::uint32_t> start,
                    std::span<const std::uint32_t> end) {
  if (!(p > 0.0)) throw ConfigError("sup_norm: p must be > 0");
  if (bundle.n_paths == 0) throw ConfigError("sup_norm: empty bundle");
  const std::size_t n_nodes = bundle.n_nodes();
  if (Y.size() != bundle.n_paths * n_nodes * static_cast<std::size_t>(k)) {
    throw ConfigError("sup_norm: Y size mismatch");
  }
  std::vector<double> per_path(bundle.n_paths);
  std::vector<std::uint8_t> excl(bundle.n_paths, 0);
  parallel_blocks(bundle.n_paths, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t pth = b0; pth < b1; ++pth) {
      const std::uint32_t i0 = range_start(start, pth);
      const std::uint32_t i1 = range_end(end, bundle, pth);
      if (weights.saturated[pth] || p * weights.cum(pth, i1) > kSaturationLogCap) {
        excl[pth] = 1;
        per_path[pth] = 0.0;
        continue;
      }
      double sup = 0.0;
      for (std::uint32_t i = i0; i <= i1; ++i) {
        const double w = std::exp(p * weights.cum(pth, i));
        sup = std::max(sup, w * std::pow(vnorm(&Y[(pth * n_nodes + i) * k], k), p));
      }
      per_path[pth] = sup;
    }
  });
  return finish(weights, p, per_path, excl);
}

NormResult z_norm(const PathBundle& bundle, std::span<const double> Z, int kd,
                  const WeightTrack& weights, double p,
                  std::span<const std::uint32_t> start,
                  std::span<const std::uint32_t> end) {
  if (!(p > 0.0)) throw ConfigError("z_norm: p must be > 0");
  if (bundle.n_paths == 0) throw ConfigError("z_norm: empty bundle");
  const std::size_t n_steps = bundle.grid.n_steps;
  if (Z.size() != bundle.n_paths * n_steps * static_cast<std::size_t>(kd)) {
    throw ConfigError("z_norm: Z size mismatch");
  }
  std::vector<double> per_path(bundle.n_paths);
  std::vector<std::uint8_t> excl(bundle.n_paths, 0);
  parallel_blocks(bundle.n_paths, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t pth = b0; pth < b1; ++pth) {
      const std::uint32_t i0 = range_start(start, pth);
      const std::uint32_t i1 = range_end(end, bundle, pth);
      if (weights.saturated[pth] ||
          2.0 * weights.cum(pth, i1) > kSaturationLogCap) {
        excl[pth] = 1;
        per_path[pth] = 0.0;
        continue;
      }
      double integral = 0.0;
      for (std::uint32_t i = i0; i < i1; ++i) {
        const double w = std::exp(2.0 * weights.cum(pth, i));
        const double zn = vnorm(&Z[(pth * n_steps + i) * kd], kd);
        integral += w * zn * zn * bundle.grid.step(i);
      }
      per_path[pth] = std::pow(integral, p / 2.0);
    }
  });
  return finish(weights, p, per_path, excl);
}

NormResult class_D_norm(const PathBundle& bundle, std::span<const double> Y, int k,
                        const WeightTrack& weights,
                        const std::vector<StoppingTimeSpec>& family,
                        const std::vector<std::string>& labels) {
  if (family.empty()) throw ConfigError("class_D_norm: empty stopping family");
  const std::size_t n_nodes = bundle.n_nodes();
  if (Y.size() != bundle.n_paths * n_nodes * static_cast<std::size_t>(k)) {
    throw ConfigError("class_D_norm: Y size mismatch");
  }
  NormResult best;
  best.p = 1.0;
  best.weight_variant = weights.variant == WeightVariant::FullA ? "full_a" : "beta_mu_only";
  double best_value = -1.0;
  for (std::size_t m = 0; m < family.size(); ++m) {
    auto idx = realize_indices(bundle, family[m]);
    std::vector<double> per_path(bundle.n_paths);
    std::vector<std::uint8_t> excl(bundle.n_paths, 0);
    for (std::size_t pth = 0; pth < bundle.n_paths; ++pth) {
      // members of the family are implicitly capped at tau
      const std::uint32_t i = std::min(idx[pth], bundle.tau_index[pth]);
      const double cum = weights.cum(pth, i);
      if (weights.saturated[pth] || cum > kSaturationLogCap) {
        excl[pth] = 1;
        per_path[pth] = 0.0;
        continue;
      }
      per_path[pth] = std::exp(cum) * vnorm(&Y[(pth * n_nodes + i) * k], k);
    }
    NormResult r = finish(weights, 1.0, per_path, excl);
    if (r.value > best_value) {
      best_value = r.value;
      best = r;
      best.note = (m < labels.size()) ? labels[m] : ("member_" + std::to_string(m));
    }
  }
  return best;
}

double hp_distance(const PathBundle& bundle, std::span<const double> Y1,
                   std::span<const double> Y2, std::span<const double> Z1,
                   std::span<const double> Z2, int k, int d,
                   const WeightTrack& weights, double p,
                   std::span<const std::uint32_t> start,
                   std::span<const std::uint32_t> end) {
  std::vector<double> dY(Y1.size()), dZ(Z1.size());
  for (std::size_t i = 0; i < Y1.size(); ++i) dY[i] = Y1[i] - Y2[i];
  for (std::size_t i = 0; i < Z1.size(); ++i) dZ[i] = Z1[i] - Z2[i];
  const NormResult sy = sup_norm(bundle, dY, k, weights, p, start, end);
  const NormResult sz = z_norm(bundle, dZ, k * d, weights, p, start, end);
  return sy.value + sz.value;
}

}  // namespace bsdelab
