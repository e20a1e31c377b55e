#include "bsdelab/estimates.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

AprioriBoundSpec apriori_spec_from_generator(const Generator& gen,
                                             const GeneratorAux& aux,
                                             const PathBundle& bundle, double p) {
  AprioriBoundSpec spec;
  spec.p = p;
  const std::size_t n = bundle.n_paths * bundle.n_nodes();
  spec.u.assign(n, 0.0);
  spec.v.assign(n, 0.0);
  spec.f.assign(n, 0.0);
  if (bundle.has_track("mu")) {
    auto mu = bundle.track("mu");
    std::copy(mu.begin(), mu.end(), spec.u.begin());
  }
  if (bundle.has_track("nu")) {
    auto nu = bundle.track("nu");
    std::copy(nu.begin(), nu.end(), spec.v.begin());
  }
  const int k = gen.k();
  const std::size_t n_nodes = bundle.n_nodes();
  parallel_blocks(bundle.n_paths, [&](std::size_t b0, std::size_t b1, std::size_t) {
    std::vector<double> g0(k), zero_y(k, 0.0), zero_z(k * bundle.d, 0.0);
    for (std::size_t pth = b0; pth < b1; ++pth) {
      const std::size_t tau = bundle.tau_index[pth];
      for (std::size_t i = 0; i <= tau; ++i) {
        NodeCtx ctx{&bundle, &aux, pth, i};
        gen.driver(ctx, zero_y, zero_z, g0);
        double s = 0.0;
        for (int c = 0; c < k; ++c) s += g0[c] * g0[c];
        spec.f[pth * n_nodes + i] = std::sqrt(s);
      }
    }
  });
  return spec;
}

WeightTrack abar_weights(const PathBundle& bundle, const AprioriBoundSpec& spec,
                         const WeightParams& params) {
  const std::size_t n_nodes = bundle.n_nodes();
  std::vector<double> a(bundle.n_paths * n_nodes);
  const bool with_v = spec.p > 1.0;
  const double v_coef =
      with_v ? params.rho / (2.0 * std::min(spec.p - 1.0, 1.0)) : 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = params.beta * spec.u[i] + (with_v ? v_coef * spec.v[i] * spec.v[i] : 0.0);
  }
  return weight_from_exponent(bundle, a);
}

namespace {

struct SideAccumulators {
  std::vector<double> z_term;    // (int e^{2cum}|Z|^2)^{p/2}
  std::vector<double> sup_term;  // sup e^{p cum}|Y|^p
  std::vector<double> f_term;    // (int e^{cum} f)^p
  std::vector<double> xi_term;   // e^{p cum(tau)}|xi|^p
  std::vector<std::uint8_t> excluded;
};

SideAccumulators accumulate_sides(const DiscreteSolution& sol,
                                  const AprioriBoundSpec& spec,
                                  const PathBundle& bundle, const WeightTrack& w,
                                  std::size_t t_node) {
  const int k = sol.k;
  const int kd = sol.k * sol.d;
  const double p = spec.p;
  const std::size_t n_nodes = bundle.n_nodes();
  SideAccumulators acc;
  acc.z_term.assign(bundle.n_paths, 0.0);
  acc.sup_term.assign(bundle.n_paths, 0.0);
  acc.f_term.assign(bundle.n_paths, 0.0);
  acc.xi_term.assign(bundle.n_paths, 0.0);
  acc.excluded.assign(bundle.n_paths, 0);

  parallel_blocks(bundle.n_paths, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t pth = b0; pth < b1; ++pth) {
      const std::size_t tau = bundle.tau_index[pth];
      const std::size_t i0 = std::min(t_node, tau);
      const double worst_exp = std::max({p, 2.0, 1.0}) * w.cum(pth, tau);
      if (w.saturated[pth] || worst_exp > kSaturationLogCap) {
        acc.excluded[pth] = 1;
        continue;
      }
      double zint = 0.0, fint = 0.0, sup = 0.0;
      for (std::size_t i = i0; i <= tau; ++i) {
        const double cum = w.cum(pth, i);
        double ynorm = 0.0;
        for (int c = 0; c < k; ++c) {
          const double yv = sol.y_at(pth, i, c);
          ynorm += yv * yv;
        }
        sup = std::max(sup, std::exp(p * cum) * std::pow(std::sqrt(ynorm), p));
        if (i < tau) {
          const double dt = bundle.grid.step(i);
          double znorm2 = 0.0;
          for (int cell = 0; cell < kd; ++cell) {
            const double zv = sol.z_at(pth, i, cell);
            znorm2 += zv * zv;
          }
          zint += std::exp(2.0 * cum) * znorm2 * dt;
          fint += std::exp(cum) * spec.f[pth * n_nodes + i] * dt;
        }
      }
      acc.z_term[pth] = std::pow(zint, p / 2.0);
      acc.f_term[pth] = std::pow(fint, p);
      acc.sup_term[pth] = sup;
      double xin = 0.0;
      for (int c = 0; c < k; ++c) {
        const double xv = sol.y_at(pth, tau, c);
        xin += xv * xv;
      }
      acc.xi_term[pth] = std::exp(p * w.cum(pth, tau)) * std::pow(std::sqrt(xin), p);
    }
  });
  return acc;
}

double excluded_mean(std::span<const double> v, std::span<const std::uint8_t> excl) {
  std::vector<double> used;
  used.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!excl[i]) used.push_back(v[i]);
  }
  if (used.empty()) throw DataError("estimate: every path saturated its weight");
  return pairwise_sum(used) / static_cast<double>(used.size());
}

EstimateReport make_report(const std::string& id, std::size_t t_node, double lhs,
                           double rhs, std::uint64_t seed, std::size_t saturated) {
  EstimateReport rep;
  rep.inequality_id = id;
  rep.t_node = t_node;
  rep.lhs = lhs;
  rep.rhs_without_constant = rhs;
  if (lhs == 0.0 && rhs == 0.0) {
    rep.empirical_ratio = 0.0;
    rep.zero_over_zero = true;
  } else {
    rep.empirical_ratio = lhs / rhs;
  }
  rep.seeds = {seed};
  rep.seed_ratios = {rep.empirical_ratio};
  rep.verdict = std::isfinite(rep.empirical_ratio) ? "bounded" : "unstable";
  rep.saturated_paths = saturated;
  return rep;
}

}  // namespace

EstimateReport apriori_zbound(const DiscreteSolution& sol, const AprioriBoundSpec& spec,
                              const PathBundle& bundle, const WeightParams& params,
                              std::size_t t_node) {
  const double p = spec.p;
  const std::size_t n_nodes = bundle.n_nodes();
  if (p <= 1.0) {
    // (2.2) needs int v^2 <= M pathwise
    for (std::size_t pth = 0; pth < bundle.n_paths; ++pth) {
      double vint = 0.0;
      for (std::size_t i = 0; i < bundle.tau_index[pth]; ++i) {
        const double vv = spec.v[pth * n_nodes + i];
        vint += vv * vv * bundle.grid.step(i);
      }
      if (vint > params.M + 1e-12) {
        throw DataError("apriori_zbound (2.2): int v^2 = " + std::to_string(vint) +
                        " exceeds M on path " + std::to_string(pth));
      }
    }
  }
  const WeightTrack w = abar_weights(bundle, spec, params);
  const SideAccumulators acc = accumulate_sides(sol, spec, bundle, w, t_node);
  const double lhs = excluded_mean(acc.z_term, acc.excluded);
  const double rhs = excluded_mean(acc.sup_term, acc.excluded) +
                     excluded_mean(acc.f_term, acc.excluded);
  std::size_t saturated = 0;
  for (auto e : acc.excluded) saturated += e;
  return make_report(p > 1.0 ? "P2.1-(2.1)" : "P2.1-(2.2)", t_node, lhs, rhs,
                     bundle.seed, saturated);
}

EstimateReport apriori_full(const DiscreteSolution& sol, const AprioriBoundSpec& spec,
                            const PathBundle& bundle, const WeightParams& params,
                            std::size_t t_node) {
  if (!(spec.p > 1.0)) throw ConfigError("apriori_full: requires p > 1");
  const WeightTrack w = abar_weights(bundle, spec, params);
  const SideAccumulators acc = accumulate_sides(sol, spec, bundle, w, t_node);
  const double lhs = excluded_mean(acc.sup_term, acc.excluded) +
                     excluded_mean(acc.z_term, acc.excluded);
  const double rhs = excluded_mean(acc.xi_term, acc.excluded) +
                     excluded_mean(acc.f_term, acc.excluded);
  std::size_t saturated = 0;
  for (auto e : acc.excluded) saturated += e;
  return make_report("P2.2-(2.8)", t_node, lhs, rhs, bundle.seed, saturated);
}

EstimateReport combine_seed_reports(std::span<const EstimateReport> reports) {
  if (reports.empty()) throw ConfigError("combine_seed_reports: no reports");
  EstimateReport out = reports[0];
  out.seeds.clear();
  out.seed_ratios.clear();
  double lhs = 0.0, rhs = 0.0;
  for (const auto& r : reports) {
    if (r.inequality_id != out.inequality_id) {
      throw ConfigError("combine_seed_reports: mixed inequality ids");
    }
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
    out.seed_ratios.insert(out.seed_ratios.end(), r.seed_ratios.begin(),
                           r.seed_ratios.end());
    lhs += r.lhs;
    rhs += r.rhs_without_constant;
  }
  const double n = static_cast<double>(reports.size());
  out.lhs = lhs / n;
  out.rhs_without_constant = rhs / n;
  out.zero_over_zero = (out.lhs == 0.0 && out.rhs_without_constant == 0.0);
  out.empirical_ratio =
      out.zero_over_zero ? 0.0 : out.lhs / out.rhs_without_constant;

  double lo = out.seed_ratios[0], hi = out.seed_ratios[0], mean = 0.0;
  for (double r : out.seed_ratios) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    mean += r;
  }
  mean /= static_cast<double>(out.seed_ratios.size());
  const double spread = (mean != 0.0) ? (hi - lo) / std::fabs(mean) : 0.0;
  const bool finite = std::isfinite(out.empirical_ratio);
  out.verdict = (finite && spread <= 0.5) ? "bounded" : "unstable";
  return out;
}

CheckReport verify_assumption_A(const Generator& gen, const GeneratorAux& aux,
                                const AprioriBoundSpec& spec, const PathBundle& bundle,
                                std::size_t probes, std::uint64_t seed) {
  AssumptionATracks tracks{spec.u, spec.v, spec.f};
  return check_assumption_a(gen, aux, bundle, tracks, probes, seed);
}

}  // namespace bsdelab
