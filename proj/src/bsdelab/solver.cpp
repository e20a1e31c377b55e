#include "bsdelab/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

namespace {

// Scalar implicit step: the monotone driver makes G(y) = y - m - dt g(y)
// strictly increasing whenever dt mu < 1, so a bracketed bisection with a
// secant midpoint is unconditionally safe even for stiff exponentials.
bool implicit_step_scalar(const Generator& gen, const NodeCtx& ctx, double m,
                          std::span<const double> z, double dt, double& y_out,
                          int max_iters) {
  double gy = 0.0;
  auto G = [&](double y) {
    gen.driver(ctx, {&y, 1}, z, {&gy, 1});
    return y - m - dt * gy;
  };
  const double scale = 1.0 + std::fabs(m);
  double lo = m, hi = m;
  double Gm = G(m);
  if (!std::isfinite(Gm)) return false;
  if (std::fabs(Gm) <= 1e-13 * scale) {
    y_out = m;
    return true;
  }
  double h = 0.5 * scale;
  double Glo = Gm, Ghi = Gm;
  for (int it = 0; it < 200; ++it) {
    if (Gm > 0.0) {
      lo = lo - h;
      Glo = G(lo);
      if (!std::isfinite(Glo)) {
        // overshot into an overflow region: shrink the expansion
        lo += h;
        h *= 0.25;
        continue;
      }
      if (Glo <= 0.0) break;
    } else {
      hi = hi + h;
      Ghi = G(hi);
      if (!std::isfinite(Ghi)) {
        hi -= h;
        h *= 0.25;
        continue;
      }
      if (Ghi >= 0.0) break;
    }
    h *= 2.0;
    if (it == 199) return false;
  }
  // bisection alternating with a safeguarded secant; plain midpoints on even
  // rounds keep the interval halving even when one endpoint value is
  // astronomically steep and poisons the secant
  for (int it = 0; it < std::max(max_iters, 200); ++it) {
    const double width = hi - lo;
    double mid = 0.5 * (lo + hi);
    if ((it & 1) != 0 && Ghi != Glo) {
      const double sec = lo - Glo * width / (Ghi - Glo);
      if (sec > lo + 0.01 * width && sec < hi - 0.01 * width) mid = sec;
    }
    const double Gmid = G(mid);
    if (!std::isfinite(Gmid)) return false;
    const double wscale = std::max({1.0, std::fabs(lo), std::fabs(hi)});
    if (std::fabs(Gmid) <= 1e-13 * (1.0 + std::fabs(mid)) || width <= 4e-16 * wscale) {
      y_out = mid;
      return true;
    }
    if (Gmid > 0.0) {
      hi = mid;
      Ghi = Gmid;
    } else {
      lo = mid;
      Glo = Gmid;
    }
  }
  return false;
}

// Damped fixed point for y = m + dt g(t, y, z); Newton fallback when the
// damping stalls (the monotone drivers make the implicit step contractive
// only one-sidedly, so plain iteration can crawl on stiff nodes).
bool implicit_step(const Generator& gen, const NodeCtx& ctx, std::span<const double> m,
                   std::span<const double> z, double dt, std::span<double> y,
                   int max_iters) {
  const int k = static_cast<int>(m.size());
  if (k == 1) return implicit_step_scalar(gen, ctx, m[0], z, dt, y[0], max_iters);

  std::vector<double> gy(k), F(k);
  for (int c = 0; c < k; ++c) y[c] = m[c];
  double omega = 1.0;
  double best_res = std::numeric_limits<double>::infinity();
  const int damped_iters = std::max(max_iters / 2, 10);

  for (int it = 0; it < damped_iters; ++it) {
    gen.driver(ctx, y, z, gy);
    double res = 0.0, fscale = 1.0;
    for (int c = 0; c < k; ++c) {
      F[c] = m[c] + dt * gy[c];
      const double r = F[c] - y[c];
      res += r * r;
      fscale += F[c] * F[c];
    }
    res = std::sqrt(res);
    if (!std::isfinite(res)) {
      // restart from the predictor with heavy damping
      for (int c = 0; c < k; ++c) y[c] = m[c];
      omega = std::max(omega * 0.25, 1.0 / 4096.0);
      best_res = std::numeric_limits<double>::infinity();
      continue;
    }
    if (res <= 1e-12 * std::sqrt(fscale)) {
      for (int c = 0; c < k; ++c) y[c] = F[c];
      return true;
    }
    if (res >= best_res) {
      omega = std::max(omega * 0.5, 1.0 / 4096.0);
    } else {
      best_res = res;
    }
    for (int c = 0; c < k; ++c) y[c] += omega * (F[c] - y[c]);
  }

  // Newton on G(y) = y - m - dt g(y) with a finite-difference Jacobian,
  // restarted from the predictor.
  for (int c = 0; c < k; ++c) y[c] = m[c];
  Eigen::MatrixXd J(k, k);
  Eigen::VectorXd G(k), delta(k);
  std::vector<double> ypert(k), gpert(k);
  for (int it = damped_iters; it < std::max(max_iters, damped_iters + 50); ++it) {
    gen.driver(ctx, y, z, gy);
    double gnorm = 0.0, yscale = 1.0;
    for (int c = 0; c < k; ++c) {
      G(c) = y[c] - m[c] - dt * gy[c];
      gnorm += G(c) * G(c);
      yscale += y[c] * y[c];
    }
    if (!std::isfinite(gnorm)) return false;
    if (std::sqrt(gnorm) <= 1e-12 * std::sqrt(yscale)) return true;
    for (int j = 0; j < k; ++j) {
      for (int c = 0; c < k; ++c) ypert[c] = y[c];
      const double h = 1e-7 * (1.0 + std::fabs(y[j]));
      ypert[j] += h;
      gen.driver(ctx, ypert, z, gpert);
      for (int c = 0; c < k; ++c) {
        J(c, j) = (c == j ? 1.0 : 0.0) - dt * (gpert[c] - gy[c]) / h;
      }
    }
    delta = J.fullPivLu().solve(-G);
    if (!delta.allFinite()) return false;
    for (int c = 0; c < k; ++c) y[c] += delta(c);
  }
  return false;
}

struct CoreResult {
  std::vector<double> Y;            // [path][node][k]
  std::vector<double> Z;            // [path][step][k*d]
  std::vector<double> node_sumsq;   // regression martingale gap, per node
  std::vector<double> node_count;
};

// Per-node regressions depend only on (bundle, basis, active set); Picard
// iterations reuse them, only the targets change.
struct RegressionCache {
  std::vector<std::unique_ptr<NodeRegression>> per_node;
};

// One backward sweep for a z-independent (or z-frozen) driver on per-path
// node ranges [start, end], with the given values at the end nodes.
CoreResult backward_core(const Generator& gen, const GeneratorAux& aux,
                         const PathBundle& bundle, std::span<const std::uint32_t> start,
                         std::span<const std::uint32_t> end,
                         std::span<const double> terminal, const SolverOptions& opts,
                         RegressionCache* cache = nullptr) {
  const int k = gen.k();
  const int d = bundle.d;
  const int kd = k * d;
  const std::size_t n_paths = bundle.n_paths;
  const std::size_t n_nodes = bundle.n_nodes();
  const std::size_t n_steps = bundle.grid.n_steps;

  CoreResult res;
  res.Y.assign(n_paths * n_nodes * k, 0.0);
  res.Z.assign(n_paths * n_steps * kd, 0.0);
  res.node_sumsq.assign(n_nodes, 0.0);
  res.node_count.assign(n_nodes, 0.0);

  std::uint32_t hi = 0, lo = static_cast<std::uint32_t>(n_steps);
  for (std::size_t p = 0; p < n_paths; ++p) {
    if (end[p] < start[p]) throw ConfigError("backward_core: end < start on a path");
    hi = std::max(hi, end[p]);
    lo = std::min(lo, start[p]);
    for (int c = 0; c < k; ++c) {
      res.Y[(p * n_nodes + end[p]) * k + c] = terminal[p * k + c];
    }
  }
  if (hi == 0) return res;

  std::vector<std::uint32_t> active;
  active.reserve(n_paths);
  std::vector<double> target(n_paths), m_fit(n_paths * static_cast<std::size_t>(k));
  if (cache && cache->per_node.empty()) cache->per_node.resize(n_nodes);

  for (std::uint32_t i = hi; i-- > lo;) {
    active.clear();
    for (std::size_t p = 0; p < n_paths; ++p) {
      if (start[p] <= i && i < end[p]) active.push_back(static_cast<std::uint32_t>(p));
    }
    if (active.empty()) continue;
    const std::size_t n_act = active.size();
    const double dt = bundle.grid.step(i);

    std::unique_ptr<NodeRegression> local;
    if (cache) {
      if (!cache->per_node[i]) {
        cache->per_node[i] =
            std::make_unique<NodeRegression>(bundle, opts.basis, active, i);
      }
    } else {
      local = std::make_unique<NodeRegression>(bundle, opts.basis, active, i);
    }
    const NodeRegression& reg = cache ? *cache->per_node[i] : *local;

    // E[Y_{i+1} | F_i] per component
    for (int c = 0; c < k; ++c) {
      for (std::size_t r = 0; r < n_act; ++r) {
        target[r] = res.Y[(active[r] * n_nodes + i + 1) * k + c];
      }
      auto fitted = reg.fit(std::span<const double>(target.data(), n_act));
      for (std::size_t r = 0; r < n_act; ++r) m_fit[r * k + c] = fitted[r];
    }

    // Z from the centered martingale-increment regression:
    // Z_ce = E[(Y_{i+1,c} - m_c) dB_e / dt | F_i]; centering strips the
    // predictable part and keeps the regression noise proportional to dt.
    for (int c = 0; c < k; ++c) {
      for (int e = 0; e < d; ++e) {
        for (std::size_t r = 0; r < n_act; ++r) {
          const std::size_t p = active[r];
          const double resid =
              res.Y[(p * n_nodes + i + 1) * k + c] - m_fit[r * k + c];
          target[r] = resid * bundle.incr(p, i, e) / dt;
        }
        auto fitted = reg.fit(std::span<const double>(target.data(), n_act));
        for (std::size_t r = 0; r < n_act; ++r) {
          res.Z[(active[r] * n_steps + i) * kd + c * d + e] = fitted[r];
        }
      }
    }

    // implicit y update
    std::vector<std::string> errors(block_count(n_act));
    parallel_blocks(n_act, [&](std::size_t b0, std::size_t b1, std::size_t blk) {
      for (std::size_t r = b0; r < b1; ++r) {
        const std::size_t p = active[r];
        NodeCtx ctx{&bundle, &aux, p, i};
        std::span<const double> zrow(&res.Z[(p * n_steps + i) * kd], kd);
        std::span<const double> mrow(&m_fit[r * k], k);
        std::span<double> yrow(&res.Y[(p * n_nodes + i) * k], k);
        if (!implicit_step(gen, ctx, mrow, zrow, dt, yrow, opts.implicit_max_iters)) {
          if (errors[blk].empty()) {
            errors[blk] = "implicit step failed to converge at node " +
                          std::to_string(i) + " path " + std::to_string(p);
          }
          return;
        }
      }
    });
    for (const auto& e : errors) {
      if (!e.empty()) throw SchemeError(e);
    }

    // martingale gap |m - Y_{i+1} + Z dB| per active path
    double sumsq = 0.0;
    for (std::size_t r = 0; r < n_act; ++r) {
      const std::size_t p = active[r];
      double s = 0.0;
      for (int c = 0; c < k; ++c) {
        double zdb = 0.0;
        for (int e = 0; e < d; ++e) {
          zdb += res.Z[(p * n_steps + i) * kd + c * d + e] * bundle.incr(p, i, e);
        }
        const double rr = m_fit[r * k + c] - res.Y[(p * n_nodes + i + 1) * k + c] + zdb;
        s += rr * rr;
      }
      sumsq += s;
    }
    res.node_sumsq[i] = sumsq;
    res.node_count[i] = static_cast<double>(n_act);
  }
  return res;
}

std::vector<double> finalize_rms(const CoreResult& core) {
  std::vector<double> rms(core.node_sumsq.size(), 0.0);
  for (std::size_t i = 0; i < rms.size(); ++i) {
    if (core.node_count[i] > 0) rms[i] = std::sqrt(core.node_sumsq[i] / core.node_count[i]);
  }
  return rms;
}

void freeze_past_end(DiscreteSolution& sol, std::span<const double> xi) {
  const std::size_t n_nodes = sol.n_steps + 1;
  for (std::size_t p = 0; p < sol.n_paths; ++p) {
    for (std::size_t i = sol.end[p]; i < n_nodes; ++i) {
      for (int c = 0; c < sol.k; ++c) {
        sol.Y[(p * n_nodes + i) * sol.k + c] = xi[p * sol.k + c];
      }
    }
  }
}

struct RangeSolution {
  std::vector<double> Y, Z;
  std::vector<double> history;
  std::vector<double> node_rms;
  int iterations = 0;
};

// Picard loop restricted to per-path node ranges; a z-independent driver
// reaches its fixed point in the single backward sweep.
RangeSolution picard_on_range(std::shared_ptr<const Generator> gen,
                              const GeneratorAux& aux, const PathBundle& bundle,
                              const SolverOptions& opts,
                              std::span<const std::uint32_t> start,
                              std::span<const std::uint32_t> end,
                              std::span<const double> terminal,
                              const WeightTrack& picard_weights,
                              std::span<const double> z_init = {}) {
  RangeSolution out;
  if (!gen->depends_on_z()) {
    CoreResult core = backward_core(*gen, aux, bundle, start, end, terminal, opts);
    out.Y = std::move(core.Y);
    out.Z = std::move(core.Z);
    out.node_rms = finalize_rms(core);
    out.iterations = 1;
    return out;
  }

  const auto declared = gen->assumptions();
  if (!declared.count("H5") && !declared.count("H6") && !declared.count("H6'")) {
    throw ConfigError("solve_picard: z-coupled driver must declare H5 or H6");
  }

  const int k = gen->k();
  const int d = bundle.d;
  const std::size_t n_steps = bundle.grid.n_steps;
  std::vector<double> Yprev(bundle.n_paths * bundle.n_nodes() * k, 0.0);
  auto Zprev = std::make_shared<std::vector<double>>(
      bundle.n_paths * n_steps * static_cast<std::size_t>(k * d), 0.0);
  if (!z_init.empty()) {
    if (z_init.size() != Zprev->size()) {
      throw ConfigError("picard: z warm start has the wrong shape");
    }
    Zprev->assign(z_init.begin(), z_init.end());
  }
  RegressionCache cache;

  for (int n = 1; n <= opts.picard_max_iters; ++n) {
    auto frozen = std::make_shared<FrozenZGenerator>(gen, Zprev, n_steps);
    CoreResult core =
        backward_core(*frozen, aux, bundle, start, end, terminal, opts, &cache);
    const double dist = hp_distance(bundle, core.Y, Yprev, core.Z, *Zprev, k, d,
                                    picard_weights, opts.q, start, end);
    out.history.push_back(dist);
    Yprev = std::move(core.Y);
    Zprev = std::make_shared<std::vector<double>>(std::move(core.Z));
    out.node_rms = finalize_rms(core);
    out.iterations = n;
    if (dist <= opts.picard_tol) break;
    const std::size_t h = out.history.size();
    if (h >= 3 && out.history[h - 1] >= out.history[h - 2] &&
        out.history[h - 2] >= out.history[h - 3] &&
        out.history[h - 1] > std::max(opts.picard_tol, 1e-13)) {
      throw SolverDivergence("picard iteration failed to contract over 3 iterations",
                             out.history);
    }
  }
  out.Y = std::move(Yprev);
  out.Z = std::move(*Zprev);
  return out;
}

DiscreteSolution make_solution(const PathBundle& bundle, int k, const std::string& scheme,
                               const SolverOptions& opts) {
  DiscreteSolution sol;
  sol.n_paths = bundle.n_paths;
  sol.k = k;
  sol.d = bundle.d;
  sol.n_steps = bundle.grid.n_steps;
  sol.scheme = scheme;
  sol.basis_desc = opts.basis.describe();
  sol.start.assign(bundle.n_paths, 0);
  sol.end = bundle.tau_index;
  return sol;
}

}  // namespace

std::vector<double> terminal_values(const Generator& gen, const GeneratorAux& aux,
                                    const PathBundle& bundle) {
  const int k = gen.k();
  std::vector<double> xi(bundle.n_paths * static_cast<std::size_t>(k));
  parallel_blocks(bundle.n_paths, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t p = b0; p < b1; ++p) {
      NodeCtx ctx{&bundle, &aux, p, bundle.tau_index[p]};
      gen.terminal(ctx, std::span<double>(&xi[p * k], k));
    }
  });
  return xi;
}

DiscreteSolution solve_backward_zfree(std::shared_ptr<const Generator> gen,
                                      const GeneratorAux& aux,
                                      std::span<const double> xi,
                                      const PathBundle& bundle,
                                      const SolverOptions& opts) {
  if (gen->depends_on_z()) {
    throw ConfigError("solve_backward_zfree: driver depends on z");
  }
  DiscreteSolution sol = make_solution(bundle, gen->k(), "zfree", opts);
  CoreResult core = backward_core(*gen, aux, bundle, sol.start, sol.end, xi, opts);
  sol.Y = std::move(core.Y);
  sol.Z = std::move(core.Z);
  sol.node_residual_rms = finalize_rms(core);
  sol.iterations = 1;
  freeze_past_end(sol, xi);
  return sol;
}

DiscreteSolution solve_picard(std::shared_ptr<const Generator> gen,
                              const GeneratorAux& aux, std::span<const double> xi,
                              const PathBundle& bundle, const WeightParams& params,
                              const SolverOptions& opts) {
  DiscreteSolution sol = make_solution(bundle, gen->k(), "picard", opts);
  const WeightTrack picard_weights =
      accumulate_weight(bundle, params, WeightVariant::BetaMuOnly);
  RangeSolution rs = picard_on_range(gen, aux, bundle, opts, sol.start, sol.end, xi,
                                     picard_weights);
  sol.Y = std::move(rs.Y);
  sol.Z = std::move(rs.Z);
  sol.node_residual_rms = std::move(rs.node_rms);
  sol.picard_history = std::move(rs.history);
  sol.iterations = rs.iterations;
  freeze_past_end(sol, xi);
  return sol;
}

SubdivisionPlan build_subdivision(const PathBundle& bundle, const WeightParams& params,
                                  double q, int N) {
  if (!(q > 1.0)) throw ConfigError("build_subdivision: q must be > 1");
  if (N < 1) throw ConfigError("build_subdivision: N must be >= 1");
  if (!bundle.has_track("nu")) throw ConfigError("build_subdivision: nu track missing");
  params.validate();

  SubdivisionPlan plan;
  plan.N = N;
  plan.q = q;
  plan.threshold = std::pow(params.M, q / 2.0) / static_cast<double>(N);
  plan.tau_js.assign(N + 1, std::vector<std::uint32_t>(bundle.n_paths, 0));

  auto nu = bundle.track("nu");
  const std::size_t n_nodes = bundle.n_nodes();
  for (std::size_t p = 0; p < bundle.n_paths; ++p) {
    const std::uint32_t tau = bundle.tau_index[p];
    // left-rule prefix integral of nu^2 at every node
    std::vector<double> prefix(n_nodes, 0.0);
    for (std::size_t i = 1; i < n_nodes; ++i) {
      const double v = nu[p * n_nodes + (i - 1)];
      prefix[i] = prefix[i - 1] + v * v * bundle.grid.step(i - 1);
    }
    plan.tau_js[0][p] = 0;
    for (int j = 1; j <= N; ++j) {
      // (int nu^2)^{q/2} >= j M^{q/2}/N  <=>  int nu^2 >= M (j/N)^{2/q}
      const double level =
          params.M * std::pow(static_cast<double>(j) / static_cast<double>(N), 2.0 / q);
      std::uint32_t hit = tau;
      for (std::uint32_t i = plan.tau_js[j - 1][p]; i <= tau; ++i) {
        if (prefix[i] >= level) {
          hit = i;
          break;
        }
      }
      plan.tau_js[j][p] = std::max(hit, plan.tau_js[j - 1][p]);
    }
    plan.tau_js[N][p] = tau;  // the last subdivision time is tau itself
  }
  return plan;
}

DiscreteSolution solve_subdivided(std::shared_ptr<const Generator> gen,
                                  const GeneratorAux& aux, std::span<const double> xi,
                                  const PathBundle& bundle, const WeightParams& params,
                                  const SubdivisionPlan& plan, const SolverOptions& opts) {
  if (plan.tau_js.empty() ||
      plan.tau_js[0].size() != bundle.n_paths) {
    throw ConfigError("solve_subdivided: plan does not match the bundle");
  }
  const int k = gen->k();
  DiscreteSolution sol = make_solution(bundle, k, "subdivided", opts);
  const std::size_t n_nodes = bundle.n_nodes();
  sol.Y.assign(bundle.n_paths * n_nodes * k, 0.0);
  sol.Z.assign(bundle.n_paths * sol.n_steps * static_cast<std::size_t>(k * bundle.d), 0.0);
  sol.node_residual_rms.assign(n_nodes, 0.0);
  freeze_past_end(sol, xi);  // seeds Y = xi at and past tau

  const WeightTrack picard_weights =
      accumulate_weight(bundle, params, WeightVariant::BetaMuOnly);
  sol.interval_histories.assign(plan.N, {});
  std::vector<double> terminal_j(bundle.n_paths * static_cast<std::size_t>(k));
  const int kd = k * bundle.d;

  for (int j = plan.N; j >= 1; --j) {
    const auto& start_j = plan.tau_js[j - 1];
    const auto& end_j = plan.tau_js[j];
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
      for (int c = 0; c < k; ++c) {
        terminal_j[p * k + c] = sol.Y[(p * n_nodes + end_j[p]) * k + c];
      }
    }
    try {
      RangeSolution rs = picard_on_range(gen, aux, bundle, opts, start_j, end_j,
                                         terminal_j, picard_weights);
      for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        for (std::uint32_t i = start_j[p]; i < end_j[p]; ++i) {
          for (int c = 0; c < k; ++c) {
            sol.Y[(p * n_nodes + i) * k + c] = rs.Y[(p * n_nodes + i) * k + c];
          }
          for (int cell = 0; cell < kd; ++cell) {
            sol.Z[(p * sol.n_steps + i) * kd + cell] = rs.Z[(p * sol.n_steps + i) * kd + cell];
          }
        }
      }
      for (std::size_t i = 0; i < n_nodes; ++i) {
        if (rs.node_rms[i] > 0.0) sol.node_residual_rms[i] = rs.node_rms[i];
      }
      sol.interval_histories[j - 1] = rs.history;
      sol.picard_history.insert(sol.picard_history.end(), rs.history.begin(),
                                rs.history.end());
      sol.iterations += rs.iterations;
    } catch (SolverDivergence& e) {
      throw SolverDivergence("interval " + std::to_string(j) + ": " + e.what(),
                             e.picard_history);
    }
  }
  return sol;
}

std::pair<DiscreteSolution, std::vector<double>> solve_via_truncation(
    std::shared_ptr<const Generator> gen, const GeneratorAux& aux,
    std::span<const double> xi, const PathBundle& bundle, const WeightParams& params,
    std::span<const int> n_schedule, const SolverOptions& opts) {
  if (n_schedule.empty()) throw ConfigError("solve_via_truncation: empty schedule");
  for (std::size_t i = 0; i < n_schedule.size(); ++i) {
    if (n_schedule[i] < 1 || (i > 0 && n_schedule[i] <= n_schedule[i - 1])) {
      throw ConfigError("solve_via_truncation: schedule must be increasing positive");
    }
  }
  auto weights = std::make_shared<WeightTrack>(
      accumulate_weight(bundle, params, WeightVariant::FullA));
  const WeightTrack picard_weights =
      accumulate_weight(bundle, params, WeightVariant::BetaMuOnly);

  DiscreteSolution last;
  std::vector<double> history;
  bool have_prev = false;
  DiscreteSolution prev;
  for (int n : n_schedule) {
    TruncatedData td = truncated_data(gen, xi, n, weights);
    // consecutive ranks solve near-identical problems: reuse the previous
    // Z as the Picard starting point
    DiscreteSolution sol = make_solution(bundle, td.gen_n->k(), "picard", opts);
    RangeSolution rs = picard_on_range(
        td.gen_n, aux, bundle, opts, sol.start, sol.end, td.xi_n, picard_weights,
        have_prev ? std::span<const double>(prev.Z) : std::span<const double>{});
    sol.Y = std::move(rs.Y);
    sol.Z = std::move(rs.Z);
    sol.node_residual_rms = std::move(rs.node_rms);
    sol.picard_history = std::move(rs.history);
    sol.iterations = rs.iterations;
    freeze_past_end(sol, td.xi_n);
    if (have_prev) {
      history.push_back(hp_distance(bundle, sol.Y, prev.Y, sol.Z, prev.Z, sol.k, sol.d,
                                    *weights, params.p));
    }
    prev = sol;
    last = std::move(sol);
    have_prev = true;
  }
  last.scheme = "truncation";
  last.cauchy_history = history;
  return {std::move(last), history};
}

ResidualReport residual_report(const DiscreteSolution& sol, const Generator& gen,
                               const GeneratorAux& aux, const PathBundle& bundle,
                               std::span<const double> xi,
                               const RegressionBasis& basis) {
  ResidualReport rep;
  const int k = sol.k;
  const int d = sol.d;
  const int kd = k * d;
  const std::size_t n_nodes = sol.n_steps + 1;

  std::vector<double> gy(k), yrow(k);
  std::vector<double> all;
  for (std::size_t p = 0; p < sol.n_paths; ++p) {
    for (std::uint32_t i = sol.start[p]; i < sol.end[p]; ++i) {
      NodeCtx ctx{&bundle, &aux, p, i};
      for (int c = 0; c < k; ++c) yrow[c] = sol.y_at(p, i, c);
      std::span<const double> zrow(&sol.Z[(p * sol.n_steps + i) * kd], kd);
      gen.driver(ctx, yrow, zrow, gy);
      const double dt = bundle.grid.step(i);
      double s = 0.0;
      for (int c = 0; c < k; ++c) {
        double zdb = 0.0;
        for (int e = 0; e < d; ++e) zdb += zrow[c * d + e] * bundle.incr(p, i, e);
        const double r = sol.y_at(p, i, c) - sol.y_at(p, i + 1, c) - gy[c] * dt + zdb;
        s += r * r;
      }
      const double resid = std::sqrt(s);
      all.push_back(resid);
      if (resid > rep.max_abs) {
        rep.max_abs = resid;
        rep.max_path = p;
        rep.max_node = i;
      }
    }
    double tm = 0.0;
    for (int c = 0; c < k; ++c) {
      const double r = sol.y_at(p, sol.end[p], c) - xi[p * k + c];
      tm += r * r;
    }
    rep.terminal_mismatch = std::max(rep.terminal_mismatch, std::sqrt(tm));
  }
  rep.mean_abs = all.empty() ? 0.0 : pairwise_sum(all) / static_cast<double>(all.size());
  // One-step residuals are zero-mean regression noise, so their cumulative
  // effect on Y grows like sqrt(n_steps), not n_steps.
  rep.scheme_error_estimate =
      rep.mean_abs * std::sqrt(static_cast<double>(sol.n_steps));

  // per-node regression gap of Y_i against the basis
  rep.martingale_rms.assign(n_nodes, 0.0);
  std::vector<std::uint32_t> active;
  std::vector<double> target;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    active.clear();
    for (std::size_t p = 0; p < sol.n_paths; ++p) {
      if (sol.start[p] <= i && i < sol.end[p]) active.push_back(static_cast<std::uint32_t>(p));
    }
    if (active.size() < 2) continue;
    NodeRegression reg(bundle, basis, active, i);
    double sumsq = 0.0;
    for (int c = 0; c < k; ++c) {
      target.resize(active.size());
      for (std::size_t r = 0; r < active.size(); ++r) {
        target[r] = sol.y_at(active[r], i, c);
      }
      auto fitted = reg.fit(target);
      for (std::size_t r = 0; r < active.size(); ++r) {
        const double rr = target[r] - fitted[r];
        sumsq += rr * rr;
      }
    }
    rep.martingale_rms[i] = std::sqrt(sumsq / static_cast<double>(active.size()));
  }
  return rep;
}

}  // namespace bsdelab
