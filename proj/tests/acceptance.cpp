// Acceptance suite: one line per criterion, exit 0 only if every criterion
// holds. Desk scale (1e4 paths, 100 steps) unless a criterion states its own
// controls.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsdelab/comparison.hpp"
#include "bsdelab/estimates.hpp"
#include "bsdelab/expr.hpp"
#include "bsdelab/gallery.hpp"
#include "bsdelab/rng.hpp"
#include "bsdelab/solver.hpp"
#include "oracles.hpp"

using namespace bsdelab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("criterion %d [%s]: %s  (%s; %.1fs)\n", idx, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <typename Fn>
void run_criterion(int idx, const std::string& name, Fn fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    pass = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(idx, name, pass, detail, secs);
}

struct Solved {
  std::shared_ptr<Generator> gen;
  PathBundle bundle;
  GeneratorAux aux;
  std::vector<double> xi;
  DiscreteSolution sol;
  ResidualReport resid;
};

Solved solve_preset(const std::string& name, std::size_t n_paths, std::size_t n_steps,
                    std::uint64_t seed, const WeightParams& params,
                    const StoppingTimeSpec* stopping = nullptr,
                    const SolverOptions* opt_in = nullptr) {
  Solved s;
  s.gen = make_generator(name, params);
  const int d = s.gen->required_d() > 0 ? s.gen->required_d() : 1;
  s.bundle = simulate_brownian(build_grid(1.0, n_steps), n_paths, d, seed);
  s.aux = evaluate_coefficients(s.bundle, *s.gen);
  realize_stopping_time(s.bundle, stopping ? *stopping : default_stopping(name, 1.0));
  s.xi = terminal_values(*s.gen, s.aux, s.bundle);
  SolverOptions opts = opt_in ? *opt_in : SolverOptions{};
  s.sol = s.gen->depends_on_z()
              ? solve_picard(s.gen, s.aux, s.xi, s.bundle, params, opts)
              : solve_backward_zfree(s.gen, s.aux, s.xi, s.bundle, opts);
  s.resid = residual_report(s.sol, *s.gen, s.aux, s.bundle, s.xi, opts.basis);
  return s;
}

double mean_y0(const DiscreteSolution& sol) {
  double m = 0.0;
  for (std::size_t p = 0; p < sol.n_paths; ++p) m += sol.y_at(p, 0, 0);
  return m / static_cast<double>(sol.n_paths);
}

char buf[512];

// 1. closed-form solver checks
bool criterion1(std::string& detail) {
  WeightParams params;
  const std::size_t N = 10000, steps = 100;

  Solved mart = solve_preset("martingale", N, steps, 9001, params);
  const double se = 1.0 / std::sqrt(static_cast<double>(N));
  const double y0 = mean_y0(mart.sol);
  double zdev = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t i = 0; i < steps; ++i) zdev += std::fabs(mart.sol.z_at(p, i, 0) - 1.0);
  }
  zdev /= static_cast<double>(N * steps);

  Solved drift = solve_preset("drift", N, steps, 9002, params);
  double drift_worst = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t i = 0; i <= steps; ++i) {
      drift_worst = std::max(drift_worst,
                             std::fabs(drift.sol.y_at(p, i, 0) - (1.0 - drift.bundle.t(i))));
    }
  }

  Solved decay = solve_preset("decay", N, steps, 9003, params);
  const double decay_err = std::fabs(mean_y0(decay.sol) - std::exp(-1.0));
  const double oracle_gap = std::fabs(mean_y0(decay.sol) - oracle::decay_y0(steps, 0.01));

  std::snprintf(buf, sizeof(buf),
                "|Y0|=%.2e<=%.2e, mean|Z-1|=%.3f<=0.05, drift=%.2e<=1e-3, "
                "|Y0-e^-1|=%.2e<=5e-3 (recursion gap %.1e)",
                std::fabs(y0), 3.0 * se, zdev, drift_worst, decay_err, oracle_gap);
  detail = buf;
  return std::fabs(y0) <= 3.0 * se && zdev <= 0.05 && drift_worst <= 1e-3 &&
         decay_err <= 5e-3;
}

// 2. norm oracle equivalence on tiny bundles
bool criterion2(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed : {41ull, 42ull, 43ull}) {
    PathBundle b = simulate_brownian(build_grid(1.0, 4), 3, 1, seed);
    std::vector<double> a(b.n_paths * b.n_nodes());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 1.5 * uniform_draw(seed, 7, i);
    const WeightTrack w = weight_from_exponent(b, a);
    std::vector<double> steps(b.grid.n_steps);
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = b.grid.step(i);
    std::vector<double> Y(b.n_paths * b.n_nodes()), Z(b.n_paths * b.grid.n_steps),
        xi(b.n_paths);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = 2.0 * uniform_draw(seed, 8, i) - 1.0;
    for (std::size_t i = 0; i < Z.size(); ++i) Z[i] = 2.0 * uniform_draw(seed, 9, i) - 1.0;
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = 2.0 * uniform_draw(seed, 10, i) - 1.0;

    for (double p : {0.5, 1.0, 2.0, 3.0}) {
      auto rel = [](double a2, double b2) {
        return std::fabs(a2 - b2) / std::max({1e-300, std::fabs(a2), std::fabs(b2)});
      };
      worst = std::max(worst, rel(terminal_norm(b, xi, 1, w, p).value,
                                  oracle::terminal_norm(3, 1, xi, w.cum_integral,
                                                        b.n_nodes(), b.tau_index, p)));
      worst = std::max(worst, rel(sup_norm(b, Y, 1, w, p).value,
                                  oracle::sup_norm(3, 1, Y, w.cum_integral, b.n_nodes(),
                                                   b.tau_index, p)));
      worst = std::max(worst, rel(z_norm(b, Z, 1, w, p).value,
                                  oracle::z_norm(3, 1, Z, w.cum_integral, b.n_nodes(),
                                                 b.tau_index, steps, p)));
    }
  }
  std::snprintf(buf, sizeof(buf), "worst relative gap %.2e <= 1e-12", worst);
  detail = buf;
  return worst <= 1e-12;
}

// 3. truncation Cauchy property on preset ex3.10
bool criterion3(std::string& detail) {
  WeightParams params;  // p=2, beta=1, rho=2
  SolverOptions opts;
  opts.picard_tol = 1e-5;
  opts.truncation_schedule = {1, 2, 4, 8, 16};
  bool all_pass = true;
  std::string hists;
  for (std::uint64_t seed : {501ull, 502ull, 503ull}) {
    auto gen = make_generator("ex3.10", params);
    PathBundle b = simulate_brownian(build_grid(1.0, 100), 10000, 2, seed);
    GeneratorAux aux = evaluate_coefficients(b, *gen);
    realize_stopping_time(b, default_stopping("ex3.10", 1.0));
    auto xi = terminal_values(*gen, aux, b);
    auto [sol, hist] = solve_via_truncation(gen, aux, xi, b, params,
                                            opts.truncation_schedule, opts);
    bool ok = hist.size() == 4;
    for (std::size_t i = 2; i < hist.size() && ok; ++i) {
      ok = hist[i] <= hist[i - 1] * (1.0 + 1e-12);
    }
    ok = ok && hist.back() <= 0.25 * hist.front();
    all_pass = all_pass && ok;
    char h[128];
    std::snprintf(h, sizeof(h), " [%.3g %.3g %.3g %.3g]%s", hist[0], hist[1], hist[2],
                  hist[3], ok ? "" : "!");
    hists += h;
  }
  detail = "distances per seed:" + hists;
  return all_pass;
}

// 4. picard/subdivision contraction on an L1 gallery case
bool criterion4(std::string& detail) {
  WeightParams params;  // M = 1; ex4.6 has nu = 1 so int nu^2 = tau <= M
  SolverOptions opts;
  opts.picard_tol = 1e-11;
  opts.picard_max_iters = 7;

  auto fitted_ratio = [](const std::vector<std::vector<double>>& histories) {
    double worst = 0.0;
    for (const auto& h : histories) {
      for (std::size_t i = 1; i < h.size(); ++i) {
        if (h[i - 1] > 1e-13 && h[i] > 1e-14) {
          worst = std::max(worst, h[i] / h[i - 1]);
        }
      }
    }
    return worst;
  };

  auto run = [&](int N) {
    auto gen = make_generator("ex4.6", params);
    PathBundle b = simulate_brownian(build_grid(1.0, 100), 10000, 1, 601);
    GeneratorAux aux = evaluate_coefficients(b, *gen);
    StoppingTimeSpec st;
    st.kind = StoppingTimeSpec::Kind::Deterministic;
    st.T = 1.0;
    realize_stopping_time(b, st);
    auto xi = terminal_values(*gen, aux, b);
    const SubdivisionPlan plan = build_subdivision(b, params, opts.q, N);
    DiscreteSolution sol = solve_subdivided(gen, aux, xi, b, params, plan, opts);
    return fitted_ratio(sol.interval_histories);
  };

  const double ratio4 = run(4);
  const double ratio8 = run(8);
  std::snprintf(buf, sizeof(buf),
                "per-interval ratio N=4: %.3f (<1), N=8: %.3f (<= %.3f)", ratio4, ratio8,
                1.1 * ratio4);
  detail = buf;
  return ratio4 < 1.0 && ratio8 <= 1.1 * ratio4 + 1e-12;
}

// 5. comparison theorem: positive and negative controls
bool criterion5(std::string& detail) {
  WeightParams params;
  const std::size_t N = 2000, steps = 100;

  auto expr_case = [&](const std::string& name, const std::string& driver,
                       const std::string& terminal) {
    ExprGeneratorSpec spec;
    spec.name = name;
    spec.driver = {driver};
    spec.terminal = {terminal};
    spec.coefficients = {{"mu", "0"}, {"nu", "0"}};
    spec.assumptions = {"H2", "H4", "H5"};
    Solved s;
    s.gen = make_expr_generator(spec);
    s.bundle = simulate_brownian(build_grid(1.0, steps), N, 1, 701);
    s.aux = evaluate_coefficients(s.bundle, *s.gen);
    StoppingTimeSpec st;
    st.kind = StoppingTimeSpec::Kind::Deterministic;
    st.T = 1.0;
    realize_stopping_time(s.bundle, st);
    s.xi = terminal_values(*s.gen, s.aux, s.bundle);
    SolverOptions opts;
    s.sol = solve_backward_zfree(s.gen, s.aux, s.xi, s.bundle, opts);
    s.resid = residual_report(s.sol, *s.gen, s.aux, s.bundle, s.xi, opts.basis);
    return s;
  };

  Solved prime = expr_case("prime", "0", "b1");          // g' = 0, xi' = B_1
  Solved below = expr_case("below", "0", "min(b1, 0)");  // xi = min(B_1, 0)
  Solved above = expr_case("above", "1", "b1");          // g = g' + 1

  AprioriBoundSpec dspec =
      apriori_spec_from_generator(*below.gen, below.aux, below.bundle, params.p);
  const WeightTrack abar = abar_weights(below.bundle, dspec, params);
  std::vector<double> nu(below.bundle.n_paths * below.bundle.n_nodes(), 0.0);
  const double tol_comp =
      std::max(1e-6, 3.0 * std::max(below.resid.scheme_error_estimate,
                                    prime.resid.scheme_error_estimate));

  const ComparisonWitness pos = compare_solutions(
      below.sol, prime.sol, below.xi, prime.xi, *below.gen, below.aux, *prime.gen,
      prime.aux, ComparisonSide::OnPrimeTrajectory, below.bundle, params, nu, abar,
      tol_comp);
  const ComparisonWitness neg = compare_solutions(
      above.sol, prime.sol, above.xi, prime.xi, *above.gen, above.aux, *prime.gen,
      prime.aux, ComparisonSide::OnPrimeTrajectory, above.bundle, params, nu, abar,
      tol_comp, /*enforce_ordering=*/false);

  std::snprintf(buf, sizeof(buf),
                "positive: %zu violations (maxU+=%.3g, tol=%.3g); negative: %zu "
                "violations (maxU+=%.3g)",
                pos.violations.size(), pos.max_uplus, tol_comp, neg.violations.size(),
                neg.max_uplus);
  detail = buf;
  return pos.violations.empty() && !neg.violations.empty();
}

// 6. a priori estimate ratios
bool criterion6(std::string& detail) {
  WeightParams params;
  bool ok = true;
  std::string parts;

  auto stable = [&](const std::string& preset, const std::string& id) {
    std::vector<EstimateReport> reports;
    for (std::uint64_t s = 0; s < 3; ++s) {
      Solved run = solve_preset(preset, 10000, 100, 801 + s, params);
      AprioriBoundSpec spec =
          apriori_spec_from_generator(*run.gen, run.aux, run.bundle, params.p);
      reports.push_back(id == "P2.2-(2.8)"
                            ? apriori_full(run.sol, spec, run.bundle, params, 0)
                            : apriori_zbound(run.sol, spec, run.bundle, params, 0));
    }
    const EstimateReport c = combine_seed_reports(reports);
    char h[160];
    std::snprintf(h, sizeof(h), " %s/%s ratio=%.4g %s;", preset.c_str(), id.c_str(),
                  c.empirical_ratio, c.verdict.c_str());
    parts += h;
    ok = ok && std::isfinite(c.empirical_ratio) && c.verdict == "bounded";
    return c;
  };

  stable("martingale", "P2.1-(2.1)");
  stable("martingale", "P2.2-(2.8)");
  const EstimateReport drift_full = stable("drift", "P2.2-(2.8)");
  stable("ex3.10", "P2.1-(2.1)");
  stable("ex3.10", "P2.2-(2.8)");

  const bool drift_unit = std::fabs(drift_full.empirical_ratio - 1.0) <= 1e-3;
  ok = ok && drift_unit;
  detail = parts + (drift_unit ? " drift ratio = 1 +- 1e-3" : " drift ratio off unit!");
  return ok;
}

// 7. assumption checkers on the gallery and the counterexamples
bool criterion7(std::string& detail) {
  WeightParams params;
  params.M = 6.0;  // gallery integral side conditions need room at t_max = 1
  std::string bad;

  const std::vector<std::string> presets = {"ex3.9", "ex3.10", "ex3.11",
                                            "ex4.6", "ex4.7", "ex4.8"};
  for (const auto& name : presets) {
    auto gen = make_generator(name, params);
    const int d = gen->required_d() > 0 ? gen->required_d() : 1;
    PathBundle b = simulate_brownian(build_grid(1.0, 100), 10000, d, 901);
    GeneratorAux aux = evaluate_coefficients(b, *gen);
    realize_stopping_time(b, default_stopping(name, 1.0));
    std::shared_ptr<WeightTrack> full_a;
    if (params.p > 1.0) {
      full_a = std::make_shared<WeightTrack>(
          accumulate_weight(b, params, WeightVariant::FullA));
    }
    const auto reports =
        run_declared_checks(*gen, aux, b, params, 2000, 902, full_a.get());
    for (const auto& r : reports) {
      if (r.verdict == "fail") bad += " " + name + "/" + r.assumption;
    }
  }

  // counterexamples must fail with witnesses that reproduce
  const std::vector<std::pair<std::string, CheckKind>> cxs = {
      {"cx-ysq", CheckKind::MonotoneY},
      {"cx-zsq", CheckKind::LipschitzZ},
      {"cx-zlin", CheckKind::SublinearZ}};
  for (const auto& [name, kind] : cxs) {
    auto gen = make_generator(name, params);
    PathBundle b = simulate_brownian(build_grid(1.0, 100), 2000, 1, 903);
    GeneratorAux aux = evaluate_coefficients(b, *gen);
    realize_stopping_time(b, default_stopping(name, 1.0));
    CheckReport rep;
    if (kind == CheckKind::MonotoneY) {
      rep = check_monotonicity_y(*gen, aux, b, 2000, 904);
    } else if (kind == CheckKind::LipschitzZ) {
      rep = check_lipschitz_z(*gen, aux, b, 2000, 904);
    } else {
      rep = check_sublinear_z(*gen, aux, b, params, 2000, 904);
    }
    if (rep.verdict != "fail" || !rep.witness.has_value()) {
      bad += " " + name + "/no-fail";
      continue;
    }
    ProbeRecord probe = *rep.witness;
    const double margin = probe_margin(*gen, aux, b, kind, probe);
    if (std::fabs(margin - rep.witness->margin) > 1e-9) {
      bad += " " + name + "/witness-drift";
    }
  }

  detail = bad.empty() ? "6 presets pass, 3 counterexamples fail with stable witnesses"
                       : ("failures:" + bad);
  return bad.empty();
}

// 8. replay determinism across thread counts
bool criterion8(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "bsdelab_acceptance_replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "config.json";
  nlohmann::json cfg;
  cfg["generator"] = "martingale";
  cfg["grid"] = {{"t_max", 1.0}, {"n_steps", 100}};
  cfg["n_paths"] = 10000;
  cfg["seed"] = 777123;
  cfg["checks"] = {{"estimates", {"P2.1-(2.1)"}}, {"probes", 1000}};
  cfg["out_dir"] = (dir / "runs").string();
  std::ofstream(cfg_path) << cfg.dump(2);

  auto cli = [&](const std::string& args) {
    const std::string cmd = std::string(LABCLI_PATH) + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  if (cli("--threads 1 run " + cfg_path.string()) != 0) {
    detail = "seed run failed";
    return false;
  }
  fs::path run_dir;
  for (const auto& e : fs::directory_iterator(dir / "runs")) {
    if (e.is_directory()) run_dir = e.path();
  }
  const int r1 = cli("--threads 1 replay " + run_dir.string());
  const int r8 = cli("--threads 8 replay " + run_dir.string());
  std::snprintf(buf, sizeof(buf), "replay exit codes: threads=1 -> %d, threads=8 -> %d",
                r1, r8);
  detail = buf;
  fs::remove_all(dir);
  return r1 == 0 && r8 == 0;
}

// 9. truncation operator properties on 1e5 randomized cases
bool criterion9(std::string& detail) {
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 100000; ++trial) {
    const int k = 1 + static_cast<int>(bits_draw(31, trial, 0) % 3);
    std::vector<double> x(k), x2(k);
    for (int j = 0; j < k; ++j) {
      x[j] = 40.0 * (uniform_draw(31, trial, 2 + j) - 0.5);
      x2[j] = 40.0 * (uniform_draw(31, trial, 12 + j) - 0.5);
    }
    const double r = 20.0 * uniform_draw(31, trial, 1);
    auto nrm = [](std::span<const double> v) {
      double s = 0;
      for (double a : v) s += a * a;
      return std::sqrt(s);
    };
    const auto tx = truncate(x, r);
    const auto tx2 = truncate(x2, r);
    const auto ttx = truncate(tx, r);
    worst = std::max(worst, std::fabs(nrm(tx) - std::min(nrm(x), r)));
    for (int j = 0; j < k; ++j) worst = std::max(worst, std::fabs(ttx[j] - tx[j]));
    std::vector<double> dt(k), dx(k);
    for (int j = 0; j < k; ++j) {
      dt[j] = tx[j] - tx2[j];
      dx[j] = x[j] - x2[j];
    }
    worst = std::max(worst, nrm(dt) - nrm(dx));
  }
  std::snprintf(buf, sizeof(buf), "worst defect %.2e <= 1e-12 over 1e5 cases", worst);
  detail = buf;
  return worst <= 1e-12;
}

}  // namespace

int main() {
  run_criterion(1, "closed-form solver checks", criterion1);
  run_criterion(2, "norm oracle equivalence", criterion2);
  run_criterion(3, "truncation cauchy property", criterion3);
  run_criterion(4, "picard/subdivision contraction", criterion4);
  run_criterion(5, "comparison controls", criterion5);
  run_criterion(6, "a priori estimate ratios", criterion6);
  run_criterion(7, "assumption checkers", criterion7);
  run_criterion(8, "replay determinism", criterion8);
  run_criterion(9, "truncation operator properties", criterion9);
  if (failures > 0) {
    std::printf("ACCEPTANCE: %d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("ACCEPTANCE: all 9 criteria pass\n");
  return 0;
}
