#include "bsdelab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bsdelab/binio.hpp"
#include "bsdelab/checks.hpp"
#include "bsdelab/comparison.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/estimates.hpp"
#include "bsdelab/gallery.hpp"
#include "bsdelab/norms.hpp"
#include "bsdelab/solver.hpp"

namespace bsdelab {

namespace {

using nlohmann::json;

json check_to_json(const CheckReport& r) {
  json j;
  j["assumption"] = r.assumption;
  j["verdict"] = r.verdict;
  j["note"] = r.note;
  j["n_probes"] = r.n_probes;
  j["worst_margin"] = std::isfinite(r.worst_margin) ? r.worst_margin : -1e308;
  j["tol_abs"] = r.tol_abs;
  if (r.witness) {
    json w;
    w["path"] = r.witness->path;
    w["node"] = r.witness->node;
    w["y1"] = r.witness->y1;
    w["y2"] = r.witness->y2;
    w["z1"] = r.witness->z1;
    w["z2"] = r.witness->z2;
    w["lhs"] = r.witness->lhs;
    w["rhs"] = r.witness->rhs;
    w["margin"] = r.witness->margin;
    w["probe_index"] = r.witness->probe_index;
    j["witness"] = w;
  }
  j["estimate"] = r.estimate;
  j["std_error"] = r.std_error;
  j["details"] = r.details;
  return j;
}

json norm_to_json(const NormResult& r) {
  return json{{"value", r.value},
              {"p", r.p},
              {"weight_variant", r.weight_variant},
              {"std_error", r.std_error},
              {"saturated_paths", r.saturated_paths},
              {"used_paths", r.used_paths},
              {"attained", r.note}};
}

json estimate_to_json(const EstimateReport& r) {
  return json{{"inequality", r.inequality_id},
              {"t_node", r.t_node},
              {"lhs", r.lhs},
              {"rhs_without_constant", r.rhs_without_constant},
              {"empirical_ratio", r.empirical_ratio},
              {"zero_over_zero", r.zero_over_zero},
              {"seeds", r.seeds},
              {"seed_ratios", r.seed_ratios},
              {"verdict", r.verdict},
              {"saturated_paths", r.saturated_paths}};
}

// Everything a single seed's pipeline produces up to the solve.
struct Pipeline {
  std::shared_ptr<Generator> gen;
  PathBundle bundle;
  GeneratorAux aux;
  std::shared_ptr<WeightTrack> full_a;  // p > 1 only
  WeightTrack betamu;
  std::vector<double> xi;
  std::string scheme;
};

std::string resolve_scheme(const ExperimentConfig& cfg, const Generator& gen) {
  if (cfg.solver.scheme != "auto") return cfg.solver.scheme;
  if (!gen.depends_on_z()) return "zfree";
  const auto a = gen.assumptions();
  if (a.count("H6") || a.count("H6'")) return "subdivided";
  return "picard";
}

SolverOptions solver_options(const ExperimentConfig& cfg) {
  SolverOptions opts;
  opts.basis.degree = cfg.solver.basis_degree;
  opts.basis.ridge = cfg.solver.ridge;
  opts.picard_max_iters = cfg.solver.picard_max_iters;
  opts.picard_tol = cfg.solver.picard_tol;
  opts.q = cfg.solver.q;
  opts.subdivision_N = cfg.solver.subdivision_N;
  opts.truncation_schedule = cfg.solver.truncation_schedule;
  return opts;
}

Pipeline build_pipeline(const ExperimentConfig& cfg, std::uint64_t seed) {
  Pipeline pipe;
  pipe.gen = cfg.expression ? make_expr_generator(*cfg.expression)
                            : make_generator(cfg.generator, cfg.weights);
  const GridSpacing spacing =
      cfg.spacing == "uniform" ? GridSpacing::Uniform : GridSpacing::Geometric;
  const TimeGrid grid = build_grid(cfg.t_max, cfg.n_steps, spacing, cfg.grid_ratio);
  const int d = pipe.gen->required_d() > 0 ? pipe.gen->required_d() : 1;
  pipe.bundle = simulate_brownian(grid, cfg.n_paths, d, seed);
  pipe.aux = evaluate_coefficients(pipe.bundle, *pipe.gen);

  StoppingTimeSpec stopping = cfg.stopping
                                  ? *cfg.stopping
                                  : default_stopping(cfg.generator, cfg.t_max);
  realize_stopping_time(pipe.bundle, stopping);

  pipe.scheme = resolve_scheme(cfg, *pipe.gen);
  if (pipe.scheme == "subdivided" && pipe.bundle.has_track("nu")) {
    // L^1 route: cap the horizon so the cumulative int nu^2 stays below M.
    StoppingTimeSpec cap;
    cap.kind = StoppingTimeSpec::Kind::CappedIntegral;
    cap.threshold = cfg.weights.M;
    cap.integrand = "nu2";
    auto cap_idx = realize_indices(pipe.bundle, cap);
    for (std::size_t p = 0; p < pipe.bundle.n_paths; ++p) {
      if (cap_idx[p] < pipe.bundle.tau_index[p]) {
        pipe.bundle.tau_index[p] = cap_idx[p];
        pipe.bundle.censored[p] = 0;
      }
    }
    mask_tracks_past_tau(pipe.bundle);
  }

  if (cfg.weights.p > 1.0) {
    pipe.full_a = std::make_shared<WeightTrack>(
        accumulate_weight(pipe.bundle, cfg.weights, WeightVariant::FullA));
  }
  pipe.betamu = accumulate_weight(pipe.bundle, cfg.weights, WeightVariant::BetaMuOnly);
  pipe.xi = terminal_values(*pipe.gen, pipe.aux, pipe.bundle);
  return pipe;
}

DiscreteSolution solve_scheme(const Pipeline& pipe, const ExperimentConfig& cfg) {
  const SolverOptions opts = solver_options(cfg);
  if (pipe.scheme == "zfree") {
    return solve_backward_zfree(pipe.gen, pipe.aux, pipe.xi, pipe.bundle, opts);
  }
  if (pipe.scheme == "picard") {
    return solve_picard(pipe.gen, pipe.aux, pipe.xi, pipe.bundle, cfg.weights, opts);
  }
  if (pipe.scheme == "subdivided") {
    const SubdivisionPlan plan =
        build_subdivision(pipe.bundle, cfg.weights, opts.q, opts.subdivision_N);
    return solve_subdivided(pipe.gen, pipe.aux, pipe.xi, pipe.bundle, cfg.weights, plan,
                            opts);
  }
  if (pipe.scheme == "truncation") {
    auto [sol, history] =
        solve_via_truncation(pipe.gen, pipe.aux, pipe.xi, pipe.bundle, cfg.weights,
                             opts.truncation_schedule, opts);
    return std::move(sol);
  }
  throw ConfigError("unknown scheme " + pipe.scheme);
}

std::filesystem::path make_run_dir(const ExperimentConfig& cfg) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::gmtime(&tt));
  const std::string name = cfg.expression ? cfg.expression->name : cfg.generator;
  std::filesystem::path base = std::filesystem::path(cfg.out_dir) /
                               (name + "-" + std::to_string(cfg.seed) + "-" + stamp);
  std::filesystem::path dir = base;
  for (int k2 = 1; std::filesystem::exists(dir); ++k2) {
    dir = base;
    dir += "-" + std::to_string(k2);
  }
  std::filesystem::create_directories(dir);
  return dir;
}

void write_json(const std::filesystem::path& file, const json& j) {
  std::ofstream out(file);
  out << j.dump(2) << "\n";
}

constexpr std::uint32_t kSolutionMagic = 0x42534C53u;  // "BSLS"

void save_solution(const DiscreteSolution& sol, const std::filesystem::path& file) {
  BinWriter w(file);
  w.u32(kSolutionMagic);
  w.u32(1);
  w.u64(sol.n_paths);
  w.u32(static_cast<std::uint32_t>(sol.k));
  w.u32(static_cast<std::uint32_t>(sol.d));
  w.u32(static_cast<std::uint32_t>(sol.n_steps));
  w.f64_array(sol.Y);
  w.f64_array(sol.Z);
  w.u32_array(sol.start);
  w.u32_array(sol.end);
}

std::string solution_file_divergence(const std::filesystem::path& a,
                                     const std::filesystem::path& b) {
  BinReader ra(a), rb(b);
  for (int field = 0; field < 2; ++field) {
    if (ra.u32() != rb.u32()) return "solution.bin header";
  }
  const std::uint64_t n_paths = ra.u64();
  if (n_paths != rb.u64()) return "solution.bin n_paths";
  std::uint32_t k = ra.u32(), d = ra.u32(), n_steps = ra.u32();
  if (k != rb.u32() || d != rb.u32() || n_steps != rb.u32()) {
    return "solution.bin dimensions";
  }
  const std::size_t ny = n_paths * (n_steps + 1) * k;
  const std::size_t nz = n_paths * n_steps * k * d;
  std::vector<double> ya(ny), yb(ny), za(nz), zb(nz);
  ra.f64_array(ya);
  rb.f64_array(yb);
  ra.f64_array(za);
  rb.f64_array(zb);
  for (std::size_t i = 0; i < ny; ++i) {
    if (std::fabs(ya[i] - yb[i]) >
        1e-12 * std::max({1.0, std::fabs(ya[i]), std::fabs(yb[i])})) {
      return "solution.bin Y[" + std::to_string(i) + "]";
    }
  }
  for (std::size_t i = 0; i < nz; ++i) {
    if (std::fabs(za[i] - zb[i]) >
        1e-12 * std::max({1.0, std::fabs(za[i]), std::fabs(zb[i])})) {
      return "solution.bin Z[" + std::to_string(i) + "]";
    }
  }
  return {};
}

}  // namespace

std::string first_json_divergence(const json& a, const json& b, const std::string& path) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    if (std::fabs(x - y) > 1e-12 * std::max({1.0, std::fabs(x), std::fabs(y)})) {
      return path;
    }
    return {};
  }
  if (a.type() != b.type()) return path;
  if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) return path + "." + it.key();
      const std::string div =
          first_json_divergence(it.value(), b.at(it.key()), path + "." + it.key());
      if (!div.empty()) return div;
    }
    for (auto it = b.begin(); it != b.end(); ++it) {
      if (!a.contains(it.key())) return path + "." + it.key();
    }
    return {};
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return path + ".length";
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string div =
          first_json_divergence(a[i], b[i], path + "[" + std::to_string(i) + "]");
      if (!div.empty()) return div;
    }
    return {};
  }
  return a == b ? std::string{} : path;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunArtifacts out;
  Pipeline pipe = build_pipeline(cfg, cfg.seed);
  const std::filesystem::path dir = make_run_dir(cfg);
  out.dir = dir;

  // Tail diagnostics of the horizon cap plus increment moment checks.
  const MomentDiagnostics mom = brownian_moment_diagnostics(pipe.bundle);
  json diag;
  diag["censored_fraction"] = pipe.bundle.censored_fraction();
  diag["moment_step_pass_fraction"] = mom.step_pass_fraction;
  diag["moment_worst_abs_mean"] = mom.worst_abs_mean;
  diag["moment_worst_var_rel_err"] = mom.worst_var_rel_err;
  diag["max_abs_cross_corr"] = mom.max_abs_cross_corr;
  {
    const WeightTrack& w = pipe.full_a ? *pipe.full_a : pipe.betamu;
    double max_cum = 0.0, mean_cum = 0.0;
    for (std::size_t p = 0; p < pipe.bundle.n_paths; ++p) {
      const double c = w.cum(p, pipe.bundle.n_nodes() - 1);
      max_cum = std::max(max_cum, c);
      mean_cum += c;
    }
    diag["terminal_log_weight_mean"] = mean_cum / static_cast<double>(pipe.bundle.n_paths);
    diag["terminal_log_weight_max"] = max_cum;
    diag["saturated_paths"] = w.saturated_count();
  }

  // Hypothesis checkers.
  std::vector<CheckReport> checks;
  if (cfg.checks.assumptions) {
    checks = run_declared_checks(*pipe.gen, pipe.aux, pipe.bundle, cfg.weights,
                                 cfg.checks.probes, cfg.seed ^ 0xC0FFEEull,
                                 pipe.full_a.get());
    const AprioriBoundSpec aspec = apriori_spec_from_generator(
        *pipe.gen, pipe.aux, pipe.bundle, cfg.weights.p);
    checks.push_back(verify_assumption_A(*pipe.gen, pipe.aux, aspec, pipe.bundle,
                                         cfg.checks.probes, cfg.seed ^ 0xAAAAull));
  }
  json checks_json = json::array();
  for (const auto& c : checks) {
    checks_json.push_back(check_to_json(c));
    if (c.verdict == "fail") out.any_check_failed = true;
  }

  // Solve.
  DiscreteSolution sol = solve_scheme(pipe, cfg);
  const SolverOptions opts = solver_options(cfg);
  const ResidualReport resid =
      residual_report(sol, *pipe.gen, pipe.aux, pipe.bundle, pipe.xi, opts.basis);

  // Norms.
  const WeightTrack& norm_w = pipe.full_a ? *pipe.full_a : pipe.betamu;
  const NormResult tnorm =
      terminal_norm(pipe.bundle, pipe.xi, sol.k, norm_w, cfg.weights.p);
  const NormResult snorm = sup_norm(pipe.bundle, sol.Y, sol.k, norm_w, cfg.weights.p);
  const NormResult znorm =
      z_norm(pipe.bundle, sol.Z, sol.k * sol.d, norm_w, cfg.weights.p);
  std::vector<StoppingTimeSpec> family;
  std::vector<std::string> labels;
  for (int frac = 0; frac <= 10; ++frac) {
    StoppingTimeSpec s;
    s.kind = StoppingTimeSpec::Kind::Deterministic;
    s.T = cfg.t_max * static_cast<double>(frac) / 10.0;
    family.push_back(s);
    labels.push_back("t=" + std::to_string(s.T));
  }
  const NormResult dnorm = class_D_norm(pipe.bundle, sol.Y, sol.k, pipe.betamu,
                                        family, labels);
  json norms_json;
  norms_json["terminal"] = norm_to_json(tnorm);
  norms_json["sup"] = norm_to_json(snorm);
  norms_json["z"] = norm_to_json(znorm);
  norms_json["class_D"] = norm_to_json(dnorm);
  if (pipe.scheme == "subdivided") {
    // the L^1 route lives in the intersection of theta-spaces; probe three
    json thetas = json::array();
    for (double theta : {0.25, 0.5, 0.75}) {
      json jt;
      jt["theta"] = theta;
      jt["sup"] = norm_to_json(sup_norm(pipe.bundle, sol.Y, sol.k, pipe.betamu, theta));
      jt["z"] = norm_to_json(
          z_norm(pipe.bundle, sol.Z, sol.k * sol.d, pipe.betamu, theta));
      thetas.push_back(jt);
    }
    norms_json["theta_norms"] = thetas;
  }

  // Mean Y_0 per component.
  std::vector<double> y0(sol.k, 0.0);
  for (std::size_t p = 0; p < sol.n_paths; ++p) {
    for (int c = 0; c < sol.k; ++c) y0[c] += sol.y_at(p, 0, c);
  }
  for (auto& v : y0) v /= static_cast<double>(sol.n_paths);

  // A priori estimate ratios, multi-seed.
  json estimates_json = json::array();
  if (!cfg.checks.estimates.empty()) {
    std::vector<Pipeline> pipes;
    std::vector<DiscreteSolution> sols;
    for (int s = 1; s < cfg.checks.estimate_seeds; ++s) {
      Pipeline extra = build_pipeline(cfg, cfg.seed + static_cast<std::uint64_t>(s));
      sols.push_back(solve_scheme(extra, cfg));
      pipes.push_back(std::move(extra));
    }
    for (const auto& id : cfg.checks.estimates) {
      std::vector<EstimateReport> reports;
      auto eval_one = [&](const Pipeline& pp, const DiscreteSolution& ss) {
        const double p_est = (id == "P2.1-(2.2)") ? std::min(cfg.weights.p, 1.0)
                                                  : cfg.weights.p;
        AprioriBoundSpec spec =
            apriori_spec_from_generator(*pp.gen, pp.aux, pp.bundle, p_est);
        if (id == "P2.2-(2.8)") {
          return apriori_full(ss, spec, pp.bundle, cfg.weights, 0);
        }
        return apriori_zbound(ss, spec, pp.bundle, cfg.weights, 0);
      };
      reports.push_back(eval_one(pipe, sol));
      for (std::size_t s = 0; s < pipes.size(); ++s) {
        reports.push_back(eval_one(pipes[s], sols[s]));
      }
      estimates_json.push_back(estimate_to_json(combine_seed_reports(reports)));
    }
  }

  // Comparison run.
  json comparison_json;
  if (cfg.checks.comparison) {
    const auto& req = *cfg.checks.comparison;
    auto genB = make_generator(req.other, cfg.weights);
    if (pipe.gen->k() != 1 || genB->k() != 1) {
      throw ConfigError("comparison requires one-dimensional generators");
    }
    PathBundle bundleB = pipe.bundle;
    bundleB.tracks.clear();
    GeneratorAux auxB = evaluate_coefficients(bundleB, *genB);
    bundleB.tau_index = pipe.bundle.tau_index;
    bundleB.censored = pipe.bundle.censored;
    mask_tracks_past_tau(bundleB);
    std::vector<double> xiB = terminal_values(*genB, auxB, bundleB);

    ExperimentConfig cfgB = cfg;
    cfgB.generator = req.other;
    cfgB.checks.comparison.reset();
    Pipeline pipeB;
    pipeB.gen = genB;
    pipeB.bundle = std::move(bundleB);
    pipeB.aux = std::move(auxB);
    pipeB.scheme = resolve_scheme(cfgB, *genB);
    pipeB.xi = xiB;
    DiscreteSolution solB = solve_scheme(pipeB, cfgB);
    const ResidualReport residB = residual_report(solB, *genB, pipeB.aux, pipeB.bundle,
                                                  xiB, opts.basis);

    const bool side_i = req.side == "i";
    const Generator& designated = side_i ? *pipe.gen : *genB;
    const GeneratorAux& designated_aux = side_i ? pipe.aux : pipeB.aux;
    const PathBundle& designated_bundle = side_i ? pipe.bundle : pipeB.bundle;
    AprioriBoundSpec dspec = apriori_spec_from_generator(
        designated, designated_aux, designated_bundle, cfg.weights.p);
    const WeightTrack abar = abar_weights(designated_bundle, dspec, cfg.weights);
    std::span<const double> nu_track =
        designated_bundle.has_track("nu") ? designated_bundle.track("nu")
                                          : std::span<const double>{};
    std::vector<double> zero_nu;
    if (nu_track.empty()) {
      zero_nu.assign(pipe.bundle.n_paths * pipe.bundle.n_nodes(), 0.0);
      nu_track = zero_nu;
    }
    const double tol_comp =
        std::max(1e-6, 3.0 * std::max(resid.scheme_error_estimate,
                                      residB.scheme_error_estimate));
    const ComparisonWitness w = compare_solutions(
        sol, solB, pipe.xi, xiB, *pipe.gen, pipe.aux, *genB, pipeB.aux,
        side_i ? ComparisonSide::OnPrimeTrajectory : ComparisonSide::OnPlainTrajectory,
        pipe.bundle, cfg.weights, nu_track, abar, tol_comp, req.enforce_ordering);

    comparison_json["other"] = req.other;
    comparison_json["side"] = req.side;
    comparison_json["tol_comp"] = w.tol_comp;
    comparison_json["q_exponent"] = w.q_exponent;
    comparison_json["violation_count"] = w.violations.size();
    json vlist = json::array();
    for (std::size_t i = 0; i < w.violations.size() && i < 20; ++i) {
      vlist.push_back({w.violations[i].first, w.violations[i].second});
    }
    comparison_json["violations_head"] = vlist;
    comparison_json["max_uplus"] = w.max_uplus;
    comparison_json["weighted_sup_uplus"] = w.weighted_sup_uplus;
    comparison_json["ordering_breaches"] = w.ordering_breaches;
    if (!w.violations.empty()) out.any_check_failed = true;
  }

  // Solution metadata.
  json sol_json;
  sol_json["scheme"] = sol.scheme;
  sol_json["basis"] = sol.basis_desc;
  sol_json["iterations"] = sol.iterations;
  sol_json["picard_history"] = sol.picard_history;
  sol_json["interval_histories"] = sol.interval_histories;
  sol_json["cauchy_history"] = sol.cauchy_history;
  sol_json["node_residual_rms"] = sol.node_residual_rms;
  sol_json["residual"] = {{"mean_abs", resid.mean_abs},
                          {"max_abs", resid.max_abs},
                          {"max_path", resid.max_path},
                          {"max_node", resid.max_node},
                          {"terminal_mismatch", resid.terminal_mismatch},
                          {"scheme_error_estimate", resid.scheme_error_estimate}};
  sol_json["y0_mean"] = y0;

  // Persist everything.
  save_bundle(pipe.bundle, dir / "paths.bin");
  save_solution(sol, dir / "solution.bin");
  write_json(dir / "config.json", config_to_json(cfg));
  write_json(dir / "checks.json", checks_json);
  write_json(dir / "diagnostics.json", diag);
  write_json(dir / "norms.json", norms_json);
  write_json(dir / "solution.json", sol_json);
  if (!cfg.checks.estimates.empty()) write_json(dir / "estimates.json", estimates_json);
  if (!comparison_json.is_null()) write_json(dir / "comparison.json", comparison_json);

  std::filesystem::create_directories(dir / "plots");
  {
    std::ofstream pc(dir / "plots" / "picard.csv");
    pc << "iteration,distance\n";
    for (std::size_t i = 0; i < sol.picard_history.size(); ++i) {
      pc << (i + 1) << "," << sol.picard_history[i] << "\n";
    }
    std::ofstream tc(dir / "plots" / "truncation.csv");
    tc << "n,distance\n";
    for (std::size_t i = 0; i < sol.cauchy_history.size(); ++i) {
      const int n_label = (i + 1 < cfg.solver.truncation_schedule.size())
                              ? cfg.solver.truncation_schedule[i + 1]
                              : 0;
      tc << n_label << "," << sol.cauchy_history[i] << "\n";
    }
  }

  {
    std::ofstream csv(dir / "summary.csv");
    csv << "generator,k,d,n_paths,n_steps,t_max,seed,p,beta,rho,M,scheme,iterations,"
           "y0_mean,terminal_norm,sup_norm,z_norm,classD_norm,censored_fraction,"
           "saturated_paths,mean_residual,max_residual,checks_failed\n";
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%d,%zu,%zu,%.17g,%llu,%.17g,%.17g,%.17g,%.17g,%s,%d,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%d\n",
                  pipe.gen->name().c_str(), sol.k, sol.d,
                  pipe.bundle.n_paths, pipe.bundle.grid.n_steps, cfg.t_max,
                  static_cast<unsigned long long>(cfg.seed), cfg.weights.p,
                  cfg.weights.beta, cfg.weights.rho, cfg.weights.M, sol.scheme.c_str(),
                  sol.iterations, y0[0], tnorm.value, snorm.value, znorm.value,
                  dnorm.value, pipe.bundle.censored_fraction(), tnorm.saturated_paths,
                  resid.mean_abs, resid.max_abs, out.any_check_failed ? 1 : 0);
    csv << buf;
  }

  // MANIFEST with content hashes, the audit trail for replay.
  json manifest;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir).string();
    if (rel == "MANIFEST.json") continue;
    manifest["files"][rel] = {
        {"bytes", std::filesystem::file_size(entry.path())},
        {"fnv1a64", fnv1a64_file(entry.path())},
    };
  }
  write_json(dir / "MANIFEST.json", manifest);

  out.summary = sol_json;
  out.summary["norms"] = norms_json;
  out.summary["checks_failed"] = out.any_check_failed;
  return out;
}

int replay_run(const std::filesystem::path& dir, std::ostream& log) {
  const auto cfg_path = dir / "config.json";
  if (!std::filesystem::exists(cfg_path)) {
    throw ConfigError("replay: no config.json under " + dir.string());
  }
  ExperimentConfig cfg = load_config(cfg_path.string());
  const auto tmp = dir / "replay_tmp";
  std::filesystem::remove_all(tmp);
  cfg.out_dir = tmp.string();
  const RunArtifacts redo = run_experiment(cfg);

  std::string divergence;
  auto check_bytes = [&](const std::string& name) {
    if (!divergence.empty()) return;
    std::ifstream a(dir / name, std::ios::binary);
    std::ifstream b(redo.dir / name, std::ios::binary);
    if (!a || !b) {
      divergence = name + " missing";
      return;
    }
    std::vector<char> ba((std::istreambuf_iterator<char>(a)),
                         std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(b)),
                         std::istreambuf_iterator<char>());
    if (ba != bb) divergence = name + " (byte mismatch)";
  };
  auto check_json = [&](const std::string& name, bool required) {
    if (!divergence.empty()) return;
    const bool ea = std::filesystem::exists(dir / name);
    const bool eb = std::filesystem::exists(redo.dir / name);
    if (!ea && !eb) {
      if (required) divergence = name + " missing";
      return;
    }
    if (ea != eb) {
      divergence = name + " presence mismatch";
      return;
    }
    json ja, jb;
    std::ifstream(dir / name) >> ja;
    std::ifstream(redo.dir / name) >> jb;
    const std::string div = first_json_divergence(ja, jb, name);
    if (!div.empty()) divergence = div;
  };

  check_bytes("paths.bin");
  if (divergence.empty()) {
    divergence = solution_file_divergence(dir / "solution.bin", redo.dir / "solution.bin");
  }
  check_json("solution.json", true);
  check_json("checks.json", true);
  check_json("norms.json", true);
  check_json("diagnostics.json", true);
  check_json("estimates.json", false);
  check_json("comparison.json", false);

  std::filesystem::remove_all(tmp);
  if (!divergence.empty()) {
    log << "replay mismatch: " << divergence << "\n";
    return 1;
  }
  log << "replay ok: " << dir.string() << "\n";
  return 0;
}

bool check_only(const ExperimentConfig& cfg, std::ostream& log) {
  Pipeline pipe = build_pipeline(cfg, cfg.seed);
  std::vector<CheckReport> checks =
      run_declared_checks(*pipe.gen, pipe.aux, pipe.bundle, cfg.weights,
                          cfg.checks.probes, cfg.seed ^ 0xC0FFEEull, pipe.full_a.get());
  const AprioriBoundSpec aspec =
      apriori_spec_from_generator(*pipe.gen, pipe.aux, pipe.bundle, cfg.weights.p);
  checks.push_back(verify_assumption_A(*pipe.gen, pipe.aux, aspec, pipe.bundle,
                                       cfg.checks.probes, cfg.seed ^ 0xAAAAull));
  bool all_pass = true;
  for (const auto& c : checks) {
    log << pipe.gen->name() << "  " << c.assumption << "  " << c.verdict
        << "  worst_margin=" << c.worst_margin << "\n";
    if (c.verdict == "fail") all_pass = false;
  }
  return all_pass;
}

void print_gallery(std::ostream& out) {
  out << "name        k  d  assumptions           driver\n";
  for (const auto& e : gallery_entries()) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-11s %-2d %-2s %-21s %s%s\n", e.name.c_str(), e.k,
                  e.d == 0 ? "*" : std::to_string(e.d).c_str(), e.assumptions.c_str(),
                  e.description.c_str(), e.counterexample ? "  [counterexample]" : "");
    out << buf;
  }
}

}  // namespace bsdelab
