#include <doctest.h>

#include <cmath>
#include <vector>

#include "bsdelab/comparison.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/estimates.hpp"
#include "bsdelab/expr.hpp"
#include "bsdelab/gallery.hpp"
#include "bsdelab/solver.hpp"

using namespace bsdelab;

namespace {

struct Setup {
  std::shared_ptr<Generator> gen;
  PathBundle bundle;
  GeneratorAux aux;
  std::vector<double> xi;
  DiscreteSolution sol;
  ResidualReport resid;
};

Setup solve_case(std::shared_ptr<Generator> gen, std::size_t n_paths,
                 std::size_t n_steps, std::uint64_t seed, const WeightParams& params) {
  Setup s;
  s.gen = std::move(gen);
  const int d = s.gen->required_d() > 0 ? s.gen->required_d() : 1;
  s.bundle = simulate_brownian(build_grid(1.0, n_steps), n_paths, d, seed);
  s.aux = evaluate_coefficients(s.bundle, *s.gen);
  StoppingTimeSpec st;
  st.kind = StoppingTimeSpec::Kind::Deterministic;
  st.T = 1.0;
  realize_stopping_time(s.bundle, st);
  s.xi = terminal_values(*s.gen, s.aux, s.bundle);
  SolverOptions opts;
  s.sol = s.gen->depends_on_z()
              ? solve_picard(s.gen, s.aux, s.xi, s.bundle, params, opts)
              : solve_backward_zfree(s.gen, s.aux, s.xi, s.bundle, opts);
  s.resid = residual_report(s.sol, *s.gen, s.aux, s.bundle, s.xi, opts.basis);
  return s;
}

std::shared_ptr<Generator> expr_gen(const std::string& name, const std::string& driver,
                                    const std::string& terminal) {
  ExprGeneratorSpec spec;
  spec.name = name;
  spec.driver = {driver};
  spec.terminal = {terminal};
  spec.coefficients = {{"mu", "0"}, {"nu", "0"}};
  spec.assumptions = {"H2", "H4", "H5"};
  return make_expr_generator(spec);
}

}  // namespace

TEST_CASE("zero data gives the flagged 0/0 ratio") {
  WeightParams params;
  Setup s = solve_case(expr_gen("zero", "0", "0"), 300, 20, 5, params);
  AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 2.0);
  const EstimateReport r = apriori_zbound(s.sol, spec, s.bundle, params, 0);
  CHECK(r.lhs == 0.0);
  CHECK(r.rhs_without_constant == 0.0);
  CHECK(r.empirical_ratio == 0.0);
  CHECK(r.zero_over_zero);

  const EstimateReport rf = apriori_full(s.sol, spec, s.bundle, params, 0);
  CHECK(rf.empirical_ratio == 0.0);
  CHECK(rf.zero_over_zero);
}

TEST_CASE("martingale z-bound anchors at the known moments") {
  WeightParams params;
  Setup s = solve_case(make_generator("martingale", params), 8000, 50, 21, params);
  AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 2.0);
  const EstimateReport r = apriori_zbound(s.sol, spec, s.bundle, params, 0);
  CHECK(r.inequality_id == "P2.1-(2.1)");
  // E int |Z|^2 = 1 for xi = B_1; E sup B^2 at least E B_1^2
  CHECK(r.lhs == doctest::Approx(1.0).epsilon(0.1));
  CHECK(r.rhs_without_constant >= 1.0);
  CHECK(r.empirical_ratio < 1.0);
  CHECK(r.empirical_ratio > 0.0);
}

TEST_CASE("deterministic drift case: full estimate ratio is exactly 1") {
  WeightParams params;
  Setup s = solve_case(make_generator("drift", params), 2000, 100, 31, params);
  AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 2.0);
  const EstimateReport r = apriori_full(s.sol, spec, s.bundle, params, 0);
  CHECK(r.inequality_id == "P2.2-(2.8)");
  CHECK(r.empirical_ratio == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("apriori_full rejects p <= 1 and (2.2) enforces the nu cap") {
  WeightParams params;
  Setup s = solve_case(make_generator("drift", params), 200, 20, 33, params);
  AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 0.5);
  CHECK_THROWS_AS(apriori_full(s.sol, spec, s.bundle, params, 0), ConfigError);

  // v = 2 on the unit horizon: int v^2 = 4 > M = 1
  for (auto& v : spec.v) v = 2.0;
  CHECK_THROWS_AS(apriori_zbound(s.sol, spec, s.bundle, params, 0), DataError);
}

TEST_CASE("ratios are reproducible across seeds and path relabeling") {
  WeightParams params;
  std::vector<EstimateReport> reports;
  for (std::uint64_t seed : {100ull, 101ull, 102ull}) {
    Setup s = solve_case(make_generator("martingale", params), 3000, 50, seed, params);
    AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 2.0);
    reports.push_back(apriori_zbound(s.sol, spec, s.bundle, params, 0));
  }
  const EstimateReport combined = combine_seed_reports(reports);
  CHECK(combined.verdict == "bounded");
  CHECK(combined.seeds.size() == 3);
  for (double ratio : combined.seed_ratios) {
    CHECK(ratio == doctest::Approx(combined.empirical_ratio).epsilon(0.25));
  }

  // permutation invariance: reversing the path order changes nothing
  Setup s = solve_case(make_generator("martingale", params), 500, 20, 200, params);
  AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 2.0);
  const EstimateReport base = apriori_zbound(s.sol, spec, s.bundle, params, 0);

  Setup rev = s;
  const std::size_t n = rev.bundle.n_paths;
  const std::size_t n_nodes = rev.bundle.n_nodes();
  auto flip = [&](auto& arr, std::size_t stride) {
    auto copy = arr;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t j = 0; j < stride; ++j) {
        arr[p * stride + j] = copy[(n - 1 - p) * stride + j];
      }
    }
  };
  flip(rev.bundle.states, n_nodes);
  flip(rev.bundle.abs_b, n_nodes);
  flip(rev.bundle.sup_abs_b, n_nodes);
  flip(rev.bundle.increments, rev.bundle.grid.n_steps);
  flip(rev.bundle.tau_index, 1);
  for (auto& [name, tr] : rev.bundle.tracks) flip(tr, n_nodes);
  flip(rev.sol.Y, n_nodes);
  flip(rev.sol.Z, rev.bundle.grid.n_steps);
  flip(rev.sol.start, 1);
  flip(rev.sol.end, 1);
  AprioriBoundSpec rspec = spec;
  flip(rspec.u, n_nodes);
  flip(rspec.v, n_nodes);
  flip(rspec.f, n_nodes);
  const EstimateReport flipped = apriori_zbound(rev.sol, rspec, rev.bundle, params, 0);
  CHECK(flipped.lhs == doctest::Approx(base.lhs).epsilon(1e-12));
  CHECK(flipped.rhs_without_constant ==
        doctest::Approx(base.rhs_without_constant).epsilon(1e-12));
}

TEST_CASE("assumption (A) checker") {
  WeightParams params;
  Setup s = solve_case(expr_gen("zero", "0", "0"), 200, 10, 3, params);
  AprioriBoundSpec spec = apriori_spec_from_generator(*s.gen, s.aux, s.bundle, 2.0);
  CheckReport rep = verify_assumption_A(*s.gen, s.aux, spec, s.bundle, 1000, 9);
  CHECK(rep.verdict == "pass");

  // constant driver: <y/|y|, f> = f at aligned probes, margin exactly 0
  Setup sc = solve_case(make_generator("drift", params), 200, 10, 4, params);
  spec = apriori_spec_from_generator(*sc.gen, sc.aux, sc.bundle, 2.0);
  rep = verify_assumption_A(*sc.gen, sc.aux, spec, sc.bundle, 1000, 9);
  CHECK(rep.verdict == "pass");
  CHECK(rep.worst_margin == doctest::Approx(0.0).epsilon(1e-12));

  // g = 2|y| with u = 1 fails with a witness
  ExprGeneratorSpec bad;
  bad.name = "twoabs";
  bad.driver = {"2*abs(y)"};
  bad.terminal = {"0"};
  bad.coefficients = {{"mu", "1"}, {"nu", "0"}};
  bad.assumptions = {"H2"};
  Setup sb = solve_case(make_expr_generator(bad), 200, 10, 5, params);
  spec = apriori_spec_from_generator(*sb.gen, sb.aux, sb.bundle, 2.0);
  rep = verify_assumption_A(*sb.gen, sb.aux, spec, sb.bundle, 1000, 9);
  CHECK(rep.verdict == "fail");
  REQUIRE(rep.witness.has_value());
}

TEST_CASE("comparison q exponent closed form") {
  for (double p : {1.5, 2.0, 3.0}) {
    for (double rho : {1.5, 2.0, 5.0}) {
      const double m = std::min(p - 1.0, 1.0);
      const double expect = p * (m + rho) / ((p + 1.0) * m + rho);
      CHECK(comparison_q_exponent(p, rho) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(comparison_q_exponent(p, rho) > 1.0);
    }
  }
}

TEST_CASE("comparison positive and negative controls") {
  WeightParams params;
  const std::size_t n_paths = 2000;
  const std::size_t n_steps = 100;

  // solutions on the same paths: A with terminal min(B_1, 0), B with B_1
  Setup sB = solve_case(make_generator("martingale", params), n_paths, n_steps, 777,
                        params);
  Setup sA = solve_case(expr_gen("minb", "0", "min(b1, 0)"), n_paths, n_steps, 777,
                        params);
  AprioriBoundSpec dspec = apriori_spec_from_generator(*sA.gen, sA.aux, sA.bundle, 2.0);
  const WeightTrack abar = abar_weights(sA.bundle, dspec, params);
  std::vector<double> nu(sA.bundle.n_paths * sA.bundle.n_nodes(), 0.0);

  const double tol_comp =
      std::max(1e-6, 3.0 * std::max(sA.resid.scheme_error_estimate,
                                    sB.resid.scheme_error_estimate));
  ComparisonWitness w = compare_solutions(
      sA.sol, sB.sol, sA.xi, sB.xi, *sA.gen, sA.aux, *sB.gen, sB.aux,
      ComparisonSide::OnPrimeTrajectory, sA.bundle, params, nu, abar, tol_comp);
  INFO("positive control: max U+ = " << w.max_uplus << " tol = " << tol_comp);
  CHECK(w.violations.empty());
  CHECK(w.ordering_breaches == 0);

  // identical inputs: U = 0 everywhere
  ComparisonWitness w0 = compare_solutions(
      sB.sol, sB.sol, sB.xi, sB.xi, *sB.gen, sB.aux, *sB.gen, sB.aux,
      ComparisonSide::OnPrimeTrajectory, sB.bundle, params, nu, abar, tol_comp);
  CHECK(w0.violations.empty());
  CHECK(w0.max_uplus == 0.0);

  // ordered drivers, equal terminals: g = g' - 1 stays below
  Setup sLow = solve_case(expr_gen("low", "0-1", "b1"), n_paths, n_steps, 777, params);
  ComparisonWitness wl = compare_solutions(
      sLow.sol, sB.sol, sLow.xi, sB.xi, *sLow.gen, sLow.aux, *sB.gen, sB.aux,
      ComparisonSide::OnPrimeTrajectory, sLow.bundle, params, nu, abar, tol_comp);
  CHECK(wl.violations.empty());

  // negative control: g = g' + 1 must be caught (ordering intentionally
  // broken, so enforcement is off and the breach count is reported)
  Setup sHigh = solve_case(expr_gen("high", "1", "b1"), n_paths, n_steps, 777, params);
  ComparisonWitness wn = compare_solutions(
      sHigh.sol, sB.sol, sHigh.xi, sB.xi, *sHigh.gen, sHigh.aux, *sB.gen, sB.aux,
      ComparisonSide::OnPrimeTrajectory, sHigh.bundle, params, nu, abar, tol_comp,
      /*enforce_ordering=*/false);
  INFO("negative control: max U+ = " << wn.max_uplus << " tol = " << tol_comp);
  CHECK(!wn.violations.empty());
  CHECK(wn.ordering_breaches > 0);

  // with enforcement on, the broken ordering is a precondition error
  CHECK_THROWS_AS(compare_solutions(sHigh.sol, sB.sol, sHigh.xi, sB.xi, *sHigh.gen,
                                    sHigh.aux, *sB.gen, sB.aux,
                                    ComparisonSide::OnPrimeTrajectory, sHigh.bundle,
                                    params, nu, abar, tol_comp),
                  DataError);

  // unordered terminals are rejected outright
  CHECK_THROWS_AS(compare_solutions(sB.sol, sA.sol, sB.xi, sA.xi, *sB.gen, sB.aux,
                                    *sA.gen, sA.aux, ComparisonSide::OnPrimeTrajectory,
                                    sB.bundle, params, nu, abar, tol_comp),
                  DataError);

  // girsanov drift bound |b| <= nu holds exactly by construction
  std::vector<double> nu1(sA.bundle.n_paths * sA.bundle.n_nodes(), 0.7);
  ComparisonWitness wb = compare_solutions(
      sA.sol, sB.sol, sA.xi, sB.xi, *sA.gen, sA.aux, *sB.gen, sB.aux,
      ComparisonSide::OnPrimeTrajectory, sA.bundle, params, nu1, abar, tol_comp);
  for (std::size_t i = 0; i < wb.girsanov_b.size(); ++i) {
    CHECK(std::fabs(wb.girsanov_b[i]) <= 0.7 + 1e-15);
  }
}
