#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "bsdelab/errors.hpp"
#include "bsdelab/expr.hpp"
#include "bsdelab/gallery.hpp"
#include "bsdelab/generator.hpp"
#include "bsdelab/grid.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/paths.hpp"
#include "bsdelab/weights.hpp"

using namespace bsdelab;

TEST_CASE("uniform grid nodes") {
  const TimeGrid g = build_grid(1.0, 4);
  const std::vector<double> expect = {0.0, 0.25, 0.5, 0.75, 1.0};
  REQUIRE(g.nodes.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g.nodes[i] == doctest::Approx(expect[i]).epsilon(1e-15));
  const TimeGrid g1 = build_grid(1.0, 1);
  CHECK(g1.nodes == std::vector<double>{0.0, 1.0});
}

TEST_CASE("geometric grid against the hand geometric series") {
  // steps h 2^j with h = 2 (2-1)/(2^8-1) = 2/255, so t_i = 2 (2^i - 1)/255
  const TimeGrid g = build_grid(2.0, 8, GridSpacing::Geometric, 2.0);
  REQUIRE(g.nodes.size() == 9);
  for (std::size_t i = 0; i <= 8; ++i) {
    const double expect = 2.0 * (std::pow(2.0, static_cast<double>(i)) - 1.0) / 255.0;
    CHECK(g.nodes[i] == doctest::Approx(expect).epsilon(1e-13));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < 8; ++i) sum += g.step(i);
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("grid rejects bad input") {
  CHECK_THROWS_AS(build_grid(0.0, 4), ConfigError);
  CHECK_THROWS_AS(build_grid(-1.0, 4), ConfigError);
  CHECK_THROWS_AS(build_grid(1.0, 0), ConfigError);
}

TEST_CASE("brownian simulation is deterministic and thread independent") {
  const TimeGrid g = build_grid(1.0, 16);
  set_thread_count(1);
  const PathBundle a = simulate_brownian(g, 2000, 2, 77);
  set_thread_count(8);
  const PathBundle b = simulate_brownian(g, 2000, 2, 77);
  set_thread_count(2);
  CHECK(a.increments == b.increments);
  CHECK(a.states == b.states);
  const PathBundle c = simulate_brownian(g, 2000, 2, 78);
  CHECK(a.increments != c.increments);
}

TEST_CASE("brownian moments and independence at monte carlo scale") {
  const TimeGrid g = build_grid(1.0, 50);
  const PathBundle b = simulate_brownian(g, 10000, 2, 2024);
  const MomentDiagnostics diag = brownian_moment_diagnostics(b);
  CHECK(diag.step_pass_fraction >= 0.99);
  CHECK(diag.max_abs_cross_corr < 5.0 / std::sqrt(10000.0));
}

TEST_CASE("deterministic stopping at the horizon") {
  const TimeGrid g = build_grid(1.0, 10);
  PathBundle b = simulate_brownian(g, 100, 1, 5);
  StoppingTimeSpec spec;
  spec.kind = StoppingTimeSpec::Kind::Deterministic;
  spec.T = 1.0;
  realize_stopping_time(b, spec);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    CHECK(b.tau_index[p] == 10);
    CHECK(b.censored[p] == 0);
  }
  spec.T = 0.55;  // nearest node not exceeding T
  realize_stopping_time(b, spec);
  for (std::size_t p = 0; p < b.n_paths; ++p) CHECK(b.tau_index[p] == 5);
}

TEST_CASE("hitting rule matches an independent scan") {
  const TimeGrid g = build_grid(1.0, 64);
  PathBundle b = simulate_brownian(g, 500, 1, 31);
  StoppingTimeSpec spec;
  spec.kind = StoppingTimeSpec::Kind::Hitting;
  spec.level = 0.5;
  spec.functional = "absB";
  auto idx = realize_indices(b, spec);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    std::uint32_t expect = 64;
    for (std::uint32_t i = 0; i <= 64; ++i) {
      if (b.absb(p, i) >= 0.5) {
        expect = i;
        break;
      }
    }
    CHECK(idx[p] == expect);
  }
}

TEST_CASE("capped integral rule matches a prefix-sum oracle") {
  const TimeGrid g = build_grid(1.0, 32);
  PathBundle b = simulate_brownian(g, 300, 1, 99);
  std::vector<double> nu(b.n_paths * b.n_nodes());
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    for (std::size_t i = 0; i < b.n_nodes(); ++i) {
      nu[p * b.n_nodes() + i] = std::fabs(b.absb(p, i));
    }
  }
  b.tracks["nu"] = nu;
  StoppingTimeSpec spec;
  spec.kind = StoppingTimeSpec::Kind::CappedIntegral;
  spec.threshold = 0.05;
  spec.integrand = "nu2";
  auto idx = realize_indices(b, spec);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    // independent prefix-sum scan with the left rule
    double cum = 0.0;
    std::uint32_t expect = 32;
    bool fired = false;
    for (std::uint32_t i = 1; i <= 32 && !fired; ++i) {
      const double v = nu[p * b.n_nodes() + i - 1];
      cum += v * v * g.step(i - 1);
      if (cum >= spec.threshold) {
        expect = i;
        fired = true;
      }
    }
    CHECK(idx[p] == expect);
  }
  CHECK_THROWS_AS(
      [&] {
        StoppingTimeSpec bad = spec;
        bad.integrand = "nope";
        realize_indices(b, bad);
      }(),
      ConfigError);
}

TEST_CASE("stopping rules are adapted: the future never moves tau") {
  const TimeGrid g = build_grid(1.0, 40);
  PathBundle b = simulate_brownian(g, 200, 1, 123);
  std::vector<double> nu(b.n_paths * b.n_nodes(), 1.0);
  b.tracks["nu"] = nu;

  std::vector<StoppingTimeSpec> specs(3);
  specs[0].kind = StoppingTimeSpec::Kind::Hitting;
  specs[0].level = 0.4;
  specs[1].kind = StoppingTimeSpec::Kind::Deterministic;
  specs[1].T = 0.5;
  specs[2].kind = StoppingTimeSpec::Kind::CappedIntegral;
  specs[2].threshold = 0.33;

  for (const auto& spec : specs) {
    const auto idx = realize_indices(b, spec);
    PathBundle tampered = b;
    for (std::size_t p = 0; p < b.n_paths; ++p) {
      for (std::size_t i = idx[p] + 1; i < b.n_nodes(); ++i) {
        tampered.abs_b[p * b.n_nodes() + i] = 1e9;
        tampered.tracks["nu"][p * b.n_nodes() + i] = 1e9;
      }
    }
    const auto idx2 = realize_indices(tampered, spec);
    CHECK(idx == idx2);
  }
}

TEST_CASE("gallery coefficient tracks match their structural definitions") {
  const TimeGrid g = build_grid(1.0, 20);
  WeightParams params;

  PathBundle b = simulate_brownian(g, 50, 1, 10);
  auto gen39 = make_generator("ex3.9", params);
  evaluate_coefficients(b, *gen39);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    for (std::size_t i = 0; i < b.n_nodes(); ++i) {
      CHECK(b.track_at("mu", p, i) == 0.0);
      CHECK(b.track_at("nu", p, i) == 1.0);
    }
  }

  PathBundle b2 = simulate_brownian(g, 50, 2, 11);
  auto gen310 = make_generator("ex3.10", params);
  evaluate_coefficients(b2, *gen310);
  for (std::size_t p = 0; p < b2.n_paths; ++p) {
    for (std::size_t i = 0; i < b2.n_nodes(); ++i) {
      const double ab = b2.absb(p, i);
      CHECK(b2.track_at("mu", p, i) == doctest::Approx(ab * ab).epsilon(1e-14));
      // |B|^3 from the two 1-Lipschitz z components, carrying the sharp
      // sqrt(2) vector factor
      CHECK(b2.track_at("nu", p, i) ==
            doctest::Approx(std::sqrt(2.0) * ab * ab * ab).epsilon(1e-14));
    }
  }
}

TEST_CASE("all-zero expression generator produces zero tracks") {
  ExprGeneratorSpec spec;
  spec.name = "zero";
  spec.driver = {"0"};
  spec.coefficients = {{"mu", "0"}, {"nu", "0"}};
  auto gen = make_expr_generator(spec);
  const TimeGrid g = build_grid(1.0, 8);
  PathBundle b = simulate_brownian(g, 10, 1, 1);
  evaluate_coefficients(b, *gen);
  for (double v : b.tracks["mu"]) CHECK(v == 0.0);
  for (double v : b.tracks["nu"]) CHECK(v == 0.0);
}

TEST_CASE("negative coefficient values are a data error naming the spot") {
  ExprGeneratorSpec spec;
  spec.name = "neg";
  spec.driver = {"0"};
  spec.coefficients = {{"mu", "0-1"}};
  auto gen = make_expr_generator(spec);
  const TimeGrid g = build_grid(1.0, 4);
  PathBundle b = simulate_brownian(g, 3, 1, 1);
  CHECK_THROWS_AS(evaluate_coefficients(b, *gen), DataError);
}

TEST_CASE("weight accumulation closed forms") {
  const TimeGrid g = build_grid(1.0, 10);
  PathBundle b = simulate_brownian(g, 5, 1, 3);
  b.tracks["mu"] = std::vector<double>(b.n_paths * b.n_nodes(), 0.0);
  b.tracks["nu"] = std::vector<double>(b.n_paths * b.n_nodes(), 1.0);

  WeightParams params;  // p=2, beta=1, rho=2: a = 0 + 2/(2*1) * 1 = 1
  WeightTrack w = accumulate_weight(b, params, WeightVariant::FullA);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    for (std::size_t i = 0; i < b.n_nodes(); ++i) {
      CHECK(w.a(p, i) == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(w.w(p, i) == doctest::Approx(std::exp(g.nodes[i])).epsilon(1e-13));
    }
    CHECK(w.w(p, 0) == 1.0);
  }

  // p = 3/2 exercises the (p-1) branch of the bracket: a = 2/(2*(1/2)) = 2
  WeightParams params32;
  params32.p = 1.5;
  WeightTrack w32 = accumulate_weight(b, params32, WeightVariant::FullA);
  for (std::size_t i = 0; i < b.n_nodes(); ++i) {
    CHECK(w32.a(0, i) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(w32.w(0, i) == doctest::Approx(std::exp(2.0 * g.nodes[i])).epsilon(1e-13));
  }

  // beta-mu-only with mu = 0 is the unit weight
  WeightTrack wb = accumulate_weight(b, params, WeightVariant::BetaMuOnly);
  for (std::size_t i = 0; i < b.n_nodes(); ++i) CHECK(wb.w(0, i) == 1.0);

  // full-a demands p > 1
  WeightParams p1;
  p1.p = 1.0;
  CHECK_THROWS_AS(accumulate_weight(b, p1, WeightVariant::FullA), ConfigError);

  // cumulative integral never decreases
  for (std::size_t i = 0; i + 1 < b.n_nodes(); ++i) CHECK(w.cum(0, i + 1) >= w.cum(0, i));
}

TEST_CASE("modified alpha closed form and monotonicity") {
  const TimeGrid g = build_grid(1.0, 10);
  PathBundle b = simulate_brownian(g, 4, 1, 9);
  const std::size_t n = b.n_paths * b.n_nodes();
  std::vector<double> alpha(n, 1.0), mu0(n, 0.0), mu1(n, 1.0);

  // mu = 0, alpha = 1: alpha_hat = e^{-t}
  auto ahat = modified_alpha(b, alpha, mu0, 1.0);
  for (std::size_t i = 0; i < b.n_nodes(); ++i) {
    CHECK(ahat[i] == doctest::Approx(std::exp(-g.nodes[i])).epsilon(1e-13));
  }

  // mu = 1, beta = 1, alpha = 1: alpha_hat = e^{-2t} (left rule is exact here)
  auto ahat2 = modified_alpha(b, alpha, mu1, 1.0);
  for (std::size_t i = 0; i < b.n_nodes(); ++i) {
    CHECK(ahat2[i] == doctest::Approx(std::exp(-2.0 * g.nodes[i])).epsilon(1e-13));
  }

  // alpha already below the cap stays put
  std::vector<double> tiny(n, 1e-9);
  auto ahat3 = modified_alpha(b, tiny, mu1, 1.0);
  for (std::size_t i = 0; i < n; ++i) CHECK(ahat3[i] == 1e-9);

  // output <= alpha and <= e^{-t}, non-increasing along each path
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    for (std::size_t i = 0; i < b.n_nodes(); ++i) {
      const double v = ahat2[p * b.n_nodes() + i];
      CHECK(v <= 1.0);
      CHECK(v <= std::exp(-g.nodes[i]) + 1e-15);
      if (i > 0) CHECK(v <= ahat2[p * b.n_nodes() + i - 1] + 1e-15);
    }
  }
}

TEST_CASE("bundle serialization round trip") {
  const TimeGrid g = build_grid(0.5, 12);
  PathBundle b = simulate_brownian(g, 40, 2, 424242);
  StoppingTimeSpec spec;
  spec.kind = StoppingTimeSpec::Kind::Hitting;
  spec.level = 0.3;
  b.tracks["mu"] = std::vector<double>(b.n_paths * b.n_nodes(), 0.5);
  realize_stopping_time(b, spec);

  const auto file = std::filesystem::temp_directory_path() / "bsdelab_bundle_test.bin";
  save_bundle(b, file);
  const PathBundle r = load_bundle(file);
  CHECK(r.increments == b.increments);
  CHECK(r.states == b.states);
  CHECK(r.tau_index == b.tau_index);
  CHECK(r.censored == b.censored);
  CHECK(r.tracks.at("mu") == b.tracks.at("mu"));
  CHECK(r.seed == b.seed);
  std::filesystem::remove(file);
}
