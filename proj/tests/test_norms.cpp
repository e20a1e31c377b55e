#include <doctest.h>

#include <cmath>
#include <vector>

#include "bsdelab/errors.hpp"
#include "bsdelab/norms.hpp"
#include "bsdelab/paths.hpp"
#include "bsdelab/rng.hpp"
#include "bsdelab/weights.hpp"
#include "oracles.hpp"

using namespace bsdelab;

namespace {

// Tiny bundle with hand-fillable arrays: n_paths <= 3, n_steps <= 4.
struct Tiny {
  PathBundle bundle;
  WeightTrack weights;
  std::vector<double> Y;   // [path][node][k]
  std::vector<double> Z;   // [path][step][k]
  std::vector<double> xi;  // [path][k]
  int k = 1;
};

Tiny make_tiny(std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
               bool random_weights) {
  Tiny t;
  t.bundle = simulate_brownian(build_grid(1.0, n_steps), n_paths, 1, seed);
  std::vector<double> a(n_paths * t.bundle.n_nodes(), 0.0);
  if (random_weights) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 2.0 * uniform_draw(seed, 1000, i);
  }
  t.weights = weight_from_exponent(t.bundle, a);
  const std::size_t n_nodes = t.bundle.n_nodes();
  t.Y.resize(n_paths * n_nodes);
  t.Z.resize(n_paths * n_steps);
  t.xi.resize(n_paths);
  for (std::size_t i = 0; i < t.Y.size(); ++i) {
    t.Y[i] = 3.0 * (uniform_draw(seed, 2000, i) - 0.5);
  }
  for (std::size_t i = 0; i < t.Z.size(); ++i) {
    t.Z[i] = 3.0 * (uniform_draw(seed, 3000, i) - 0.5);
  }
  for (std::size_t i = 0; i < t.xi.size(); ++i) {
    t.xi[i] = 3.0 * (uniform_draw(seed, 4000, i) - 0.5);
  }
  return t;
}

}  // namespace

TEST_CASE("norms equal the brute-force oracle on tiny bundles") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    for (bool rw : {false, true}) {
      Tiny t = make_tiny(3, 4, seed, rw);
      std::vector<double> steps(t.bundle.grid.n_steps);
      for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = t.bundle.grid.step(i);
      for (double p : {0.5, 1.0, 2.0, 3.0}) {
        const double tn = terminal_norm(t.bundle, t.xi, 1, t.weights, p).value;
        const double to = oracle::terminal_norm(3, 1, t.xi, t.weights.cum_integral,
                                                t.bundle.n_nodes(), t.bundle.tau_index, p);
        CHECK(tn == doctest::Approx(to).epsilon(1e-12));

        const double sn = sup_norm(t.bundle, t.Y, 1, t.weights, p).value;
        const double so = oracle::sup_norm(3, 1, t.Y, t.weights.cum_integral,
                                           t.bundle.n_nodes(), t.bundle.tau_index, p);
        CHECK(sn == doctest::Approx(so).epsilon(1e-12));

        const double zn = z_norm(t.bundle, t.Z, 1, t.weights, p).value;
        const double zo = oracle::z_norm(3, 1, t.Z, t.weights.cum_integral,
                                         t.bundle.n_nodes(), t.bundle.tau_index, steps, p);
        CHECK(zn == doctest::Approx(zo).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("norm point cases") {
  Tiny t = make_tiny(3, 4, 9, false);

  // zero process, zero terminal
  std::vector<double> zeros_y(t.Y.size(), 0.0), zeros_z(t.Z.size(), 0.0),
      zeros_xi(t.xi.size(), 0.0);
  CHECK(terminal_norm(t.bundle, zeros_xi, 1, t.weights, 2.0).value == 0.0);
  CHECK(sup_norm(t.bundle, zeros_y, 1, t.weights, 2.0).value == 0.0);
  CHECK(z_norm(t.bundle, zeros_z, 1, t.weights, 2.0).value == 0.0);

  // Y_t = t with unit weights at p = 1: sup attained at t = 1
  std::vector<double> ramp(t.Y.size());
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < t.bundle.n_nodes(); ++i) {
      ramp[p * t.bundle.n_nodes() + i] = t.bundle.t(i);
    }
  }
  CHECK(sup_norm(t.bundle, ramp, 1, t.weights, 1.0).value ==
        doctest::Approx(1.0).epsilon(1e-14));

  // Z = 1 over the unit interval at p = 2
  std::vector<double> ones_z(t.Z.size(), 1.0);
  CHECK(z_norm(t.bundle, ones_z, 1, t.weights, 2.0).value ==
        doctest::Approx(1.0).epsilon(1e-13));

  // empty bundle and size mismatch are configuration errors
  CHECK_THROWS_AS(terminal_norm(t.bundle, std::vector<double>(1, 0.0), 1, t.weights, 2.0),
                  ConfigError);
  CHECK_THROWS_AS(terminal_norm(t.bundle, t.xi, 1, t.weights, 0.0), ConfigError);
  CHECK_THROWS_AS(sup_norm(t.bundle, std::vector<double>{}, 1, t.weights, 1.0),
                  ConfigError);
}

TEST_CASE("terminal norm of B_1 at p=2 matches the Gaussian second moment") {
  PathBundle b = simulate_brownian(build_grid(1.0, 20), 20000, 1, 31415);
  std::vector<double> zero(b.n_paths * b.n_nodes(), 0.0);
  WeightTrack w = weight_from_exponent(b, zero);
  std::vector<double> xi(b.n_paths);
  for (std::size_t p = 0; p < b.n_paths; ++p) xi[p] = b.b(p, b.grid.n_steps)[0];
  const NormResult r = terminal_norm(b, xi, 1, w, 2.0);
  CHECK(r.value == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r.std_error < 0.02);
}

TEST_CASE("absolute homogeneity in both outer-power branches") {
  Tiny t = make_tiny(3, 4, 21, true);
  const double lambda = 2.5;
  std::vector<double> scaled = t.Y;
  for (auto& v : scaled) v *= lambda;

  // p >= 1: value scales by lambda
  const double s1 = sup_norm(t.bundle, t.Y, 1, t.weights, 2.0).value;
  const double s2 = sup_norm(t.bundle, scaled, 1, t.weights, 2.0).value;
  CHECK(s2 == doctest::Approx(lambda * s1).epsilon(1e-12));

  // p < 1: value scales by lambda^p
  const double q1 = sup_norm(t.bundle, t.Y, 1, t.weights, 0.5).value;
  const double q2 = sup_norm(t.bundle, scaled, 1, t.weights, 0.5).value;
  CHECK(q2 == doctest::Approx(std::pow(lambda, 0.5) * q1).epsilon(1e-12));
}

TEST_CASE("pointwise-larger weights never decrease a norm") {
  Tiny t = make_tiny(3, 4, 33, true);
  std::vector<double> bigger_a = t.weights.a_values;
  for (auto& v : bigger_a) v += 0.5;
  const WeightTrack w2 = weight_from_exponent(t.bundle, bigger_a);
  for (double p : {0.5, 1.0, 2.0}) {
    CHECK(sup_norm(t.bundle, t.Y, 1, w2, p).value >=
          sup_norm(t.bundle, t.Y, 1, t.weights, p).value - 1e-14);
    CHECK(z_norm(t.bundle, t.Z, 1, w2, p).value >=
          z_norm(t.bundle, t.Z, 1, t.weights, p).value - 1e-14);
    CHECK(terminal_norm(t.bundle, t.xi, 1, w2, p).value >=
          terminal_norm(t.bundle, t.xi, 1, t.weights, p).value - 1e-14);
  }
}

TEST_CASE("class (D) lower bound over a stopping family") {
  // constant process: every family member sees the constant
  PathBundle b = simulate_brownian(build_grid(1.0, 10), 500, 1, 77);
  std::vector<double> zero(b.n_paths * b.n_nodes(), 0.0);
  WeightTrack w = weight_from_exponent(b, zero);
  std::vector<double> constY(b.n_paths * b.n_nodes(), 2.5);
  StoppingTimeSpec t0, t1;
  t0.kind = StoppingTimeSpec::Kind::Deterministic;
  t0.T = 0.0;
  t1.kind = StoppingTimeSpec::Kind::Deterministic;
  t1.T = 1.0;
  NormResult r = class_D_norm(b, constY, 1, w, {t0, t1}, {"t=0", "t=1"});
  CHECK(r.value == doctest::Approx(2.5).epsilon(1e-14));

  // positive submartingale sample |B|: the max is attained at T
  std::vector<double> absb(b.n_paths * b.n_nodes());
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    for (std::size_t i = 0; i < b.n_nodes(); ++i) {
      absb[p * b.n_nodes() + i] = b.absb(p, i);
    }
  }
  r = class_D_norm(b, absb, 1, w, {t0, t1}, {"t=0", "t=1"});
  CHECK(r.note == "t=1");
  CHECK(r.value > 0.5);

  // the family estimate dominates every member's own estimate
  NormResult single = class_D_norm(b, absb, 1, w, {t0}, {"t=0"});
  CHECK(r.value >= single.value);

  CHECK_THROWS_AS(class_D_norm(b, std::vector<double>{}, 1, w, {t0}), ConfigError);
  CHECK_THROWS_AS(class_D_norm(b, absb, 1, w, {}), ConfigError);
}

TEST_CASE("interval norms respect the start node and keep absolute weights") {
  Tiny t = make_tiny(3, 4, 55, true);
  std::vector<std::uint32_t> start(3, 2);
  const NormResult full = sup_norm(t.bundle, t.Y, 1, t.weights, 2.0);
  const NormResult fromt = sup_norm(t.bundle, t.Y, 1, t.weights, 2.0, start);
  CHECK(fromt.value <= full.value + 1e-14);

  // oracle for the interval version: same exp(cum) factors, later nodes only
  double mean = 0.0;
  for (std::size_t p = 0; p < 3; ++p) {
    double sup = 0.0;
    for (std::size_t i = 2; i <= t.bundle.tau_index[p]; ++i) {
      const double y = t.Y[p * t.bundle.n_nodes() + i];
      sup = std::max(sup, std::exp(2.0 * t.weights.cum(p, i)) * y * y);
    }
    mean += sup;
  }
  mean = std::sqrt(mean / 3.0);
  CHECK(fromt.value == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("saturated paths are excluded and counted") {
  PathBundle b = simulate_brownian(build_grid(1.0, 4), 3, 1, 5);
  std::vector<double> a(b.n_paths * b.n_nodes(), 0.0);
  for (std::size_t i = 0; i < b.n_nodes(); ++i) a[0 * b.n_nodes() + i] = 1000.0;
  WeightTrack w = weight_from_exponent(b, a);
  std::vector<double> Y(b.n_paths * b.n_nodes(), 1.0);
  const NormResult r = sup_norm(b, Y, 1, w, 2.0);
  CHECK(r.saturated_paths == 1);
  CHECK(r.used_paths == 2);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-13));
}
