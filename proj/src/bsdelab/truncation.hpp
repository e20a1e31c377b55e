#pragma once

#include <memory>
#include <span>
#include <vector>

#include "bsdelab/generator.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

// Radial clamp x -> x r / (|x| v r): identity for |x| <= r, direction
// preserved, |result| = min(|x|, r). r = 0 maps everything to 0.
void truncate(std::span<const double> x, double r, std::span<double> out);
std::vector<double> truncate(std::span<const double> x, double r);
double truncate_scalar(double x, double r);

// Bounded approximation (xi_n, g_n) of unbounded data at rank n:
//   xi_n       = clamp of xi at radius n * atilde_tau,
//   g_n(t,y,z) = g(t,y,z) - g(t,0,0) + clamp of g(t,0,0) at n e^{-t} atilde_t,
// with atilde = exp(-cum) taken from a full-a weight track.
struct TruncatedData {
  std::vector<double> xi_n;                 // [path][k]
  std::shared_ptr<const Generator> gen_n;   // shares coefficients with the base
};

TruncatedData truncated_data(std::shared_ptr<const Generator> gen,
                             std::span<const double> xi, int n,
                             std::shared_ptr<const WeightTrack> weights);

// Wraps a driver with the z argument frozen to a stored per-(path,node)
// array; reports itself z-independent so the plain backward pass applies.
class FrozenZGenerator : public Generator {
 public:
  FrozenZGenerator(std::shared_ptr<const Generator> base,
                   std::shared_ptr<const std::vector<double>> z_frozen,
                   std::size_t n_steps);

  std::string name() const override;
  int k() const override { return base_->k(); }
  int required_d() const override { return base_->required_d(); }
  bool depends_on_z() const override { return false; }
  std::set<std::string> assumptions() const override { return base_->assumptions(); }
  double sublinear_l() const override { return base_->sublinear_l(); }
  bool has_coefficient(Coefficient c) const override { return base_->has_coefficient(c); }
  double coefficient(Coefficient c, const NodeCtx& ctx) const override {
    return base_->coefficient(c, ctx);
  }
  void driver(const NodeCtx& ctx, std::span<const double> y,
              std::span<const double> z, std::span<double> out) const override;
  void terminal(const NodeCtx& at_tau, std::span<double> out) const override {
    base_->terminal(at_tau, out);
  }
  GeneratorAux prepare(const PathBundle& bundle) const override {
    return base_->prepare(bundle);
  }

 private:
  std::shared_ptr<const Generator> base_;
  std::shared_ptr<const std::vector<double>> z_frozen_;  // [path][step][k*d]
  std::size_t n_steps_;
};

}  // namespace bsdelab
