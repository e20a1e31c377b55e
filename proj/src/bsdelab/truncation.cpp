#include "bsdelab/truncation.hpp"

#include <cmath>

#include "bsdelab/errors.hpp"

namespace bsdelab {

void truncate(std::span<const double> x, double r, std::span<double> out) {
  double norm = 0.0;
  for (double v : x) norm += v * v;
  norm = std::sqrt(norm);
  const double denom = std::max(norm, r);
  const double scale = (denom > 0.0) ? r / denom : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale;
}

std::vector<double> truncate(std::span<const double> x, double r) {
  std::vector<double> out(x.size());
  truncate(x, r, out);
  return out;
}

double truncate_scalar(double x, double r) {
  double out;
  truncate({&x, 1}, r, {&out, 1});
  return out;
}

namespace {

class TruncatedGenerator : public Generator {
 public:
  TruncatedGenerator(std::shared_ptr<const Generator> base, int n,
                     std::shared_ptr<const WeightTrack> weights)
      : base_(std::move(base)), n_(n), weights_(std::move(weights)) {}

  std::string name() const override {
    return base_->name() + "/trunc" + std::to_string(n_);
  }
  int k() const override { return base_->k(); }
  int required_d() const override { return base_->required_d(); }
  bool depends_on_z() const override { return base_->depends_on_z(); }
  std::set<std::string> assumptions() const override { return base_->assumptions(); }
  double sublinear_l() const override { return base_->sublinear_l(); }
  bool has_coefficient(Coefficient c) const override { return base_->has_coefficient(c); }
  double coefficient(Coefficient c, const NodeCtx& ctx) const override {
    return base_->coefficient(c, ctx);
  }

  void driver(const NodeCtx& ctx, std::span<const double> y,
              std::span<const double> z, std::span<double> out) const override {
    const int kk = k();
    std::vector<double> g0(kk), zero_y(kk, 0.0), zero_z(kk * ctx.d(), 0.0), clamped(kk);
    base_->driver(ctx, y, z, out);
    base_->driver(ctx, zero_y, zero_z, g0);
    const double atilde = std::exp(-weights_->cum(ctx.path, ctx.node));
    const double radius = n_ * std::exp(-ctx.t()) * atilde;
    truncate(g0, radius, clamped);
    for (int c = 0; c < kk; ++c) out[c] += clamped[c] - g0[c];
  }

  void terminal(const NodeCtx& at_tau, std::span<double> out) const override {
    base_->terminal(at_tau, out);
    const double atilde = std::exp(-weights_->cum(at_tau.path, at_tau.node));
    std::vector<double> clamped(out.size());
    truncate(out, n_ * atilde, clamped);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = clamped[c];
  }

  GeneratorAux prepare(const PathBundle& bundle) const override {
    return base_->prepare(bundle);
  }

 private:
  std::shared_ptr<const Generator> base_;
  int n_;
  std::shared_ptr<const WeightTrack> weights_;
};

}  // namespace

TruncatedData truncated_data(std::shared_ptr<const Generator> gen,
                             std::span<const double> xi, int n,
                             std::shared_ptr<const WeightTrack> weights) {
  if (n < 1) throw ConfigError("truncated_data: n must be >= 1");
  if (weights->variant != WeightVariant::FullA) {
    throw ConfigError("truncated_data: weights must be the full-a variant");
  }
  const int k = gen->k();
  const std::size_t n_paths = weights->n_paths;
  if (xi.size() != n_paths * static_cast<std::size_t>(k)) {
    throw ConfigError("truncated_data: xi size mismatch");
  }
  TruncatedData out;
  out.xi_n.resize(xi.size());
  for (std::size_t p = 0; p < n_paths; ++p) {
    // cum at the last node equals cum at tau because the exponent is zeroed
    // past the horizon.
    const double atilde = std::exp(-weights->cum(p, weights->n_nodes - 1));
    truncate(xi.subspan(p * k, k), n * atilde,
             std::span<double>(out.xi_n).subspan(p * k, k));
  }
  out.gen_n = std::make_shared<TruncatedGenerator>(std::move(gen), n, std::move(weights));
  return out;
}

FrozenZGenerator::FrozenZGenerator(std::shared_ptr<const Generator> base,
                                   std::shared_ptr<const std::vector<double>> z_frozen,
                                   std::size_t n_steps)
    : base_(std::move(base)), z_frozen_(std::move(z_frozen)), n_steps_(n_steps) {}

std::string FrozenZGenerator::name() const { return base_->name() + "/frozen-z"; }

void FrozenZGenerator::driver(const NodeCtx& ctx, std::span<const double> y,
                              std::span<const double> z, std::span<double> out) const {
  (void)z;
  const std::size_t kd = static_cast<std::size_t>(k()) * ctx.d();
  if (ctx.node >= n_steps_) {
    std::vector<double> zero(kd, 0.0);
    base_->driver(ctx, y, zero, out);
    return;
  }
  std::span<const double> zf(z_frozen_->data() + (ctx.path * n_steps_ + ctx.node) * kd, kd);
  base_->driver(ctx, y, zf, out);
}

}  // namespace bsdelab
