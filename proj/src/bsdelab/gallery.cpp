#include "bsdelab/gallery.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

// exp with the argument capped so drivers stay finite on extreme probe
// values; all capped expressions remain monotone in y.
double safe_exp(double x) { return std::exp(std::min(x, 700.0)); }

using CoeffFn = std::function<double(const NodeCtx&)>;
using DriverFn = std::function<void(const NodeCtx&, std::span<const double>,
                                    std::span<const double>, std::span<double>)>;
using TerminalFn = std::function<void(const NodeCtx&, std::span<double>)>;
using PrepareFn = std::function<GeneratorAux(const PathBundle&)>;

class LambdaGenerator : public Generator {
 public:
  std::string name_;
  int k_ = 1;
  int required_d_ = 0;
  bool depends_on_z_ = false;
  std::set<std::string> assumptions_;
  double l_ = 0.0;
  bool gamma_bound_only_ = false;
  std::map<Coefficient, CoeffFn> coeffs_;
  DriverFn driver_;
  TerminalFn terminal_;
  PrepareFn prepare_;

  std::string name() const override { return name_; }
  int k() const override { return k_; }
  int required_d() const override { return required_d_; }
  bool depends_on_z() const override { return depends_on_z_; }
  std::set<std::string> assumptions() const override { return assumptions_; }
  double sublinear_l() const override { return l_; }
  bool gamma_bound_only() const override { return gamma_bound_only_; }
  bool has_coefficient(Coefficient c) const override { return coeffs_.count(c) > 0; }
  double coefficient(Coefficient c, const NodeCtx& ctx) const override {
    auto it = coeffs_.find(c);
    if (it == coeffs_.end()) {
      throw ConfigError(name_ + ": coefficient " + coefficient_name(c) + " not declared");
    }
    return it->second(ctx);
  }
  void driver(const NodeCtx& ctx, std::span<const double> y,
              std::span<const double> z, std::span<double> out) const override {
    driver_(ctx, y, z, out);
  }
  void terminal(const NodeCtx& at_tau, std::span<double> out) const override {
    if (terminal_) {
      terminal_(at_tau, out);
    } else {
      Generator::terminal(at_tau, out);
    }
  }
  GeneratorAux prepare(const PathBundle& bundle) const override {
    GeneratorAux aux = Generator::prepare(bundle);
    if (prepare_) aux = prepare_(bundle);
    aux.n_nodes = bundle.n_nodes();
    return aux;
  }
};

CoeffFn zero_coeff() {
  return [](const NodeCtx&) { return 0.0; };
}
CoeffFn one_coeff() {
  return [](const NodeCtx&) { return 1.0; };
}

// Left-rule running integral of f over grid nodes, one value per node.
void running_integral(const PathBundle& b,
                      const std::function<double(std::size_t)>& f, double* out) {
  const std::size_t n_nodes = b.n_nodes();
  double cum = 0.0;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    out[i] = cum;
    if (i < b.grid.n_steps) cum += f(i) * b.grid.step(i);
  }
}

// First node where |B| reaches 1; the pinned finite auxiliary stopping time
// used by the indicator factors below.
std::vector<double> sigma_indices(const PathBundle& b) {
  std::vector<double> idx(b.n_paths);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    std::size_t hit = b.grid.n_steps;
    for (std::size_t i = 0; i < b.n_nodes(); ++i) {
      if (b.absb(p, i) >= 1.0) {
        hit = i;
        break;
      }
    }
    idx[p] = static_cast<double>(hit);
  }
  return idx;
}

std::shared_ptr<Generator> make_martingale() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "martingale";
  g->assumptions_ = {"H1c", "H2", "H3c", "H4", "H5"};
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = zero_coeff();
  g->coeffs_[Coefficient::Alpha] = one_coeff();
  g->driver_ = [](const NodeCtx&, std::span<const double>, std::span<const double>,
                  std::span<double> out) { out[0] = 0.0; };
  g->terminal_ = [](const NodeCtx& ctx, std::span<double> out) { out[0] = ctx.b()[0]; };
  return g;
}

std::shared_ptr<Generator> make_drift() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "drift";
  g->assumptions_ = {"H1c", "H2", "H3c", "H4", "H5"};
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = zero_coeff();
  g->coeffs_[Coefficient::Alpha] = one_coeff();
  g->driver_ = [](const NodeCtx&, std::span<const double>, std::span<const double>,
                  std::span<double> out) { out[0] = 1.0; };
  g->terminal_ = [](const NodeCtx&, std::span<double> out) { out[0] = 0.0; };
  return g;
}

std::shared_ptr<Generator> make_decay() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "decay";
  g->assumptions_ = {"H1c", "H2", "H3c", "H4", "H5"};
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = zero_coeff();
  g->coeffs_[Coefficient::Alpha] = one_coeff();
  g->driver_ = [](const NodeCtx&, std::span<const double> y, std::span<const double>,
                  std::span<double> out) { out[0] = -y[0]; };
  g->terminal_ = [](const NodeCtx&, std::span<double> out) { out[0] = 1.0; };
  return g;
}

std::shared_ptr<Generator> make_ex39() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "ex3.9";
  g->depends_on_z_ = true;
  g->assumptions_ = {"H1c", "H2", "H3c", "H4", "H5"};
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = one_coeff();
  g->coeffs_[Coefficient::Alpha] = [](const NodeCtx& ctx) {
    return 1.0 / (1.0 + std::pow(ctx.sup_abs_b(), 6.0));
  };
  g->driver_ = [](const NodeCtx& ctx, std::span<const double> y,
                  std::span<const double> z, std::span<double> out) {
    const double c = std::pow(ctx.abs_b(), 6.0);
    out[0] = safe_exp(-c * y[0]) + std::sin(frobenius(z));
  };
  g->terminal_ = [](const NodeCtx& ctx, std::span<double> out) { out[0] = ctx.b()[0]; };
  return g;
}

std::shared_ptr<Generator> make_ex310(const WeightParams& params) {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "ex3.10";
  g->k_ = 2;
  g->required_d_ = 2;
  g->depends_on_z_ = true;
  g->assumptions_ = {"H1", "H2", "H3b", "H4", "H5"};
  g->coeffs_[Coefficient::Mu] = [](const NodeCtx& ctx) {
    const double ab = ctx.abs_b();
    return ab * ab;
  };
  // The two z components (|z|, sin|z|) are each 1-Lipschitz, so the vector
  // driver is sqrt(2)-Lipschitz in z; the factor keeps the declared bound
  // sharp.
  g->coeffs_[Coefficient::Nu] = [](const NodeCtx& ctx) {
    const double ab = ctx.abs_b();
    return std::sqrt(2.0) * ab * ab * ab;
  };
  g->driver_ = [](const NodeCtx& ctx, std::span<const double> y,
                  std::span<const double> z, std::span<double> out) {
    const double ab = ctx.abs_b();
    const double b2 = ab * ab;
    const double b3 = b2 * ab;
    const double zn = frobenius(z);
    out[0] = b2 * (-y[0] * y[0] * y[0] + y[1]) + b3 * zn;
    out[1] = b2 * (-std::pow(y[1], 5.0) - y[0]) + b3 * std::sin(zn);
  };
  const double beta = params.beta;
  const double nu_coef = params.rho / (2.0 * params.pm1_capped());
  g->prepare_ = [beta, nu_coef](const PathBundle& b) {
    GeneratorAux aux;
    aux.n_nodes = b.n_nodes();
    std::vector<double> cum_a(b.n_paths * b.n_nodes());
    for (std::size_t p = 0; p < b.n_paths; ++p) {
      running_integral(b,
                       [&](std::size_t i) {
                         const double ab = b.absb(p, i);
                         const double b2 = ab * ab;
                         return beta * b2 + nu_coef * 2.0 * b2 * b2 * b2;
                       },
                       &cum_a[p * b.n_nodes()]);
    }
    aux.node_tracks["cum_a"] = std::move(cum_a);
    return aux;
  };
  g->terminal_ = [](const NodeCtx& ctx, std::span<double> out) {
    const double damp = std::exp(-ctx.aux->node("cum_a", ctx.path, ctx.node));
    out[0] = damp * ctx.b()[0];
    out[1] = damp * ctx.b()[1];
  };
  return g;
}

std::shared_ptr<Generator> make_ex311(const WeightParams& params) {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "ex3.11";
  g->depends_on_z_ = true;
  g->assumptions_ = {"H1", "H2", "H3b", "H4", "H5"};
  auto ind_sigma = [](const NodeCtx& ctx) {
    return static_cast<double>(ctx.node) <= ctx.aux->path("sigma_idx", ctx.path) ? 1.0 : 0.0;
  };
  g->coeffs_[Coefficient::Mu] = [ind_sigma](const NodeCtx& ctx) {
    return ctx.abs_b() * ind_sigma(ctx);
  };
  g->coeffs_[Coefficient::Nu] = [ind_sigma](const NodeCtx& ctx) {
    return std::sqrt(ctx.abs_b() * ind_sigma(ctx));
  };
  g->driver_ = [ind_sigma](const NodeCtx& ctx, std::span<const double> y,
                           std::span<const double> z, std::span<double> out) {
    const double ab = ctx.abs_b();
    const double b4 = ab * ab * ab * ab;
    const double ind = ind_sigma(ctx);
    const double yplus = std::max(y[0], 0.0);
    out[0] = b4 * (1.0 - safe_exp(yplus)) + ab * ind * std::fabs(y[0]) +
             std::sqrt(ab * ind) * std::sin(frobenius(z));
  };
  const double beta = params.beta;
  const double nu_coef = params.rho / (2.0 * params.pm1_capped());
  g->prepare_ = [beta, nu_coef](const PathBundle& b) {
    GeneratorAux aux;
    aux.n_nodes = b.n_nodes();
    aux.path_values["sigma_idx"] = sigma_indices(b);
    std::vector<double> cum_a(b.n_paths * b.n_nodes());
    for (std::size_t p = 0; p < b.n_paths; ++p) {
      const double sigma = aux.path_values["sigma_idx"][p];
      running_integral(b,
                       [&](std::size_t i) {
                         const double on = static_cast<double>(i) <= sigma ? 1.0 : 0.0;
                         return (beta + nu_coef) * b.absb(p, i) * on;
                       },
                       &cum_a[p * b.n_nodes()]);
    }
    aux.node_tracks["cum_a"] = std::move(cum_a);
    return aux;
  };
  g->terminal_ = [](const NodeCtx& ctx, std::span<double> out) {
    out[0] = std::exp(-ctx.aux->node("cum_a", ctx.path, ctx.node)) * ctx.b()[0];
  };
  return g;
}

std::shared_ptr<Generator> make_ex46() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "ex4.6";
  g->depends_on_z_ = true;
  g->assumptions_ = {"H1''", "H2", "H3c", "H4", "H5", "H6'"};
  g->l_ = 2.0 / 3.0;
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = one_coeff();
  g->coeffs_[Coefficient::Gamma] = one_coeff();
  g->coeffs_[Coefficient::G1] = zero_coeff();
  g->coeffs_[Coefficient::G2] = zero_coeff();
  g->coeffs_[Coefficient::Alpha] = [](const NodeCtx& ctx) {
    return 1.0 / (1.0 + std::pow(ctx.sup_abs_b(), 3.0));
  };
  g->driver_ = [](const NodeCtx& ctx, std::span<const double> y,
                  std::span<const double> z, std::span<double> out) {
    const double c = std::pow(ctx.abs_b(), 3.0);
    const double zn = frobenius(z);
    out[0] = safe_exp(-c * y[0]) + std::min(zn, std::pow(zn, 2.0 / 3.0));
  };
  g->terminal_ = [](const NodeCtx& ctx, std::span<double> out) { out[0] = ctx.b()[0]; };
  return g;
}

std::shared_ptr<Generator> make_ex47(const WeightParams& params) {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "ex4.7";
  g->depends_on_z_ = true;
  g->assumptions_ = {"H1'", "H2", "H3b", "H4", "H5", "H6"};
  g->l_ = 1.0 / 3.0;
  const double beta = params.beta;
  g->coeffs_[Coefficient::Mu] = [](const NodeCtx& ctx) {
    return std::pow(ctx.abs_b(), 3.0);
  };
  g->coeffs_[Coefficient::Nu] = [](const NodeCtx& ctx) { return std::exp(-ctx.t()); };
  g->coeffs_[Coefficient::Gamma] = [beta](const NodeCtx& ctx) {
    const double ab = ctx.abs_b();
    return std::exp(-beta * ctx.aux->node("cum_b3", ctx.path, ctx.node)) * ab * ab;
  };
  g->coeffs_[Coefficient::G1] = zero_coeff();
  g->coeffs_[Coefficient::G2] = zero_coeff();
  g->driver_ = [beta](const NodeCtx& ctx, std::span<const double> y,
                      std::span<const double> z, std::span<double> out) {
    const double ab = ctx.abs_b();
    const double b3 = ab * ab * ab;
    const double zn = frobenius(z);
    const double gamma =
        std::exp(-beta * ctx.aux->node("cum_b3", ctx.path, ctx.node)) * ab * ab;
    const double zpart = std::min(std::exp(-ctx.t()) * zn, gamma * std::pow(zn, 1.0 / 3.0));
    out[0] = b3 * (1.0 - safe_exp(y[0] * y[0] * y[0])) + b3 * std::sin(y[0]) + zpart;
  };
  g->prepare_ = [beta](const PathBundle& b) {
    GeneratorAux aux;
    aux.n_nodes = b.n_nodes();
    std::vector<double> cum_b3(b.n_paths * b.n_nodes());
    std::vector<double> cum_b2(b.n_paths * b.n_nodes());
    for (std::size_t p = 0; p < b.n_paths; ++p) {
      running_integral(b,
                       [&](std::size_t i) { return std::pow(b.absb(p, i), 3.0); },
                       &cum_b3[p * b.n_nodes()]);
      running_integral(b,
                       [&](std::size_t i) { return std::pow(b.absb(p, i), 2.0); },
                       &cum_b2[p * b.n_nodes()]);
    }
    aux.node_tracks["cum_b3"] = std::move(cum_b3);
    aux.node_tracks["cum_b2"] = std::move(cum_b2);
    return aux;
  };
  g->terminal_ = [beta](const NodeCtx& ctx, std::span<double> out) {
    out[0] = std::exp(-beta * ctx.aux->node("cum_b2", ctx.path, ctx.node)) * ctx.abs_b();
  };
  return g;
}

std::shared_ptr<Generator> make_ex48(const WeightParams& params) {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "ex4.8";
  g->depends_on_z_ = true;
  g->assumptions_ = {"H1'", "H2", "H3b", "H4", "H5", "H6"};
  g->l_ = 0.5;
  g->gamma_bound_only_ = true;
  auto ind = [](const NodeCtx& ctx, const char* which) {
    return static_cast<double>(ctx.node) <= ctx.aux->path(which, ctx.path) ? 1.0 : 0.0;
  };
  g->coeffs_[Coefficient::Mu] = [ind](const NodeCtx& ctx) {
    const double ab = ctx.abs_b();
    return ab * ab * ind(ctx, "sigma_idx");
  };
  g->coeffs_[Coefficient::Nu] = [ind](const NodeCtx& ctx) {
    return ctx.abs_b() * ind(ctx, "sigma_bar_idx");
  };
  g->coeffs_[Coefficient::Gamma] = [ind](const NodeCtx& ctx) {
    return ctx.abs_b() * ind(ctx, "sigma_bar_idx");
  };
  g->coeffs_[Coefficient::G1] = zero_coeff();
  g->coeffs_[Coefficient::G2] = zero_coeff();
  g->driver_ = [ind](const NodeCtx& ctx, std::span<const double> y,
                     std::span<const double> z, std::span<double> out) {
    const double ab = ctx.abs_b();
    const double b4 = ab * ab * ab * ab;
    const double zn = frobenius(z);
    out[0] = -safe_exp(b4 * y[0]) + ab * ab * ind(ctx, "sigma_idx") * std::fabs(y[0]) +
             ab * ind(ctx, "sigma_bar_idx") * (std::sqrt(1.0 + zn) - 1.0) + 1.0;
  };
  const double beta = params.beta;
  const double M = params.M;
  g->prepare_ = [beta, M](const PathBundle& b) {
    GeneratorAux aux;
    aux.n_nodes = b.n_nodes();
    aux.path_values["sigma_idx"] = sigma_indices(b);
    const std::size_t n_nodes = b.n_nodes();
    std::vector<double> sigma_bar(b.n_paths);
    std::vector<double> cum_mu(b.n_paths * n_nodes);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
      const double sigma = aux.path_values["sigma_idx"][p];
      double* cm = &cum_mu[p * n_nodes];
      running_integral(b,
                       [&](std::size_t i) {
                         const double on = static_cast<double>(i) <= sigma ? 1.0 : 0.0;
                         const double ab = b.absb(p, i);
                         return ab * ab * on;
                       },
                       cm);
      // first passage of int_0^t ( e^{(2/3) beta cum_mu} |B|^{4/3} + |B|^2 ) >= M/2
      double cum = 0.0;
      std::size_t hit = b.grid.n_steps;
      bool fired = false;
      for (std::size_t i = 0; i <= b.grid.n_steps && !fired; ++i) {
        if (cum >= 0.5 * M) {
          hit = i;
          fired = true;
          break;
        }
        if (i < b.grid.n_steps) {
          const double ab = b.absb(p, i);
          cum += (std::exp((2.0 / 3.0) * beta * cm[i]) * std::pow(ab, 4.0 / 3.0) + ab * ab) *
                 b.grid.step(i);
        }
      }
      sigma_bar[p] = static_cast<double>(hit);
    }
    aux.path_values["sigma_bar_idx"] = std::move(sigma_bar);
    aux.node_tracks["cum_mu"] = std::move(cum_mu);
    return aux;
  };
  g->terminal_ = [beta](const NodeCtx& ctx, std::span<double> out) {
    out[0] = std::exp(-beta * ctx.aux->node("cum_mu", ctx.path, ctx.node)) * ctx.abs_b();
  };
  return g;
}

std::shared_ptr<Generator> make_cx_ysq() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "cx-ysq";
  g->assumptions_ = {"H2", "H4"};
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = zero_coeff();
  g->driver_ = [](const NodeCtx&, std::span<const double> y, std::span<const double>,
                  std::span<double> out) { out[0] = y[0] * y[0]; };
  return g;
}

std::shared_ptr<Generator> make_cx_zsq() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "cx-zsq";
  g->required_d_ = 1;
  g->depends_on_z_ = true;
  g->assumptions_ = {"H2", "H5"};
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = one_coeff();
  g->driver_ = [](const NodeCtx&, std::span<const double>, std::span<const double> z,
                  std::span<double> out) { out[0] = z[0] * z[0]; };
  return g;
}

std::shared_ptr<Generator> make_cx_zlin() {
  auto g = std::make_shared<LambdaGenerator>();
  g->name_ = "cx-zlin";
  g->required_d_ = 1;
  g->depends_on_z_ = true;
  g->assumptions_ = {"H2", "H5", "H6'"};
  g->l_ = 0.5;
  g->coeffs_[Coefficient::Mu] = zero_coeff();
  g->coeffs_[Coefficient::Nu] = one_coeff();
  g->coeffs_[Coefficient::Gamma] = one_coeff();
  g->coeffs_[Coefficient::G1] = zero_coeff();
  g->coeffs_[Coefficient::G2] = zero_coeff();
  g->driver_ = [](const NodeCtx&, std::span<const double>, std::span<const double> z,
                  std::span<double> out) { out[0] = z[0]; };
  return g;
}

}  // namespace

std::shared_ptr<Generator> make_generator(const std::string& name,
                                          const WeightParams& params) {
  if (name == "martingale") return make_martingale();
  if (name == "drift") return make_drift();
  if (name == "decay") return make_decay();
  if (name == "ex3.9") return make_ex39();
  if (name == "ex3.10") return make_ex310(params);
  if (name == "ex3.11") return make_ex311(params);
  if (name == "ex4.6") return make_ex46();
  if (name == "ex4.7") return make_ex47(params);
  if (name == "ex4.8") return make_ex48(params);
  if (name == "cx-ysq") return make_cx_ysq();
  if (name == "cx-zsq") return make_cx_zsq();
  if (name == "cx-zlin") return make_cx_zlin();
  throw ConfigError("unknown gallery generator: " + name);
}

const std::vector<GalleryEntry>& gallery_entries() {
  static const std::vector<GalleryEntry> entries = {
      {"martingale", 1, 0, "H1c H2 H3c H4 H5", "zero driver, terminal B^1", false},
      {"drift", 1, 0, "H1c H2 H3c H4 H5", "unit drift, zero terminal", false},
      {"decay", 1, 0, "H1c H2 H3c H4 H5", "g=-y, unit terminal", false},
      {"ex3.9", 1, 0, "H1c H2 H3c H4 H5", "exp(-|B|^6 y) + sin|z|", false},
      {"ex3.10", 2, 2, "H1 H2 H3b H4 H5",
       "|B|^2 (-y1^3+y2, -y2^5-y1) + |B|^3 (|z|, sin|z|)", false},
      {"ex3.11", 1, 0, "H1 H2 H3b H4 H5",
       "|B|^4 (1-e^{y+}) + |B| 1[t<=sigma] |y| + sqrt(|B| 1[t<=sigma]) sin|z|", false},
      {"ex4.6", 1, 0, "H1'' H2 H3c H4 H5 H6'", "exp(-|B|^3 y) + min(|z|, |z|^{2/3})", false},
      {"ex4.7", 1, 0, "H1' H2 H3b H4 H5 H6",
       "|B|^3 (1-e^{y^3}) + |B|^3 sin y + min(e^{-t}|z|, gamma |z|^{1/3})", false},
      {"ex4.8", 1, 0, "H1' H2 H3b H4 H5 H6",
       "-e^{|B|^4 y} + |B|^2 1[t<=sigma] |y| + |B| 1[t<=sigmabar] (sqrt(1+|z|)-1) + 1", false},
      {"cx-ysq", 1, 0, "H2 H4", "y^2: violates the monotonicity claim", true},
      {"cx-zsq", 1, 1, "H2 H5", "z^2: violates the z-Lipschitz claim", true},
      {"cx-zlin", 1, 1, "H2 H5 H6'", "z with l=1/2: violates the sub-linear claim", true},
  };
  return entries;
}

StoppingTimeSpec default_stopping(const std::string& name, double t_max) {
  StoppingTimeSpec s;
  if (name == "ex3.10") {
    s.kind = StoppingTimeSpec::Kind::Hitting;
    s.level = 1.0;
    s.functional = "absB";
  } else if (name == "ex4.7") {
    s.kind = StoppingTimeSpec::Kind::Hitting;
    s.level = 1.5;
    s.functional = "absB";
  } else if (name == "ex3.11" || name == "ex4.8") {
    s.kind = StoppingTimeSpec::Kind::Infinite;
  } else {
    s.kind = StoppingTimeSpec::Kind::Deterministic;
    s.T = t_max;
  }
  return s;
}

}  // namespace bsdelab
