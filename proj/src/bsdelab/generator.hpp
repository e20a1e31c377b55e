#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/paths.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

enum class Coefficient { Mu, Nu, Gamma, G1, G2, Alpha };

const char* coefficient_name(Coefficient c);

// Per-bundle data a generator precomputes once (realized auxiliary stopping
// indices, running integrals of |B|^q, ...). Generators stay pure; anything
// path-dependent lives here and travels with the bundle.
struct GeneratorAux {
  std::size_t n_nodes = 0;
  std::map<std::string, std::vector<double>> node_tracks;  // [path][node]
  std::map<std::string, std::vector<double>> path_values;  // [path]

  double node(const std::string& name, std::size_t p, std::size_t i) const;
  double path(const std::string& name, std::size_t p) const;
  bool has_node(const std::string& name) const { return node_tracks.count(name) > 0; }
};

// Evaluation point of a driver or coefficient functional: one (path, node)
// of a bundle plus the generator's prepared aux data.
struct NodeCtx {
  const PathBundle* bundle = nullptr;
  const GeneratorAux* aux = nullptr;
  std::size_t path = 0;
  std::size_t node = 0;

  double t() const { return bundle->t(node); }
  const double* b() const { return bundle->b(path, node); }
  int d() const { return bundle->d; }
  double abs_b() const { return bundle->absb(path, node); }
  double sup_abs_b() const { return bundle->supb(path, node); }
};

// Frobenius norm of the k-by-d matrix z stored row-major.
double frobenius(std::span<const double> z);

// A driver g(t, omega, y, z) together with its structural coefficient
// processes and the hypotheses it claims to satisfy. Checkers test the
// claims; the solver and weights consume the coefficient tracks.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::string name() const = 0;
  virtual int k() const = 0;
  // 0 means any Brownian dimension works; otherwise the bundle must match.
  virtual int required_d() const { return 0; }
  virtual bool depends_on_z() const = 0;
  virtual std::set<std::string> assumptions() const = 0;
  virtual double sublinear_l() const { return 0.0; }
  // When true, the sub-linear checker tests only the single gamma-power
  // integral bound instead of the two-part integral condition.
  virtual bool gamma_bound_only() const { return false; }

  virtual bool has_coefficient(Coefficient c) const = 0;
  virtual double coefficient(Coefficient c, const NodeCtx& ctx) const = 0;

  // out has size k; y has size k; z has size k*d row-major.
  virtual void driver(const NodeCtx& ctx, std::span<const double> y,
                      std::span<const double> z, std::span<double> out) const = 0;

  // Terminal value at the path's horizon node. Default: first Brownian
  // component replicated over the k outputs.
  virtual void terminal(const NodeCtx& at_tau, std::span<double> out) const;

  virtual GeneratorAux prepare(const PathBundle& bundle) const;
};

// Fills every coefficient track the generator declares, validating values,
// and returns the prepared aux data for later driver evaluations.
// Integrand tracks are zeroed past tau; alpha is frozen at its tau value.
GeneratorAux evaluate_coefficients(PathBundle& bundle, const Generator& gen);

}  // namespace bsdelab
