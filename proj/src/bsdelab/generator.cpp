#include "bsdelab/generator.hpp"

#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

const char* coefficient_name(Coefficient c) {
  switch (c) {
    case Coefficient::Mu: return "mu";
    case Coefficient::Nu: return "nu";
    case Coefficient::Gamma: return "gamma";
    case Coefficient::G1: return "g1";
    case Coefficient::G2: return "g2";
    case Coefficient::Alpha: return "alpha";
  }
  return "?";
}

double GeneratorAux::node(const std::string& name, std::size_t p, std::size_t i) const {
  auto it = node_tracks.find(name);
  if (it == node_tracks.end()) throw ConfigError("generator aux track missing: " + name);
  return it->second[p * n_nodes + i];
}

double GeneratorAux::path(const std::string& name, std::size_t p) const {
  auto it = path_values.find(name);
  if (it == path_values.end()) throw ConfigError("generator aux values missing: " + name);
  return it->second[p];
}

double frobenius(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return std::sqrt(s);
}

void Generator::terminal(const NodeCtx& at_tau, std::span<double> out) const {
  for (auto& v : out) v = at_tau.b()[0];
}

GeneratorAux Generator::prepare(const PathBundle& bundle) const {
  GeneratorAux aux;
  aux.n_nodes = bundle.n_nodes();
  return aux;
}

GeneratorAux evaluate_coefficients(PathBundle& bundle, const Generator& gen) {
  if (gen.required_d() != 0 && gen.required_d() != bundle.d) {
    throw ConfigError("generator " + gen.name() + " needs d = " +
                      std::to_string(gen.required_d()));
  }
  GeneratorAux aux = gen.prepare(bundle);
  const std::size_t n_nodes = bundle.n_nodes();

  static const Coefficient all[] = {Coefficient::Mu,    Coefficient::Nu,
                                    Coefficient::Gamma, Coefficient::G1,
                                    Coefficient::G2,    Coefficient::Alpha};
  for (Coefficient c : all) {
    if (!gen.has_coefficient(c)) continue;
    std::vector<double> tr(bundle.n_paths * n_nodes, 0.0);
    const bool is_alpha = (c == Coefficient::Alpha);
    std::vector<std::string> errors(block_count(bundle.n_paths));
    parallel_blocks(bundle.n_paths, [&](std::size_t begin, std::size_t end, std::size_t blk) {
      for (std::size_t p = begin; p < end; ++p) {
        const std::size_t tau = bundle.tau_index[p];
        double hold = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
          if (i <= tau) {
            NodeCtx ctx{&bundle, &aux, p, i};
            const double v = gen.coefficient(c, ctx);
            if (!std::isfinite(v) || v < 0.0) {
              if (errors[blk].empty()) {
                errors[blk] = std::string("coefficient ") + coefficient_name(c) +
                              " invalid at path " + std::to_string(p) + " node " +
                              std::to_string(i) + " value " + std::to_string(v);
              }
              return;
            }
            tr[p * n_nodes + i] = v;
            hold = v;
          } else {
            tr[p * n_nodes + i] = is_alpha ? hold : 0.0;
          }
        }
      }
    });
    for (const auto& e : errors) {
      if (!e.empty()) throw DataError("evaluate_coefficients: " + e);
    }
    bundle.tracks[coefficient_name(c)] = std::move(tr);
  }
  return aux;
}

}  // namespace bsdelab
