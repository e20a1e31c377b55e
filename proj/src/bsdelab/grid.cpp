#include "bsdelab/grid.hpp"

#include <cmath>
#include <string>

#include "bsdelab/errors.hpp"

namespace bsdelab {

TimeGrid build_grid(double t_max, std::size_t n_steps, GridSpacing spacing,
                    double ratio) {
  if (!(t_max > 0.0)) throw ConfigError("build_grid: t_max must be positive");
  if (n_steps < 1) throw ConfigError("build_grid: n_steps must be >= 1");
  if (spacing == GridSpacing::Geometric && !(ratio > 0.0)) {
    throw ConfigError("build_grid: geometric ratio must be positive");
  }

  TimeGrid g;
  g.t_max = t_max;
  g.n_steps = n_steps;
  g.spacing = spacing;
  g.ratio = (spacing == GridSpacing::Geometric) ? ratio : 1.0;
  g.nodes.resize(n_steps + 1);

  if (spacing == GridSpacing::Uniform || std::fabs(ratio - 1.0) < 1e-15) {
    for (std::size_t i = 0; i <= n_steps; ++i) {
      g.nodes[i] = t_max * (static_cast<double>(i) / static_cast<double>(n_steps));
    }
  } else {
    // steps h, h*r, ..., h*r^(n-1) with h = t_max (r-1) / (r^n - 1)
    const double n = static_cast<double>(n_steps);
    const double h = t_max * (ratio - 1.0) / (std::pow(ratio, n) - 1.0);
    g.nodes[0] = 0.0;
    double step = h;
    for (std::size_t i = 1; i <= n_steps; ++i) {
      g.nodes[i] = g.nodes[i - 1] + step;
      step *= ratio;
    }
    g.nodes[n_steps] = t_max;  // pin the endpoint exactly
  }
  validate_grid(g);
  return g;
}

void validate_grid(const TimeGrid& g) {
  if (g.nodes.size() != g.n_steps + 1) throw ConfigError("grid: node count mismatch");
  if (g.nodes.front() != 0.0) throw ConfigError("grid: first node must be 0");
  if (g.nodes.back() != g.t_max) throw ConfigError("grid: last node must be t_max");
  for (std::size_t i = 0; i < g.n_steps; ++i) {
    if (!(g.nodes[i + 1] > g.nodes[i])) {
      throw ConfigError("grid: nodes not strictly increasing at index " + std::to_string(i));
    }
  }
  if (g.spacing == GridSpacing::Uniform) {
    const double h = g.t_max / static_cast<double>(g.n_steps);
    for (std::size_t i = 0; i < g.n_steps; ++i) {
      if (std::fabs(g.step(i) - h) > 1e-12 * h) {
        throw ConfigError("grid: uniform spacing violated at index " + std::to_string(i));
      }
    }
  }
}

}  // namespace bsdelab
