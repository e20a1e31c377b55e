#pragma once

#include <cstddef>
#include <vector>

namespace bsdelab {

enum class GridSpacing { Uniform, Geometric };

// Discretization nodes 0 = t_0 < t_1 < ... < t_n = t_max of the simulation
// horizon. Geometric spacing grows each step by a fixed ratio.
struct TimeGrid {
  double t_max = 0.0;
  std::size_t n_steps = 0;
  GridSpacing spacing = GridSpacing::Uniform;
  double ratio = 1.0;  // step growth factor, geometric only
  std::vector<double> nodes;

  std::size_t n_nodes() const { return n_steps + 1; }
  double step(std::size_t i) const { return nodes[i + 1] - nodes[i]; }
};

TimeGrid build_grid(double t_max, std::size_t n_steps,
                    GridSpacing spacing = GridSpacing::Uniform,
                    double ratio = 1.0);

// Throws ConfigError if the node sequence violates the grid contract.
void validate_grid(const TimeGrid& grid);

}  // namespace bsdelab
