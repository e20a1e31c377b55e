#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bsdelab/generator.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

struct GalleryEntry {
  std::string name;
  int k = 1;
  int d = 0;  // 0 = any Brownian dimension
  std::string assumptions;
  std::string description;
  bool counterexample = false;
};

// Built-in generators addressable by name. Weight constants enter some
// drivers (damped exponents, terminal values), so construction takes the
// run's WeightParams.
std::shared_ptr<Generator> make_generator(const std::string& name,
                                          const WeightParams& params);

const std::vector<GalleryEntry>& gallery_entries();

// Each preset's natural horizon rule; configs may override it.
StoppingTimeSpec default_stopping(const std::string& name, double t_max);

}  // namespace bsdelab
