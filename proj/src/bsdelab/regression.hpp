#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/paths.hpp"

namespace bsdelab {

// Feature set for the per-node least-squares proxy of E[. | F_{t_i}]:
// constant, monomials of the Brownian components up to total degree
// `degree`, |B| and the running sup of |B|.
struct RegressionBasis {
  int degree = 3;
  bool include_abs_b = true;
  bool include_sup_b = true;
  double ridge = 1e-8;

  std::string describe() const;
};

// Ridge regression at a single node over an active path subset. Features are
// standardized per node; the Gram matrix is assembled blockwise and reduced
// in a fixed order, so fits are identical under any thread count.
class NodeRegression {
 public:
  NodeRegression(const PathBundle& bundle, const RegressionBasis& basis,
                 std::span<const std::uint32_t> active, std::size_t node);

  std::size_t n_active() const { return active_.size(); }
  std::size_t n_features() const { return n_features_; }

  // Least-squares fit of one target vector (one value per active path);
  // returns fitted values per active path.
  std::vector<double> fit(std::span<const double> target) const;

 private:
  std::vector<std::uint32_t> active_;
  std::size_t n_features_ = 0;
  std::vector<double> X_;        // [active][feature], standardized
  std::vector<double> chol_;     // Cholesky factor of (X^T X + ridge n I)
};

std::size_t basis_feature_count(const RegressionBasis& basis, int d);

}  // namespace bsdelab
