#include "bsdelab/regression.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

namespace {

// Multi-indices with 1 <= total degree <= degree, enumerated in a fixed
// lexicographic order.
void enumerate_monomials(int d, int degree, std::vector<std::vector<int>>& out,
                         std::vector<int>& current, int dim, int remaining) {
  if (dim == d) {
    int total = 0;
    for (int e : current) total += e;
    if (total >= 1) out.push_back(current);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    current[dim] = e;
    enumerate_monomials(d, degree, out, current, dim + 1, remaining - e);
  }
  current[dim] = 0;
}

std::vector<std::vector<int>> monomials(int d, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(d, 0);
  enumerate_monomials(d, degree, out, current, 0, degree);
  return out;
}

}  // namespace

std::string RegressionBasis::describe() const {
  std::string s = "poly(deg=" + std::to_string(degree) + ")";
  if (include_abs_b) s += "+|B|";
  if (include_sup_b) s += "+sup|B|";
  s += ",ridge=" + std::to_string(ridge);
  return s;
}

std::size_t basis_feature_count(const RegressionBasis& basis, int d) {
  return 1 + monomials(d, basis.degree).size() + (basis.include_abs_b ? 1 : 0) +
         (basis.include_sup_b ? 1 : 0);
}

NodeRegression::NodeRegression(const PathBundle& bundle, const RegressionBasis& basis,
                               std::span<const std::uint32_t> active, std::size_t node)
    : active_(active.begin(), active.end()) {
  const int d = bundle.d;
  const auto monos = monomials(d, basis.degree);
  n_features_ = basis_feature_count(basis, d);
  const std::size_t n = active_.size();
  const std::size_t F = n_features_;
  X_.assign(n * F, 0.0);

  parallel_blocks(n, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t r = b0; r < b1; ++r) {
      const std::size_t p = active_[r];
      const double* b = bundle.b(p, node);
      double* row = &X_[r * F];
      std::size_t c = 0;
      row[c++] = 1.0;
      for (const auto& mono : monos) {
        double v = 1.0;
        for (int e = 0; e < d; ++e) {
          for (int rep = 0; rep < mono[e]; ++rep) v *= b[e];
        }
        row[c++] = v;
      }
      if (basis.include_abs_b) row[c++] = bundle.absb(p, node);
      if (basis.include_sup_b) row[c++] = bundle.supb(p, node);
    }
  });

  // Standardize the non-constant columns; degenerate columns collapse to 0.
  for (std::size_t c = 1; c < F; ++c) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) col[r] = X_[r * F + c];
    const auto ms = mean_std(col);
    const double scale = (ms.sd > 1e-12) ? 1.0 / ms.sd : 0.0;
    for (std::size_t r = 0; r < n; ++r) X_[r * F + c] = (X_[r * F + c] - ms.mean) * scale;
  }

  // Blockwise Gram partials reduced in block order.
  const std::size_t nblocks = block_count(n);
  std::vector<Eigen::MatrixXd> partials(nblocks, Eigen::MatrixXd::Zero(F, F));
  parallel_blocks(n, [&](std::size_t b0, std::size_t b1, std::size_t blk) {
    Eigen::MatrixXd& G = partials[blk];
    for (std::size_t r = b0; r < b1; ++r) {
      Eigen::Map<const Eigen::VectorXd> row(&X_[r * F], F);
      G.selfadjointView<Eigen::Lower>().rankUpdate(row);
    }
  });
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(F, F);
  for (const auto& Gp : partials) gram += Gp;
  gram = gram.selfadjointView<Eigen::Lower>();

  if (basis.ridge <= 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > 1e12) {
      throw SchemeError("singular regression without ridge at node " +
                        std::to_string(node));
    }
  } else {
    gram.diagonal().array() += basis.ridge * static_cast<double>(std::max<std::size_t>(n, 1));
  }

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SchemeError("regression Cholesky failed at node " + std::to_string(node));
  }
  const Eigen::MatrixXd L = llt.matrixL();
  chol_.assign(L.data(), L.data() + F * F);
}

std::vector<double> NodeRegression::fit(std::span<const double> target) const {
  const std::size_t n = active_.size();
  const std::size_t F = n_features_;
  if (target.size() != n) throw ConfigError("NodeRegression::fit: target size mismatch");

  // cross = X^T y, accumulated blockwise in fixed order
  const std::size_t nblocks = block_count(n);
  std::vector<Eigen::VectorXd> partials(nblocks, Eigen::VectorXd::Zero(F));
  parallel_blocks(n, [&](std::size_t b0, std::size_t b1, std::size_t blk) {
    Eigen::VectorXd& v = partials[blk];
    for (std::size_t r = b0; r < b1; ++r) {
      Eigen::Map<const Eigen::VectorXd> row(&X_[r * F], F);
      v += row * target[r];
    }
  });
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(F);
  for (const auto& v : partials) cross += v;

  Eigen::Map<const Eigen::MatrixXd> L(chol_.data(), F, F);
  Eigen::VectorXd coef = L.triangularView<Eigen::Lower>().solve(cross);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(coef);

  std::vector<double> fitted(n);
  parallel_blocks(n, [&](std::size_t b0, std::size_t b1, std::size_t) {
    for (std::size_t r = b0; r < b1; ++r) {
      Eigen::Map<const Eigen::VectorXd> row(&X_[r * F], F);
      fitted[r] = row.dot(coef);
    }
  });
  return fitted;
}

}  // namespace bsdelab
