#pragma once
// Legendre chaos expansions of discrete fields: an index set plus one
// coefficient vector per index, u(z) = sum_nu u_nu L_nu(z), together with
// normalized tensor Gauss-Legendre grids on the parameter box [-1,1]^M
// (weights sum to 1, matching the product measure prod_m dz_m / 2).
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmel/errors.hpp"
#include "pmel/legendre.hpp"
#include "pmel/multi_index.hpp"
#include "pmel/quadrature.hpp"

namespace pmel {

struct GpcExpansion {
  IndexSet lambda;
  std::vector<Eigen::VectorXd> coeffs;  // one vector per index, same layout
  std::vector<std::string> warnings;
  double diag_spread = 0.0;  // conditioning proxy of the coupled system

  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const {
    if (lambda.size() == 0) throw ValidationFailure("empty expansion");
    if (static_cast<int>(coeffs.size()) != lambda.size())
      throw DimensionMismatch("expansion coefficients do not match the index set");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(coeffs.front().size());
    for (int i = 0; i < lambda.size(); ++i)
      out += multi_legendre_eval(lambda[i], z) * coeffs[i];
    return out;
  }
};

struct ZQuadrature {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> weights;  // sum to 1

  int size() const { return static_cast<int>(nodes.size()); }
};

inline ZQuadrature tensor_gauss(int dims, int points_per_dim, long long max_nodes = 200000) {
  if (dims < 0 || points_per_dim < 1)
    throw ValidationFailure("tensor quadrature needs dims >= 0 and points >= 1");
  long long total = 1;
  for (int m = 0; m < dims; ++m) {
    total *= points_per_dim;
    if (total > max_nodes)
      throw BudgetExceeded("tensor quadrature grid of " + std::to_string(points_per_dim) +
                           "^" + std::to_string(dims) + " nodes exceeds the budget of " +
                           std::to_string(max_nodes));
  }
  const Quad1 rule = gauss_legendre(points_per_dim);
  ZQuadrature grid;
  grid.nodes.reserve(static_cast<std::size_t>(total));
  grid.weights.reserve(static_cast<std::size_t>(total));
  std::vector<int> digit(static_cast<std::size_t>(std::max(dims, 1)), 0);
  for (long long k = 0; k < total; ++k) {
    Eigen::VectorXd z(dims);
    double w = 1.0;
    for (int m = 0; m < dims; ++m) {
      z[m] = rule.x[digit[m]];
      w *= 0.5 * rule.w[digit[m]];
    }
    grid.nodes.push_back(std::move(z));
    grid.weights.push_back(w);
    for (int m = 0; m < dims; ++m) {
      if (++digit[m] < points_per_dim) break;
      digit[m] = 0;
    }
  }
  return grid;
}

}  // namespace pmel
