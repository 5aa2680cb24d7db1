#include "pmel/legendre.hpp"

#include <cmath>

namespace pmel {

double legendre_eval(int n, double t) {
  if (n < 0) throw ValidationFailure("legendre_eval: negative degree");
  if (std::abs(t) > 1.0 + 1e-12)
    throw ValidationFailure("legendre_eval: |t| > 1");
  double p0 = 1.0, p1 = t;
  if (n == 0) return 1.0;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return std::sqrt(2.0 * n + 1.0) * p1;
}

double legendre_coupling(int n) {
  if (n < 0) return 0.0;
  return (n + 1.0) / std::sqrt((2.0 * n + 1.0) * (2.0 * n + 3.0));
}

double multi_legendre_eval(const MultiIndex& nu, const Eigen::VectorXd& z) {
  if (nu.max_dim() > z.size())
    throw DimensionMismatch("multi_legendre_eval: index support exceeds z");
  double v = 1.0;
  for (const auto& [dim, order] : nu.support())
    v *= legendre_eval(order, z[dim - 1]);
  return v;
}

}  // namespace pmel
