#pragma once
// Legendre polynomials normalized in L2([-1,1], dt/2):
//   L_n(t) = sqrt(2n+1) P_n(t),  so  (1/2) int_{-1}^{1} L_n L_k dt = d_nk,
// L_0 = 1, L_1(1) = sqrt(3).  The multiplication-by-t coupling is
//   t L_n = c_n L_{n+1} + c_{n-1} L_{n-1},  c_n = (n+1)/sqrt((2n+1)(2n+3)),
// with the convention c_{-1} = 0; c_0 = 1/sqrt(3), c_1 = 2/sqrt(15).
#include <Eigen/Dense>

#include "pmel/multi_index.hpp"

namespace pmel {

// L_n(t); |t| <= 1 + 1e-12 enforced.
double legendre_eval(int n, double t);

// c_n for n >= 0; c_{-1} = 0.
double legendre_coupling(int n);

// Product basis L_nu(z) = prod_m L_{nu_m}(z_m).  Throws DimensionMismatch if
// the support of nu extends past the length of z.
double multi_legendre_eval(const MultiIndex& nu, const Eigen::VectorXd& z);

}  // namespace pmel
