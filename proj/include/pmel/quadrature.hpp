#pragma once
// Quadrature rules: Gauss-Legendre on intervals (nodes by Newton iteration,
// accurate to ~1e-15) and symmetric rules on the reference triangle
// conv{(0,0),(1,0),(0,1)}.  Triangle weights sum to the reference area 1/2.
#include <array>
#include <vector>

namespace pmel {

struct Quad1 {
  std::vector<double> x;  // nodes
  std::vector<double> w;  // positive weights
};

// n-point Gauss-Legendre rule on [-1,1]; exact for polynomials of degree 2n-1.
Quad1 gauss_legendre(int n);

// Same rule mapped to [0,1].
Quad1 gauss_legendre_01(int n);

struct QuadTri {
  std::vector<std::array<double, 2>> x;  // points in reference coordinates
  std::vector<double> w;                 // weights, sum = 1/2
};

// Smallest stocked symmetric triangle rule exact for polynomials of the given
// total degree (supported up to degree 5).
QuadTri triangle_rule(int degree);

}  // namespace pmel
