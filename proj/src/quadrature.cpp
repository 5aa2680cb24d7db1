#include "pmel/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include "pmel/errors.hpp"

namespace pmel {

namespace {

// Legendre P_n(t) and P_n'(t) by the three-term recurrence.
void legendre_pair(int n, double t, double& p, double& dp) {
  double p0 = 1.0, p1 = t;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (t * p1 - p0) / (t * t - 1.0);
}

}  // namespace

Quad1 gauss_legendre(int n) {
  if (n < 1) throw InvalidConstants("gauss_legendre: need n >= 1");
  Quad1 q;
  q.x.resize(n);
  q.w.resize(n);
  const double pi = 3.14159265358979323846;
  // Exploit symmetry: compute roots in (0,1], mirror to negative side.
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-like initial guess, then Newton.
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int it = 0; it < 100; ++it) {
      legendre_pair(n, t, p, dp);
      const double dt = p / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    legendre_pair(n, t, p, dp);
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    q.x[i] = -t;  // cos guess starts near +1 for small i; store ascending
    q.w[i] = w;
    q.x[n - 1 - i] = t;
    q.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    // The middle node of an odd rule is exactly zero.
    q.x[n / 2] = 0.0;
    double p, dp;
    legendre_pair(n, 0.0, p, dp);
    q.w[n / 2] = 2.0 / (dp * dp);
  }
  return q;
}

Quad1 gauss_legendre_01(int n) {
  Quad1 q = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    q.x[i] = 0.5 * (q.x[i] + 1.0);
    q.w[i] *= 0.5;
  }
  return q;
}

QuadTri triangle_rule(int degree) {
  QuadTri q;
  auto push = [&q](double x, double y, double w) {
    q.x.push_back({x, y});
    q.w.push_back(w);
  };
  if (degree <= 1) {
    push(1.0 / 3.0, 1.0 / 3.0, 0.5);
  } else if (degree == 2) {
    const double w = 1.0 / 6.0;
    push(1.0 / 6.0, 1.0 / 6.0, w);
    push(2.0 / 3.0, 1.0 / 6.0, w);
    push(1.0 / 6.0, 2.0 / 3.0, w);
  } else if (degree <= 4) {
    // Six-point rule, exact through degree 4.
    const double a = 0.445948490915965;
    const double wa = 0.223381589678011 * 0.5;
    const double b = 0.091576213509771;
    const double wb = 0.109951743655322 * 0.5;
    push(a, a, wa);
    push(1.0 - 2.0 * a, a, wa);
    push(a, 1.0 - 2.0 * a, wa);
    push(b, b, wb);
    push(1.0 - 2.0 * b, b, wb);
    push(b, 1.0 - 2.0 * b, wb);
  } else if (degree == 5) {
    // Seven-point rule, exact through degree 5.
    push(1.0 / 3.0, 1.0 / 3.0, 0.225 * 0.5);
    const double a = 0.470142064105115;
    const double wa = 0.132394152788506 * 0.5;
    push(a, a, wa);
    push(1.0 - 2.0 * a, a, wa);
    push(a, 1.0 - 2.0 * a, wa);
    const double b = 0.101286507323456;
    const double wb = 0.125939180544827 * 0.5;
    push(b, b, wb);
    push(1.0 - 2.0 * b, b, wb);
    push(b, 1.0 - 2.0 * b, wb);
  } else {
    throw InvalidConstants("triangle_rule: degree > 5 not stocked");
  }
  return q;
}

}  // namespace pmel
