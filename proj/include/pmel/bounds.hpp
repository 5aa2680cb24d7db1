#pragma once
// Per-dimension bound sequences dhat and the induced coefficient bounds
//   bound(nu) = (|nu|! / nu!) * prod_m dhat_m^{nu_m},
// plus selection of the N indices with the largest bounds, tail estimates,
// and summability certificates.
//
// Three flavors of dhat, all divided by sqrt(3) at the end (the value of the
// degree-1 normalized Legendre polynomial at t = 1 enters every recursion):
//  - displacement:    dhat_m = (beta_m / alpha) / sqrt(3)
//  - mixed:           dhat_m = delta_m / sqrt(3) with
//        delta_m = t beta_m / (1 - t sum_k beta_k),  t = 1/alpha0 + beta0/alpha0^2
//    (requires the strengthened budget t * sum beta_k < 1)
//  - incompressible:  dhat_m = h_m / sqrt(3) with h_m the max of a mu-driven
//    and a lambda-driven expression, robust in the incompressible limit.
#include <string>
#include <vector>

#include "pmel/multi_index.hpp"

namespace pmel {

enum class BoundKind { displacement, mixed, incompressible };

struct BoundSequence {
  BoundKind kind = BoundKind::displacement;
  std::vector<double> dhat;  // entry m-1 is dhat_m
  double sum() const;
  int dims() const { return static_cast<int>(dhat.size()); }
};

// (|nu|!/nu!) * dhat^nu.  Exact integer multinomial for |nu| <= 20, log-domain
// (lgamma) beyond; the switchover is tested to agree to 1e-12 relative.
double coeff_bound(const MultiIndex& nu, const BoundSequence& b);

struct DisplacementConstants {
  double alpha = 0.0;           // uniform coercivity floor
  std::vector<double> beta;     // per-mode operator-norm bounds
};

struct MixedConstants {
  double alpha0 = 0.0;          // floor of the mean tensor
  double beta0 = 0.0;           // ceiling of the mean tensor
  std::vector<double> beta;     // per-mode bounds
};

struct IncompressibleConstants {
  std::vector<double> gamma;    // per-mode bounds of the mu modes
  std::vector<double> delta;    // per-mode bounds of the lambda modes
  double mu_min = 0.0, mu_max = 0.0;       // parameter-robust shear bounds
  double lambda_min = 0.0;                 // parameter-robust floor
  double lambda_bar_min = 0.0;             // floor of the mean lambda field
  double c0 = 0.0;   // divergence-lifting inf-sup constant of the domain
  double c7 = 0.0;   // norm bound ||strain(v)|| <= c7 ||v||_V
  double kappa0 = 0.0;  // margin used by the robustness threshold theta2
  double zeta = 0.5;    // splitting exponent in (0, 1)
};

BoundSequence make_bound_sequence(const DisplacementConstants& c);
BoundSequence make_bound_sequence(const MixedConstants& c);      // throws AlphaStrongViolated
BoundSequence make_bound_sequence(const IncompressibleConstants& c);

// Robustness threshold: lambda_bar_min must exceed
//   theta2 = 4 mu_max (1+kappa0) (1+mu_max/mu_min) c7^2 / c0^2.
double incompressible_threshold(const IncompressibleConstants& c);

// The N indices with the largest bound(nu), ties broken by smaller |nu| then
// lexicographic order.  Exact: best-first search over the lattice children,
// keyed by the certificate max(bound(nu), S^{|nu|+1}) with S = sum dhat_m.
// The certificate is monotone non-increasing along the lattice (bound itself
// is not: spreading mass over dimensions can raise the multinomial factor),
// and S^{|nu|+1} dominates the bound of every strict descendant since the
// level sum of bounds at total degree k is exactly S^k.  Requires S < 1;
// otherwise a warning is recorded and a graded level cap is used instead.
IndexSet best_n_indices(const BoundSequence& b, int N,
                        std::vector<std::string>* warnings = nullptr);

// Smallest downward-closed superset (adds all missing ancestors).
IndexSet downward_close(const IndexSet& set);

// Finite-sequence tail bound check:  with b sorted non-increasing (throws
// NotSorted otherwise) and 0 < p <= q,
//   lhs = (sum_{n>N} b_n^q)^{1/q}  <=  N^{1/q-1/p} (sum_n b_n^p)^{1/p} = rhs.
struct StechkinCheck {
  double lhs = 0.0, rhs = 0.0;
  bool holds() const { return lhs <= rhs * (1.0 + 1e-12); }
};
StechkinCheck stechkin_tail(const std::vector<double>& b, int N, double p,
                            double q);

struct SummabilityCertificate {
  bool ok = false;
  double lp_sum = 0.0;          // sum seq_m^p over the supplied entries
  double rate = 0.0;            // predicted convergence rate s = 1/p - 1/2
  double decay_exponent = 0.0;  // fitted r in seq_m ~ C m^{-r} (log-log fit)
  double kappa_limit = 0.0;     // threshold the margin parameter must beat
  std::string detail;           // reason when not ok
};

// Checks that the (truncated) mode-bound sequence is compatible with l^p
// summability (fitted algebraic decay exponent r > 1/p) and that the margin
// parameter beats the kind-dependent threshold: sqrt(3) for displacement and
// mixed, sqrt(3)/(1+theta) for incompressible.
SummabilityCertificate summability_certificate(const std::vector<double>& seq,
                                               double p, double kappa,
                                               BoundKind kind,
                                               double theta = 0.0);

}  // namespace pmel
