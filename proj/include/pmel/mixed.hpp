#pragma once
// Mixed solves of the parametric elasticity problem: stress-displacement
// saddle systems in two algebraically equivalent flavors (inverted-tensor
// stress mass, b1, or stress-strain coupling against the tensor, b2), and
// displacement-pressure penalty systems for nearly incompressible isotropic
// families (1/lambda penalty, b3, or the lambda-scaled flavor, b4, whose
// blocks are affine in the parameter).  Each formulation solves at a fixed
// parameter point and as a coupled semidiscrete Galerkin system over an index
// set; inf-sup instrumentation sweeps mesh levels and set sizes, and the
// lambda study measures robustness of the Galerkin error in the
// incompressible limit.
#include <functional>
#include <string>
#include <vector>

#include "pmel/assembly.hpp"
#include "pmel/bounds.hpp"
#include "pmel/fe_space.hpp"
#include "pmel/gpc_expansion.hpp"
#include "pmel/report.hpp"
#include "pmel/tensor_fields.hpp"

namespace pmel {

enum class HrForm { b1, b2 };
enum class PenaltyForm { b3, b4 };

// Stress lives in the piecewise-constant symmetric-tensor space, displacement
// in the continuous piecewise-linear vector space.  Midpoint coefficient
// evaluation is the default: the per-cell constitutive relation then holds
// exactly and the two flavors produce identical solutions; quadrature-point
// evaluation keeps them equivalent only up to the mesh scale.
struct HrProblem {
  AffineElasticTensor tensor;
  VectorField f;
  int mesh_n = 8;
  DirichletTag dirichlet = DirichletTag::all;
  CoefficientMode mode = CoefficientMode::midpoint;
  double eps = 0.0;  // oscillation scale of the cell variable; <= 0 freezes y = 0
};

struct HrSolution {
  FeSpace sspace;         // stress space (no boundary conditions)
  FeSpace vspace;         // displacement space
  Eigen::VectorXd sigma;  // full dofs
  Eigen::VectorXd u;      // full dofs
  std::vector<std::string> warnings;
};

// Saddle solve at one parameter point.  b1 solves the symmetric system with
// the a(z)^{-1}-weighted stress mass; b2 the nonsymmetric system coupling
// stress against a(z) eps(u).  Both satisfy the same force-balance row.
// InfSupFailure reports a certified breakdown: the solution norm exceeds
// 1e8 times the data norm, so the smallest singular value of the assembled
// block matrix is below 1e-8.
HrSolution solve_hr_at_z(const HrProblem& p, const ParamPoint& z, HrForm form);

struct HrExpansion {
  GpcExpansion sigma;
  GpcExpansion u;
};

// Coupled block system over the index set.  For b1 the stress-stress blocks
// carry the parameter-quadrature moments of a(z)^{-1} per cell (points_per_dim
// 0 picks max degree + 4, clamped to the node budget); the coupling blocks are
// parameter-independent and diagonal over the set.  For b2 every block is
// affine in the parameter and coupled through legendre_coupling; the
// strengthened budget sum beta_m <= k/(1+k) * alpha0^2/(alpha0+beta0) is
// required (AlphaStrongViolated otherwise).
HrExpansion solve_hr_galerkin(const HrProblem& p, const IndexSet& lambda, HrForm form,
                              int points_per_dim = 0);

// Max over set members of the projected-equation residual
//   || int L_nu(z) (rhs - B(z) x(z)) rho(dz) || / ||F||
// with the block system rebuilt independently at each quadrature node
// (points_per_dim 0 picks max degree + 6).
double hr_residual(const HrProblem& p, const HrExpansion& sol, HrForm form,
                   int points_per_dim = 0);

// Displacement order 2 with piecewise-constant pressure; the boundary must
// leave part of the boundary traction-free (FullDirichletRejected otherwise).
struct PenaltyProblem {
  IsotropicLameField lame;
  VectorField f;
  int mesh_n = 8;
  int order = 2;  // displacement order; pressure is order 0
  DirichletTag dirichlet = DirichletTag::left;
  CoefficientMode mode = CoefficientMode::midpoint;
};

struct PenaltySolution {
  FeSpace vspace;     // displacement space
  FeSpace qspace;     // pressure space
  Eigen::VectorXd u;  // full dofs
  Eigen::VectorXd p;  // full dofs
  std::vector<std::string> warnings;
};

// Saddle solve at one parameter point.  b3 penalizes with the 1/lambda(z)
// pressure mass; b4 rescales the second row by lambda(z)/lambdabar_min,
// leaving a parameter-independent pressure mass.  The two produce identical
// solutions (the rows differ by a positive per-cell factor under midpoint
// evaluation).
PenaltySolution solve_penalty_at_z(const PenaltyProblem& p, const ParamPoint& z,
                                   PenaltyForm form);

struct PenaltyExpansion {
  GpcExpansion u;
  GpcExpansion p;
};

// Coupled block system over the index set.  The elastic block is affine in
// the parameter; b3 builds the penalty block from parameter-quadrature
// moments of 1/lambda(z) per cell, b4 couples the affine lambda expansion
// through legendre_coupling against a fixed pressure mass.  kappa > kappa0 or
// lambdabar_min at or below the theta1 surrogate are recorded as stability
// warnings on the result, not refused.
PenaltyExpansion solve_penalty_galerkin(const PenaltyProblem& p, const IndexSet& lambda,
                                        PenaltyForm form, int points_per_dim = 0,
                                        double kappa0 = 1.0);

double penalty_residual(const PenaltyProblem& p, const PenaltyExpansion& sol,
                        PenaltyForm form, int points_per_dim = 0);

// Numerically estimated stability thresholds of the penalty pair: c0 is the
// divergence inf-sup constant, c7 the strain-to-H1 norm bound, korn the
// discrete Korn constant; theta1 and theta2 are the lambda floors entering
// the affine-form stability and robustness estimates,
//   theta1 = 3 c3^2 (1+kappa) / c1,  c3 = 4 mu* / c0,  mu* = 2 mu_max c7^2,
//   c1 = 2 mu_min korn^2,
//   theta2 = 4 mu_max (1+kappa0) (1+mu_max/mu_min) c7^2 / c0^2.
struct PenaltyThresholds {
  double c0 = 0.0;
  double c7 = 0.0;
  double korn = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
};
PenaltyThresholds penalty_thresholds(const PenaltyProblem& p, double kappa0 = 1.0);

// Discrete pairs probed by the inf-sup study: the stress-displacement pair
// of the dual formulation, the stable displacement-pressure pair (order 2
// against order 0), and the equal-order displacement-pressure pair (order 1
// against order 1), which is known to degrade under refinement and serves as
// the negative control.
enum class InfSupPair { stress_displacement, pressure_stable, pressure_equal_order };

struct InfSupStudyOptions {
  std::vector<int> mesh_levels = {8, 16, 32};
  std::vector<int> lambda_sizes = {};  // optional set-size sweep at lambda_mesh
  int lambda_mesh = 8;
  int d = 2;
  DirichletTag dirichlet = DirichletTag::left;
};

// Columns mesh_n, lambda_size, infsup: one row per mesh level (set size 1)
// and one per requested set size (fixed mesh).  The coupling blocks are
// parameter-independent, so the coupled system over a set is block diagonal;
// the study assembles that global system and solves the generalized
// eigenproblem on it.  Degradation beyond 20% from the first level is
// recorded as a warning.
ConvergenceReport infsup_study(InfSupPair pair, const InfSupStudyOptions& opts = {});

struct MixedStudyOptions {
  double p_summability = 0.5;
  int points_per_dim = 3;  // reference quadrature; 0 picks max degree + 2
  int galerkin_points = 0;       // handed to the coupled solves
  PenaltyForm penalty_form = PenaltyForm::b4;
  double kappa0 = 1.0;
};

// Best-N-term study of the dual Galerkin systems: for each N select the N
// largest coefficient bounds, solve the coupled system, and measure the
// distance to per-z reference solves at the quadrature nodes (stress in L2,
// displacement in the H1 seminorm).  Columns: N, error (sum of the two
// parts), error_sigma, error_u, fitted_slope.
ConvergenceReport hr_error_study(const HrProblem& p, const BoundSequence& seq,
                                 const std::vector<int>& n_list, HrForm form,
                                 const MixedStudyOptions& opts = {});

// Lambda-robustness study: the problem factory maps lambdabar_min to a
// problem with mu and f fixed; index sets are selected once (from the largest
// lambdabar_min, falling back to the affine-view displacement bounds when the
// robustness threshold rejects the incompressible ones) so the error curves
// are comparable across the sweep.  Columns: lambda_min, N, error_u, error_p.
ConvergenceReport penalty_lambda_study(
    const std::function<PenaltyProblem(double)>& make_problem,
    const std::vector<double>& lambda_mins, const std::vector<int>& n_list,
    const MixedStudyOptions& opts = {});

}  // namespace pmel
