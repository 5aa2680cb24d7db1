#pragma once
// Parametric displacement solves: single-parameter-point solves with an
// oscillatory coefficient a(z; x, x/eps), the coupled two-scale limit problem
// (macro field plus cell corrector), Legendre-chaos projection by tensor
// quadrature, the coupled semidiscrete Galerkin system over an index set, and
// best-N-term error studies against same-mesh quadrature references.
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

struct DisplacementProblem {
  AffineElasticTensor tensor;
  VectorField f;
  int mesh_n = 16;
  int order = 1;
  DirichletTag dirichlet = DirichletTag::all;
};

FeSpace displacement_space(const DisplacementProblem& p);

// x -> a(z; x, x/eps); eps <= 0 freezes the cell variable at the origin.
TensorCoefficient parametric_coefficient(const DisplacementProblem& p, const ParamPoint& z,
                                         double eps);

// Full-dof solution of int a(z; x, x/eps) eps(u):eps(v) = int f.v on the
// problem space.  A mesh too coarse for the oscillation (h > eps/8) is
// recorded as a warning, not an error.
Eigen::VectorXd solve_displacement_at_z(const DisplacementProblem& p, const ParamPoint& z,
                                        double eps = 0.0,
                                        std::vector<std::string>* warnings = nullptr);

struct TwoScaleOptions {
  int ymesh_n = 8;
  int yorder = 1;
};

struct TwoScaleField {
  FeSpace xspace;          // macro vector space (with boundary conditions)
  FeSpace xscalar;         // scalar profile space carrying the corrector in x
  PeriodicFeSpace yspace;  // periodic vector space on the unit cell
  Eigen::VectorXd u0;      // macro field, full dofs
  Eigen::MatrixXd u1;      // yspace.nfree x xscalar.nscalar (column = cell field at a node)
  double energy = 0.0;     // b(z; u, u)
  double load_work = 0.0;  // (f, u0)
};

// Coupled solve of the two-scale limit problem
//   int_D int_Y a(z; x, y) (eps_x u0 + eps_y u1) : (eps_x v0 + eps_y v1) = int_D f.v0
// over V_h(D) x (S_h(D) tensor W_h(Y)), with u1(x, .) mean-zero in y.  The
// coefficient is frozen per macro cell, making each cell contribution a
// Kronecker product of a macro mass block and a cell stiffness.
TwoScaleField solve_two_scale_homogenized_at_z(const DisplacementProblem& p, const ParamPoint& z,
                                               const TwoScaleOptions& opts = {});

Eigen::VectorXd evaluate_u1(const TwoScaleField& ts, const Point& x, const Point& y);

using AtZSolver = std::function<Eigen::VectorXd(const ParamPoint&)>;

// u_nu = int u(z) L_nu(z) rho(dz) by tensorized Gauss-Legendre with the given
// points per dimension; too few points for the set's degrees records a
// QuadratureTooLow warning on the result.
GpcExpansion project_gpc(const DisplacementProblem& p, const IndexSet& lambda,
                         int points_per_dim, const AtZSolver& solver);
GpcExpansion project_gpc(const DisplacementProblem& p, const IndexSet& lambda,
                         int points_per_dim, double eps = 0.0);

// Coupled block system over the set: for each index nu,
//   A0 u_nu + sum_m A_m (c_{nu_m - 1} u_{nu - e_m} + c_{nu_m} u_{nu + e_m}) = F delta_{nu,0}
// restricted to members of the set, with c_n = legendre_coupling(n).
GpcExpansion solve_semidiscrete_galerkin(const DisplacementProblem& p, const IndexSet& lambda,
                                         double eps = 0.0);

// Max over nu in the set of || int L_nu(z) (F - A(z) u(z)) rho(dz) || / ||F||,
// integrated exactly (points_per_dim = 0 picks max degree + 2).
double galerkin_residual(const DisplacementProblem& p, const GpcExpansion& u, double eps = 0.0,
                         int points_per_dim = 0);

struct GalerkinStudyOptions {
  double p_summability = 0.5;  // exponent handed to the summability certificate
  double eps = 0.0;
  int points_per_dim = 3;      // reference quadrature; 0 picks max degree + 2
};

// For each N in n_list: select the N largest coefficient bounds, solve the
// coupled system, and record the L2(U; V) distance to per-z reference solves
// on the same mesh at the quadrature nodes (H1-seminorm in space).  Columns:
// N, error, bound_tail, fitted_slope.
ConvergenceReport galerkin_error_study(const DisplacementProblem& p, const BoundSequence& seq,
                                       const std::vector<int>& n_list,
                                       const GalerkinStudyOptions& opts = {});

}  // namespace pmel
