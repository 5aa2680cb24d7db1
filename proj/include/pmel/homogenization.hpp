#pragma once
// Periodic homogenization: cell problems on the unit cell, effective tensors,
// reiterated (multi-level) limits, the incompressible cell system with its
// effective shear/dilatation split, and two-scale corrector fields.  Cell
// corrector slots follow the orthonormal symmetric-matrix basis used by
// SymTensor4 (slot s solves the problem driven by the unit strain E_s), so
// effective tensors assemble directly in that basis.
#include <functional>
#include <vector>

#include "pmel/assembly.hpp"
#include "pmel/fe_space.hpp"
#include "pmel/tensor.hpp"

namespace pmel {

// Componentwise fractional part of x / eps: the unit-cell coordinate.
Point unit_cell_point(const Point& x, double eps);

struct CellOptions {
  int order = 1;              // FE order of the corrector space
  AssemblyOptions assembly;   // coefficient sampling for all cell forms
  int quad_degree = 4;        // quadrature degree for effective-tensor integrals
};

struct CellSolutionTable {
  PeriodicFeSpace space;                   // vector-valued periodic space on Y
  std::vector<Eigen::VectorXd> n_fields;   // one mean-zero corrector per strain slot
  std::vector<Eigen::VectorXd> p_fields;   // cell pressures (incompressible case only)
  FeSpace pspace;                          // pressure space when p_fields is nonempty
  double residual = 0.0;                   // worst relative algebraic residual
};

// Solve the d(d+1)/2 periodic cell problems for a unit-cell coefficient a(y).
CellSolutionTable solve_cell_problems(const TensorCoefficient& a_y, const Mesh& ymesh,
                                      const CellOptions& opts = {});

// Effective tensor from corrected unit strains,
//   a0[s,t] = int_Y a (E_s + eps_y N_s) : (E_t + eps_y N_t) dy.
SymTensor4 homogenized_tensor(const TensorCoefficient& a_y, const CellSolutionTable& cells,
                              const CellOptions& opts = {});

struct HomogenizationResult {
  CellSolutionTable cells;
  SymTensor4 a0;
};
HomogenizationResult homogenize(const TensorCoefficient& a_y, const Mesh& ymesh,
                                const CellOptions& opts = {});

// Plain quadrature average of a tensor coefficient over a mesh.
SymTensor4 mean_tensor(const TensorCoefficient& a_y, const Mesh& ymesh, int degree = 4);

struct ReiteratedConfig {
  std::vector<int> mesh_n;      // cell-mesh resolution per level, outermost first
  int order = 1;
  long long budget = 2000000;   // cap on innermost coefficient evaluations
};

// Effective tensor of an n-level microstructure a(y_1, ..., y_n) (outermost
// scale first).  Levels are collapsed innermost-first: each level freezes the
// slower variables at cell midpoints and homogenizes the next-faster scale,
// so the cost is the product of the per-level cell counts (guarded by
// config.budget).
SymTensor4 reiterated_homogenize(
    int d, int nscales,
    const std::function<SymTensor4(const std::vector<Point>&)>& a,
    const ReiteratedConfig& config);

struct IncompressibleCellOptions {
  int vorder = 2;             // displacement order (pressure is piecewise constant)
  AssemblyOptions assembly;
  int quad_degree = 4;
};

struct IncompressibleCellResult {
  CellSolutionTable cells;    // correctors + cell pressures
  Eigen::MatrixXd mu0;        // shear part, slot basis
  Eigen::VectorXd lambda0;    // dilatation part: adds (lambda0 . vec(xi)) I
  SymTensor4 a0;              // mu0 + vec(I) lambda0^T, symmetrized
};

// Stokes-type cell system for a(y) = iso(mu(y), lambda(y)): per strain slot,
// find a periodic mean-zero N and a pressure p with
//   int 2 mu eps(N):eps(v) + int p div v = -int 2 mu E_s : eps(v),
//   int div(N) q - int (1/lambda) p q   = -int tr(E_s) q.
IncompressibleCellResult solve_incompressible_cell(const ScalarCoefficient& mu_y,
                                                   const ScalarCoefficient& lambda_y,
                                                   const Mesh& ymesh,
                                                   const IncompressibleCellOptions& opts = {});

// Dirichlet solve with an effective (or any) coefficient; returns full dofs.
Eigen::VectorXd solve_homogenized(const FeSpace& space, const SymTensor4& a0,
                                  const VectorField& f);
Eigen::VectorXd solve_homogenized(const FeSpace& space, const TensorCoefficient& a_at,
                                  const VectorField& f);

using PointFn = std::function<Eigen::VectorXd(const Point&)>;

// Strain of a discrete vector field in slot coordinates, evaluable anywhere.
// Piecewise-constant strains (order-1 fields) are promoted to continuous
// nodal fields by volume-weighted averaging over adjacent cells.
PointFn strain_evaluator(const FeSpace& space, const Eigen::VectorXd& coeffs);

// First-order two-scale reconstruction
//   x -> u0(x) + eps * sum_s N_s(x / eps mod 1) strain_s(u0)(x).
PointFn two_scale_corrector(const FeSpace& u0_space, const Eigen::VectorXd& u0,
                            const CellSolutionTable& cells, double eps);

// Displacement corrector plus the oscillatory pressure
//   x -> sum_s p_s(x / eps mod 1) strain_s(u0)(x).
std::pair<PointFn, std::function<double(const Point&)>> incompressible_corrector(
    const FeSpace& u0_space, const Eigen::VectorXd& u0,
    const IncompressibleCellResult& cell, double eps);

}  // namespace pmel
