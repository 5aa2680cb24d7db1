#pragma once
// Lagrange finite element spaces (orders 0, 1, 2) on structured meshes, with
// scalar, vector, or symmetric-tensor values.  Dirichlet constraints are
// handled by a free-dof numbering; periodic spaces identify opposite-face
// dofs master/slave and expose per-component mean rows for quotienting out
// constants.  Dofs interleave components: dof = scalar_id * ncomp + comp.
#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pmel/mesh.hpp"

namespace pmel {

using SpMat = Eigen::SparseMatrix<double>;

enum class Arity { scalar, vectord, symtensor };

int arity_components(Arity arity, int d);

struct FeSpace {
  Mesh mesh;
  int order = 1;  // 0, 1, or 2
  Arity arity = Arity::scalar;
  DirichletTag dirichlet = DirichletTag::none;
  int ncomp = 1;
  int nscalar = 0;                            // scalar basis functions
  std::vector<std::vector<int>> cell_scalar;  // scalar basis ids per cell
  std::vector<Point> scalar_x;                // nodal position per scalar basis
  std::vector<int> free_index;                // dof -> free slot, -1 constrained
  int nfree = 0;

  int ndof() const { return nscalar * ncomp; }
  int dof(int scalar_id, int comp) const { return scalar_id * ncomp + comp; }
};

FeSpace make_space(const Mesh& mesh, int order, Arity arity,
                   DirichletTag dirichlet = DirichletTag::none);

// Values and reference-domain gradients of the scalar shape functions.
struct BasisEval {
  int nb = 0;
  std::array<double, 6> val{};
  std::array<Eigen::Vector2d, 6> grad{};
};
BasisEval eval_reference_basis(int d, int order, const Point& xhat);

// Nodal interpolation; fn returns one value per component.
Eigen::VectorXd interpolate(
    const FeSpace& space, const std::function<Eigen::VectorXd(const Point&)>& fn);
Eigen::VectorXd interpolate_scalar(const FeSpace& space,
                                   const std::function<double(const Point&)>& fn);

// Pointwise field evaluation (per component) and spatial gradient
// (ncomp x d); P0 fields are evaluated as their cell value.
Eigen::VectorXd evaluate_field(const FeSpace& space, const Eigen::VectorXd& coeffs,
                               const Point& x);
Eigen::MatrixXd evaluate_field_gradient(const FeSpace& space,
                                        const Eigen::VectorXd& coeffs, const Point& x);

// Restriction to free dofs and prolongation back (zeros on constrained dofs).
SpMat restrict_matrix(const SpMat& full, const FeSpace& rows, const FeSpace& cols);
SpMat restrict_matrix(const SpMat& full, const FeSpace& space);
Eigen::VectorXd restrict_vector(const Eigen::VectorXd& full, const FeSpace& space);
Eigen::VectorXd prolong_vector(const Eigen::VectorXd& free, const FeSpace& space);

struct PeriodicFeSpace {
  FeSpace base;                 // unconstrained space on the cell mesh
  std::vector<int> scalar_rep;  // scalar basis id -> representative id
  std::vector<int> free_index;  // base dof -> periodic slot (all >= 0)
  int nfree = 0;
  Eigen::MatrixXd mean_rows;  // ncomp x nfree: row c maps coeffs to componentwise mean

  int ncomp() const { return base.ncomp; }
};

PeriodicFeSpace make_periodic_space(const Mesh& mesh, int order, Arity arity);

// Fold a full-space operator or dual vector (load, residual) by summing over
// identified dofs; fold_nodal picks representative values of a primal
// (nodal-coefficient) vector instead, and unfold_vector copies them back.
SpMat fold_periodic(const SpMat& full, const PeriodicFeSpace& space);
SpMat fold_periodic(const SpMat& full, const PeriodicFeSpace& rows,
                    const PeriodicFeSpace& cols);
// Fold only the column space (rows stay on a plain FeSpace numbering).
SpMat fold_columns(const SpMat& full, const PeriodicFeSpace& cols);
Eigen::VectorXd fold_vector(const Eigen::VectorXd& full, const PeriodicFeSpace& space);
Eigen::VectorXd fold_nodal(const Eigen::VectorXd& full, const PeriodicFeSpace& space);
Eigen::VectorXd unfold_vector(const Eigen::VectorXd& folded,
                              const PeriodicFeSpace& space);

}  // namespace pmel
