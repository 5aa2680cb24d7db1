#pragma once
// Bilinear-form and load-vector assembly on structured Lagrange spaces.  All
// matrices are returned on the full dof set (constraints are applied by
// restriction afterwards).  Strains use the orthonormal vectorization of
// symmetric matrices (sqrt(2) on the shear slot), matching SymTensor4.
#include <functional>

#include "pmel/fe_space.hpp"
#include "pmel/tensor.hpp"

namespace pmel {

enum class CoefficientMode { quadrature, midpoint };

struct AssemblyOptions {
  CoefficientMode mode = CoefficientMode::quadrature;
  int quad_degree = 0;  // 0 = pick from element order
};

using TensorCoefficient = std::function<SymTensor4(const Point&)>;
using ScalarCoefficient = std::function<double(const Point&)>;
using VectorField = std::function<Eigen::VectorXd(const Point&)>;

// K[u,v] = int a(x) eps(u):eps(v); vector spaces only.
SpMat assemble_elastic(const FeSpace& space, const TensorCoefficient& tensor_at,
                       const AssemblyOptions& opts = {});

// B[q,v] = int (div v) q; rows over the scalar q-space, cols over the
// vector v-space (same mesh). The weighted overload integrates w (div v) q.
SpMat assemble_div_coupling(const FeSpace& vspace, const FeSpace& qspace,
                            const AssemblyOptions& opts = {});
SpMat assemble_div_coupling(const FeSpace& vspace, const FeSpace& qspace,
                            const ScalarCoefficient& weight,
                            const AssemblyOptions& opts = {});

// M[u,v] = int w u.v componentwise (any arity; for symtensor spaces the
// euclidean slot product is the Frobenius product), or with a tensor weight
// on symtensor spaces M[s,t] = int (W s):t.
SpMat assemble_weighted_mass(const FeSpace& space, const ScalarCoefficient& weight,
                             const AssemblyOptions& opts = {});
SpMat assemble_weighted_mass(const FeSpace& space, const TensorCoefficient& weight,
                             const AssemblyOptions& opts = {});
SpMat assemble_mass(const FeSpace& space);

// Componentwise gradient stiffness int grad u : grad v, and mass + stiffness.
SpMat assemble_grad_stiffness(const FeSpace& space);
SpMat assemble_h1(const FeSpace& space);

// E[s,v] = int s : eps(v), optionally with a tensor between: int s : (a eps(v)).
// Rows over the symtensor space, cols over the vector space.
SpMat assemble_stress_strain_coupling(const FeSpace& sspace, const FeSpace& vspace,
                                      const AssemblyOptions& opts = {});
SpMat assemble_stress_strain_coupling(const FeSpace& sspace, const FeSpace& vspace,
                                      const TensorCoefficient& tensor_at,
                                      const AssemblyOptions& opts = {});

// L[v] = int f.v (f gives one value per component).
Eigen::VectorXd assemble_load(const FeSpace& space, const VectorField& f,
                              const AssemblyOptions& opts = {});

// L[v] = int S(x) : eps(v) for a symmetric-tensor field S given in slot
// coordinates; vector spaces only.
Eigen::VectorXd assemble_strain_load(const FeSpace& space, const VectorField& stress_at,
                                     const AssemblyOptions& opts = {});

// L[v] = int g(x) div v; vector spaces only.
Eigen::VectorXd assemble_div_load(const FeSpace& space, const ScalarCoefficient& g,
                                  const AssemblyOptions& opts = {});

}  // namespace pmel
