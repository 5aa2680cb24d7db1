#pragma once
// Quadrature-evaluated norms of finite element fields.  Quadrature degrees
// are chosen so that norms of discrete fields are exact; the energy norm
// contracts the strain with a supplied elastic tensor (identity by default,
// giving the plain strain norm for vector fields; H1-seminorm for scalars).
#include "pmel/assembly.hpp"

namespace pmel {

struct FieldNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;
  double h1 = 0.0;
  double energy = 0.0;
};

FieldNorms compute_norms(const FeSpace& space, const Eigen::VectorXd& coeffs,
                         const TensorCoefficient& energy_tensor = nullptr);

}  // namespace pmel
