#pragma once
// Fourth-order tensors with full (minor + major) symmetry acting on symmetric
// d x d matrices, d in {1,2}.  Stored internally as the matrix of the induced
// linear map in an orthonormal basis of symmetric matrices ("engineering"
// vectorization with sqrt(2) on the off-diagonal slot), so that
//   apply      = matrix-vector product,
//   a xi : zeta = vec(a xi) . vec(zeta),
//   inverse    = dense matrix inverse,
// and eigenvalues of the stored matrix are the eigenvalues of the map.
#include <vector>

#include <Eigen/Dense>

#include "pmel/errors.hpp"

namespace pmel {

inline int voigt_dim(int d) { return d * (d + 1) / 2; }

// vec/unvec between symmetric d x d matrices and R^{vd}.  Slot order for
// d = 2: (00, 11, 01); the off-diagonal slot carries a factor sqrt(2) so the
// euclidean inner product equals the Frobenius product.
Eigen::VectorXd sym_to_vec(const Eigen::MatrixXd& s);
Eigen::MatrixXd vec_to_sym(int d, const Eigen::VectorXd& v);

class SymTensor4 {
 public:
  SymTensor4() : d_(0) {}

  // From the vd x vd matrix in the orthonormal basis; must be symmetric.
  static SymTensor4 from_voigt(int d, const Eigen::MatrixXd& V);

  // From raw entries a_{ijkl} (row-major over (i,j,k,l), each index < d).
  // Rejects violations of a_{ijkl} = a_{jikl} = a_{ijlk} = a_{klij}
  // beyond 1e-14 relative.
  static SymTensor4 from_entries(int d, const std::vector<double>& a);

  // a_{ijkl} = mu (d_ik d_jl + d_il d_jk) + lambda d_ij d_kl.
  static SymTensor4 isotropic(int d, double mu, double lambda);

  // Identity map on symmetric matrices (== isotropic(d, 1/2, 0)).
  static SymTensor4 identity_sym(int d);

  int dim() const { return d_; }
  const Eigen::MatrixXd& voigt() const { return V_; }
  double entry(int i, int j, int k, int l) const;

  // a xi for symmetric xi; rejects asymmetry beyond 1e-12 relative.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& xi) const;

  // Inverse map; throws SingularTensor if the smallest eigenvalue of the
  // stored matrix is below 1e-12.
  SymTensor4 inverse() const;

  // Frobenius product a xi : zeta.
  double contract(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& zeta) const;

  SymTensor4 scaled(double c) const;
  SymTensor4 plus(const SymTensor4& other) const;

  // Smallest / largest eigenvalue of the induced map.
  double min_eigenvalue() const;
  double max_eigenvalue() const;

  // Operator norm of the induced map (largest |eigenvalue|).
  double op_norm() const;

 private:
  int d_;
  Eigen::MatrixXd V_;
};

}  // namespace pmel
