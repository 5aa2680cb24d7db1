#pragma once
// Sparse direct solvers with residual verification.  Systems are either a
// single SPD block or a 2x2 block layout stored exactly as written,
//   [[A, B01], [B10, C11]] [x; y] = [rhs0; rhs1],
// covering symmetric saddle problems (B01 = B10^T, C11 <= 0) and the
// nonsymmetric first-order forms.
#include <utility>

#include "pmel/fe_space.hpp"

namespace pmel {

struct LinearSystem {
  int nblocks = 1;
  SpMat A;
  SpMat B01, B10, C11;  // used when nblocks == 2; empty C11 means a zero block
  Eigen::VectorXd rhs0, rhs1;
  bool symmetric = true;
  bool saddle = false;
};

// Cholesky-type solve; relative residual checked against 1e-10.
Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& rhs);
Eigen::VectorXd solve_spd(const LinearSystem& sys);

// General sparse LU with residual check (1e-9).
Eigen::VectorXd solve_lu(const SpMat& K, const Eigen::VectorXd& rhs);

// Monolithic LU of the 2x2 block system; per-block relative residuals are
// checked against 1e-9.
std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_saddle(const LinearSystem& sys);

// Assemble the monolithic sparse matrix of a 2x2 block system.
SpMat block_matrix(const LinearSystem& sys);

}  // namespace pmel
