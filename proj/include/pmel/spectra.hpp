#pragma once
// Inf-sup and Korn-type constants via dense symmetric-definite generalized
// eigensolves (LAPACK dsygvd).  Intended for desk-scale spectral checks; all
// inputs live on free dofs.
#include "pmel/fe_space.hpp"

namespace pmel {

// Smallest eigenvalue of A x = lambda B x for symmetric A and SPD B.
double smallest_generalized_eigenvalue(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Smallest sigma with B Mv^{-1} B^T q = sigma^2 Mq q.  Eigenvalues at
// round-off level are clamped to an exact 0 (spurious-mode detection).
double estimate_inf_sup(const SpMat& B, const SpMat& Mv, const SpMat& Mq);

// Discrete constant c with ||eps(v)|| >= c ||v||_H1; throws DegenerateSpace
// when rigid motions survive the constraints.
double korn_constant(const FeSpace& space);
double korn_constant(const PeriodicFeSpace& space);

// Shared engine: smallest sqrt-eigenvalue of Keps x = lambda Mh1 x on the
// null space of the constraint rows (pass a 0 x n matrix for none).
double korn_from_matrices(const SpMat& Keps, const SpMat& Mh1,
                          const Eigen::MatrixXd& constraints);

}  // namespace pmel
