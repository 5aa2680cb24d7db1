#include "pmel/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "pmel/assembly.hpp"
#include "pmel/errors.hpp"

extern "C" {
void dsygvd_(const int* itype, const char* jobz, const char* uplo, const int* n, double* a,
             const int* lda, double* b, const int* ldb, double* w, double* work,
             const int* lwork, int* iwork, const int* liwork, int* info);
}

namespace pmel {

double smallest_generalized_eigenvalue(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  if (n == 0 || A.cols() != n || B.rows() != n || B.cols() != n)
    throw EigSolverFailure("generalized eigensolve needs square matrices of equal size");
  Eigen::MatrixXd a = 0.5 * (A + A.transpose());
  Eigen::MatrixXd b = 0.5 * (B + B.transpose());
  Eigen::VectorXd w(n);
  const int itype = 1;
  const char jobz = 'N', uplo = 'L';
  int info = 0;
  int lwork = -1, liwork = -1;
  double work_query = 0.0;
  int iwork_query = 0;
  dsygvd_(&itype, &jobz, &uplo, &n, a.data(), &n, b.data(), &n, w.data(), &work_query,
          &lwork, &iwork_query, &liwork, &info);
  if (info != 0) throw EigSolverFailure("eigensolver workspace query failed");
  lwork = static_cast<int>(work_query);
  liwork = std::max(1, iwork_query);
  std::vector<double> work(static_cast<size_t>(lwork));
  std::vector<int> iwork(static_cast<size_t>(liwork));
  dsygvd_(&itype, &jobz, &uplo, &n, a.data(), &n, b.data(), &n, w.data(), work.data(),
          &lwork, iwork.data(), &liwork, &info);
  if (info != 0) {
    if (info > n) throw EigSolverFailure("metric matrix is not positive definite");
    throw EigSolverFailure("generalized eigensolver did not converge");
  }
  return w[0];
}

double estimate_inf_sup(const SpMat& B, const SpMat& Mv, const SpMat& Mq) {
  const int nv = static_cast<int>(Mv.rows());
  const int nq = static_cast<int>(Mq.rows());
  if (B.rows() != nq || B.cols() != nv) throw EigSolverFailure("coupling block shape mismatch");
  if (nq == 0 || nv == 0) throw EigSolverFailure("empty space in inf-sup estimate");

  Eigen::SimplicialLDLT<SpMat> mv_solver;
  mv_solver.compute(Mv);
  if (mv_solver.info() != Eigen::Success)
    throw EigSolverFailure("v-norm matrix factorization failed");

  // Schur complement S = B Mv^{-1} B^T, built column-block-wise to bound memory
  const Eigen::MatrixXd Bt = Eigen::MatrixXd(B).transpose();
  Eigen::MatrixXd S(nq, nq);
  const int chunk = 512;
  for (int c0 = 0; c0 < nq; c0 += chunk) {
    const int nc = std::min(chunk, nq - c0);
    const Eigen::MatrixXd X = mv_solver.solve(Bt.middleCols(c0, nc));
    if (mv_solver.info() != Eigen::Success)
      throw EigSolverFailure("v-norm matrix solve failed");
    S.middleCols(c0, nc) = B * X;
  }
  S = 0.5 * (S + S.transpose()).eval();

  const double lam = smallest_generalized_eigenvalue(S, Eigen::MatrixXd(Mq));
  const double scale = std::max(S.cwiseAbs().maxCoeff(), 1e-300);
  if (lam <= 1e-12 * scale) return 0.0;
  return std::sqrt(lam);
}

double korn_from_matrices(const SpMat& Keps, const SpMat& Mh1,
                          const Eigen::MatrixXd& constraints) {
  const int n = static_cast<int>(Keps.rows());
  if (n == 0) throw DegenerateSpace("no free dofs");
  Eigen::MatrixXd K = Eigen::MatrixXd(Keps);
  Eigen::MatrixXd M = Eigen::MatrixXd(Mh1);
  if (constraints.rows() > 0) {
    // orthonormal basis of the constraint null space via full QR of C^T
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraints.transpose());
    const Eigen::MatrixXd Q = qr.householderQ();
    const int nz = n - static_cast<int>(constraints.rows());
    if (nz <= 0) throw DegenerateSpace("constraints exhaust the space");
    const Eigen::MatrixXd Z = Q.rightCols(nz);
    K = Z.transpose() * K * Z;
    M = Z.transpose() * M * Z;
  }
  const double lam = smallest_generalized_eigenvalue(K, M);
  if (lam < 1e-12) throw DegenerateSpace("rigid motions survive the constraints");
  return std::sqrt(lam);
}

double korn_constant(const FeSpace& space) {
  if (space.arity != Arity::vectord) throw SpaceMismatch("Korn constant needs a vector space");
  const auto id_tensor = [&](const Point&) { return SymTensor4::identity_sym(space.mesh.d); };
  const SpMat K = restrict_matrix(assemble_elastic(space, id_tensor), space);
  const SpMat M = restrict_matrix(assemble_h1(space), space);
  return korn_from_matrices(K, M, Eigen::MatrixXd(0, space.nfree));
}

double korn_constant(const PeriodicFeSpace& space) {
  if (space.base.arity != Arity::vectord)
    throw SpaceMismatch("Korn constant needs a vector space");
  const auto id_tensor = [&](const Point&) {
    return SymTensor4::identity_sym(space.base.mesh.d);
  };
  const SpMat K = fold_periodic(assemble_elastic(space.base, id_tensor), space);
  const SpMat M = fold_periodic(assemble_h1(space.base), space);
  return korn_from_matrices(K, M, space.mean_rows);
}

}  // namespace pmel
