#include "pmel/solve.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/CholmodSupport>
#include <Eigen/SparseCholesky>
#include <Eigen/UmfPackSupport>

#include "pmel/errors.hpp"

namespace pmel {

namespace {

double frob_norm(const SpMat& A) {
  double s = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) s += it.value() * it.value();
  return std::sqrt(s);
}

double rel_residual(const SpMat& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                    double matnorm) {
  const double scale = std::max({b.norm(), matnorm * x.norm(), 1e-300});
  return (A * x - b).norm() / scale;
}

template <class Solver>
Eigen::VectorXd refine_and_check(Solver& solver, const SpMat& A, const Eigen::VectorXd& b,
                                 double tol, const char* what) {
  Eigen::VectorXd x = solver.solve(b);
  if (solver.info() != Eigen::Success) throw SolverBreakdown(std::string(what) + ": solve failed");
  const double matnorm = frob_norm(A);
  std::vector<double> history;
  history.push_back(rel_residual(A, x, b, matnorm));
  for (int it = 0; it < 2 && history.back() > tol; ++it) {
    const Eigen::VectorXd r = b - A * x;
    x += solver.solve(r);
    history.push_back(rel_residual(A, x, b, matnorm));
  }
  if (history.back() > tol) {
    std::ostringstream msg;
    msg << what << ": residual stalled at";
    for (double r : history) msg << " " << r;
    throw SolverBreakdown(msg.str());
  }
  return x;
}

}  // namespace

Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& rhs) {
  if (A.rows() != A.cols() || A.rows() != rhs.size())
    throw DimensionMismatch("spd solve shape mismatch");
  if (A.rows() == 0) return Eigen::VectorXd();
  // supernodal factorization pays off on the large fine-scale systems
  if (A.rows() >= 200000) {
    Eigen::CholmodSupernodalLLT<SpMat> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success)
      throw SolverBreakdown("spd factorization failed (supernodal)");
    return refine_and_check(solver, A, rhs, 1e-10, "spd solve");
  }
  Eigen::SimplicialLDLT<SpMat> solver;
  solver.compute(A);
  if (solver.info() != Eigen::Success) throw SolverBreakdown("spd factorization failed");
  return refine_and_check(solver, A, rhs, 1e-10, "spd solve");
}

Eigen::VectorXd solve_spd(const LinearSystem& sys) {
  if (sys.nblocks != 1) throw ValidationFailure("solve_spd expects a single-block system");
  return solve_spd(sys.A, sys.rhs0);
}

Eigen::VectorXd solve_lu(const SpMat& K, const Eigen::VectorXd& rhs) {
  if (K.rows() != K.cols() || K.rows() != rhs.size())
    throw DimensionMismatch("lu solve shape mismatch");
  if (K.rows() == 0) return Eigen::VectorXd();
  Eigen::UmfPackLU<SpMat> solver;
  solver.compute(K);
  if (solver.info() != Eigen::Success)
    throw IndefinitePivot("lu factorization reported a singular or invalid pivot");
  return refine_and_check(solver, K, rhs, 1e-9, "lu solve");
}

namespace {

int block_n1(const LinearSystem& sys) {
  if (sys.C11.rows() > 0) return static_cast<int>(sys.C11.rows());
  if (sys.B10.rows() > 0) return static_cast<int>(sys.B10.rows());
  return static_cast<int>(sys.B01.cols());
}

}  // namespace

SpMat block_matrix(const LinearSystem& sys) {
  if (sys.nblocks != 2) throw ValidationFailure("block_matrix expects a 2x2 system");
  const int n0 = static_cast<int>(sys.A.rows());
  const int n1 = block_n1(sys);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(sys.A.nonZeros() + sys.B01.nonZeros() + sys.B10.nonZeros() +
               (sys.C11.rows() > 0 ? sys.C11.nonZeros() : 0));
  auto add = [&trip](const SpMat& M, int roff, int coff) {
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()) + roff,
                          static_cast<int>(it.col()) + coff, it.value());
  };
  add(sys.A, 0, 0);
  if (sys.B01.nonZeros() > 0) add(sys.B01, 0, n0);
  if (sys.B10.nonZeros() > 0) add(sys.B10, n0, 0);
  if (sys.C11.rows() > 0 && sys.C11.nonZeros() > 0) add(sys.C11, n0, n0);
  SpMat K(n0 + n1, n0 + n1);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_saddle(const LinearSystem& sys) {
  if (sys.nblocks != 2) throw ValidationFailure("solve_saddle expects a 2x2 system");
  const int n0 = static_cast<int>(sys.A.rows());
  const int n1 = block_n1(sys);
  if (sys.rhs0.size() != n0 || sys.rhs1.size() != n1)
    throw DimensionMismatch("saddle rhs shape mismatch");
  const SpMat K = block_matrix(sys);
  Eigen::VectorXd rhs(n0 + n1);
  rhs.head(n0) = sys.rhs0;
  rhs.tail(n1) = sys.rhs1;

  Eigen::UmfPackLU<SpMat> solver;
  solver.compute(K);
  if (solver.info() != Eigen::Success)
    throw IndefinitePivot("saddle factorization reported a singular or invalid pivot");
  Eigen::VectorXd sol = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw SolverBreakdown("saddle solve failed");
  const double matnorm = frob_norm(K);
  double rel = rel_residual(K, sol, rhs, matnorm);
  for (int it = 0; it < 2 && rel > 1e-12; ++it) {
    const Eigen::VectorXd r = rhs - K * sol;
    sol += solver.solve(r);
    rel = rel_residual(K, sol, rhs, matnorm);
  }

  Eigen::VectorXd x = sol.head(n0), y = sol.tail(n1);
  const double scale = std::max({rhs.norm(), matnorm * sol.norm(), 1e-300});
  Eigen::VectorXd r0 = sys.A * x - sys.rhs0;
  if (sys.B01.nonZeros() > 0) r0 += sys.B01 * y;
  Eigen::VectorXd r1 = -sys.rhs1;
  if (sys.B10.nonZeros() > 0) r1 += sys.B10 * x;
  if (sys.C11.rows() > 0 && sys.C11.nonZeros() > 0) r1 += sys.C11 * y;
  if (r0.norm() > 1e-9 * scale || r1.norm() > 1e-9 * scale) {
    std::ostringstream msg;
    msg << "saddle solve block residuals " << r0.norm() / scale << " " << r1.norm() / scale;
    throw SolverBreakdown(msg.str());
  }
  return {std::move(x), std::move(y)};
}

}  // namespace pmel
