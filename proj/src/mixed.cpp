#include "pmel/mixed.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "pmel/cell_geometry.hpp"
#include "pmel/errors.hpp"
#include "pmel/homogenization.hpp"
#include "pmel/legendre.hpp"
#include "pmel/solve.hpp"
#include "pmel/spectra.hpp"

namespace pmel {

namespace {

int max_order_in_any_dim(const IndexSet& lambda) {
  int best = 0;
  for (const MultiIndex& nu : lambda.indices())
    for (const auto& [dim, order] : nu.support()) best = std::max(best, order);
  return best;
}

void check_set(const IndexSet& lambda, int M) {
  if (lambda.size() == 0) throw ValidationFailure("Galerkin needs a nonempty index set");
  if (lambda.max_dim() > M)
    throw DimensionMismatch("index set uses dimension " + std::to_string(lambda.max_dim()) +
                            " but the family has " + std::to_string(M) + " modes");
}

// Parameter-quadrature resolution: enough to integrate the requested degrees,
// clamped so the tensor grid stays inside the node budget.
int auto_points(const IndexSet& lambda, int requested, int extra, int M,
                std::vector<std::string>* warnings) {
  const int maxdeg = max_order_in_any_dim(lambda);
  int pts = requested > 0 ? requested : maxdeg + extra;
  if (M > 0) {
    while (pts > 1 && std::pow(static_cast<double>(pts), M) > 200000.0) --pts;
    if (pts < maxdeg + 1 && warnings)
      warnings->push_back("parameter quadrature clamped to " + std::to_string(pts) +
                          " points per dimension; degree " + std::to_string(maxdeg) +
                          " moments are under-integrated");
  }
  return std::max(pts, 1);
}

TensorCoefficient freeze_tensor(const AffineElasticTensor* tensor, ParamPoint z, double eps) {
  return [tensor, z = std::move(z), eps](const Point& x) {
    const Point y = eps > 0.0 ? unit_cell_point(x, eps) : Point(Point::Zero());
    return evaluate_tensor(*tensor, z, x, y);
  };
}

TensorCoefficient freeze_field(const TensorField* field, double eps) {
  return [field, eps](const Point& x) {
    const Point y = eps > 0.0 ? unit_cell_point(x, eps) : Point(Point::Zero());
    return (*field)(x, y);
  };
}

TensorCoefficient iso_from_scalar(const ScalarXYField* field, int d) {
  return [field, d](const Point& x) {
    return isotropic_to_tensor((*field)(x, SpatialPoint::Zero()), 0.0, d);
  };
}

// Physical coefficient samples per cell, honoring the evaluation mode: the
// midpoint rule is one centroid sample carrying the cell volume.
struct SampleSet {
  std::vector<Point> x, y;
  std::vector<double> w;
};

std::vector<SampleSet> cell_sample_table(const Mesh& mesh, CoefficientMode mode, int degree,
                                         double eps) {
  const std::vector<QuadPoint> rule = reference_rule(mesh.d, degree, mode);
  std::vector<SampleSet> table(static_cast<std::size_t>(mesh.ncells()));
  for (int c = 0; c < mesh.ncells(); ++c) {
    const CellGeom g = cell_geometry(mesh, c);
    SampleSet& s = table[static_cast<std::size_t>(c)];
    for (const QuadPoint& qp : rule) {
      const Point x = g.p0 + g.J * qp.xhat;
      s.x.push_back(x);
      s.y.push_back(eps > 0.0 ? unit_cell_point(x, eps) : Point(Point::Zero()));
      s.w.push_back(qp.w * g.detJ);
    }
  }
  return table;
}

inline std::size_t tri(int i, int j) {  // storage slot for a pair i <= j
  return static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * (j + 1) / 2;
}

// Moments out[tri(i,j)][cell] = int L_i(z) L_j(z) cell_at(z, cell) rho(dz) by
// tensorized Gauss quadrature; the integrand is symmetric in the pair.
template <class CellAt>
std::vector<std::vector<Eigen::MatrixXd>> pair_moments(const IndexSet& lambda, int M, int points,
                                                       int ncells, int rows, int cols,
                                                       const CellAt& cell_at) {
  const int n = lambda.size();
  const std::size_t npairs = tri(n - 1, n - 1) + 1;
  if (static_cast<double>(npairs) * ncells * rows * cols * 8.0 > 6.0e8)
    throw BudgetExceeded("parameter-moment table over the memory budget");
  std::vector<std::vector<Eigen::MatrixXd>> out(
      npairs, std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(ncells),
                                           Eigen::MatrixXd::Zero(rows, cols)));
  const ZQuadrature grid = tensor_gauss(M, points, 200000);
  Eigen::MatrixXd Lv(n, grid.size());
  for (int q = 0; q < grid.size(); ++q)
    for (int i = 0; i < n; ++i) Lv(i, q) = multi_legendre_eval(lambda[i], grid.nodes[q]);
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    for (int c = 0; c < ncells; ++c) {
      const Eigen::MatrixXd val = grid.weights[q] * cell_at(zp, c);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i)
          out[tri(i, j)][static_cast<std::size_t>(c)] += (Lv(i, q) * Lv(j, q)) * val;
    }
  }
  return out;
}

void scatter_block(std::vector<Eigen::Triplet<double>>& trip, const SpMat& X, int row_off,
                   int col_off, double scale) {
  for (int k = 0; k < X.outerSize(); ++k)
    for (SpMat::InnerIterator it(X, k); it; ++it)
      trip.emplace_back(row_off + static_cast<int>(it.row()),
                        col_off + static_cast<int>(it.col()), scale * it.value());
}

SpMat from_triplets(std::vector<Eigen::Triplet<double>>& trip, int rows, int cols) {
  SpMat X(rows, cols);
  X.setFromTriplets(trip.begin(), trip.end());
  return X;
}

SpMat repeat_blockdiag(const SpMat& X, int k) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(X.nonZeros()) * k);
  for (int b = 0; b < k; ++b)
    scatter_block(trip, X, b * static_cast<int>(X.rows()), b * static_cast<int>(X.cols()), 1.0);
  return from_triplets(trip, static_cast<int>(X.rows()) * k, static_cast<int>(X.cols()) * k);
}

struct HrSpaces {
  FeSpace sspace, vspace;
};

HrSpaces hr_spaces(const HrProblem& p) {
  const Mesh mesh = make_mesh(p.tensor.d, p.mesh_n);
  return {make_space(mesh, 0, Arity::symtensor, DirichletTag::none),
          make_space(mesh, 1, Arity::vectord, p.dirichlet)};
}

struct PenaltySpaces {
  FeSpace vspace, qspace;
};

PenaltySpaces penalty_spaces(const PenaltyProblem& p) {
  if (p.dirichlet == DirichletTag::all)
    throw FullDirichletRejected(
        "the penalty formulation needs a traction part of the boundary: full clamping forces "
        "a pressure compatibility constraint the pair does not carry");
  if (p.dirichlet == DirichletTag::none)
    throw ValidationFailure("the penalty displacement space needs a clamped boundary part");
  if (!(p.lame.lambdabar_min > 0.0))
    throw InvalidConstants("lambdabar_min must be positive");
  const Mesh mesh = make_mesh(p.lame.d, p.mesh_n);
  return {make_space(mesh, p.order, Arity::vectord, p.dirichlet),
          make_space(mesh, 0, Arity::scalar, DirichletTag::none)};
}

LinearSystem hr_system_at_z(const HrProblem& p, const FeSpace& ss, const FeSpace& vs,
                            const ParamPoint& z, HrForm form) {
  AssemblyOptions ao;
  ao.mode = p.mode;
  const TensorCoefficient at = freeze_tensor(&p.tensor, z, p.eps);
  const SpMat E = restrict_matrix(assemble_stress_strain_coupling(ss, vs, ao), ss, vs);
  LinearSystem sys;
  sys.nblocks = 2;
  sys.saddle = true;
  if (form == HrForm::b1) {
    const TensorCoefficient ainv = [at](const Point& x) { return invert_tensor(at(x)); };
    sys.A = restrict_matrix(assemble_weighted_mass(ss, ainv, ao), ss);
    sys.B01 = -E;
    sys.symmetric = true;
  } else {
    sys.A = restrict_matrix(assemble_mass(ss), ss);
    sys.B01 = -restrict_matrix(assemble_stress_strain_coupling(ss, vs, at, ao), ss, vs);
    sys.symmetric = false;
  }
  sys.B10 = SpMat(-E.transpose());
  sys.rhs0 = Eigen::VectorXd::Zero(ss.nfree);
  sys.rhs1 = -restrict_vector(assemble_load(vs, p.f), vs);
  return sys;
}

LinearSystem penalty_system_at_z(const PenaltyProblem& p, const FeSpace& vs, const FeSpace& qs,
                                 const ParamPoint& z, PenaltyForm form) {
  AssemblyOptions ao;
  ao.mode = p.mode;
  const IsotropicLameField* lame = &p.lame;
  const int d = p.lame.d;
  const TensorCoefficient mu2 = [lame, z, d](const Point& x) {
    return isotropic_to_tensor(lame->mu_at(z, x, SpatialPoint::Zero()), 0.0, d);
  };
  const auto lambda_at = [lame, z](const Point& x) {
    const double l = lame->lambda_at(z, x, SpatialPoint::Zero());
    if (!(l > 0.0)) throw ValidationFailure("lambda is not positive at a sample point");
    return l;
  };
  LinearSystem sys;
  sys.nblocks = 2;
  sys.saddle = true;
  sys.A = restrict_matrix(assemble_elastic(vs, mu2, ao), vs);
  const SpMat B = assemble_div_coupling(vs, qs, ao);
  sys.B01 = restrict_matrix(SpMat(B.transpose()), vs, qs);
  if (form == PenaltyForm::b3) {
    const ScalarCoefficient invl = [lambda_at](const Point& x) { return 1.0 / lambda_at(x); };
    sys.B10 = restrict_matrix(B, qs, vs);
    sys.C11 = -restrict_matrix(assemble_weighted_mass(qs, invl, ao), qs);
    sys.symmetric = true;
  } else {
    const double lbar = p.lame.lambdabar_min;
    const ScalarCoefficient w = [lambda_at, lbar](const Point& x) { return lambda_at(x) / lbar; };
    sys.B10 = restrict_matrix(assemble_div_coupling(vs, qs, w, ao), qs, vs);
    sys.C11 = SpMat((-1.0 / lbar) * restrict_matrix(assemble_mass(qs), qs));
    sys.symmetric = false;
  }
  sys.rhs0 = restrict_vector(assemble_load(vs, p.f), vs);
  sys.rhs1 = Eigen::VectorXd::Zero(qs.nfree);
  return sys;
}

// A solution norm 1e8 times past the data norm certifies that the smallest
// singular value of the assembled block matrix is below 1e-8.
void check_blowup(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, const LinearSystem& sys) {
  const double data = std::max(sys.rhs0.norm(), sys.rhs1.norm());
  if (std::sqrt(x0.squaredNorm() + x1.squaredNorm()) > 1e8 * data)
    throw InfSupFailure("solution norm exceeds 1e8 times the data norm: the discrete inf-sup "
                        "constant is below 1e-8");
}

double diag_spread_of(const SpMat& A) {
  const Eigen::VectorXd diag = A.diagonal();
  if (diag.size() == 0) return 0.0;
  return diag.maxCoeff() / std::max(diag.minCoeff(), 1e-300);
}

void require_alpha_strong(const AffineElasticTensor& tensor) {
  const double a0 = tensor.alpha0, b0 = tensor.beta0, k = tensor.kappa;
  if (!(a0 > 0.0)) throw InvalidConstants("alpha0 must be positive");
  const double limit = k / (1.0 + k) * a0 * a0 / (a0 + b0);
  if (tensor.sum_beta() > limit * (1.0 + 1e-12))
    throw AlphaStrongViolated("mode budget " + std::to_string(tensor.sum_beta()) +
                              " exceeds the strengthened limit " + std::to_string(limit) +
                              " required by the stress-strain flavor");
}

// Shared rhs placement: the load enters the block of the zero index.
int zero_block(const IndexSet& lambda, std::vector<std::string>* warnings) {
  const int pos = lambda.position(MultiIndex::zero());
  if (pos < 0 && warnings)
    warnings->push_back("index set lacks the zero index: homogeneous right-hand side");
  return pos;
}

}  // namespace

HrSolution solve_hr_at_z(const HrProblem& p, const ParamPoint& z, HrForm form) {
  z.check_box();
  HrSpaces sp = hr_spaces(p);
  const LinearSystem sys = hr_system_at_z(p, sp.sspace, sp.vspace, z, form);
  const auto [sf, uf] = solve_saddle(sys);
  check_blowup(sf, uf, sys);
  HrSolution out;
  out.sigma = prolong_vector(sf, sp.sspace);
  out.u = prolong_vector(uf, sp.vspace);
  out.sspace = std::move(sp.sspace);
  out.vspace = std::move(sp.vspace);
  return out;
}

HrExpansion solve_hr_galerkin(const HrProblem& p, const IndexSet& lambda, HrForm form,
                              int points_per_dim) {
  const int M = p.tensor.num_modes();
  check_set(lambda, M);
  const HrSpaces sp = hr_spaces(p);
  const FeSpace& ss = sp.sspace;
  const FeSpace& vs = sp.vspace;
  const int n = lambda.size(), ns = ss.nfree, nv = vs.nfree;
  const long long total = static_cast<long long>(n) * (ns + nv);
  if (total > 2500000)
    throw BudgetExceeded("coupled system of " + std::to_string(total) +
                         " dofs is over the desk-scale budget");
  std::vector<std::string> warnings;

  AssemblyOptions ao;
  ao.mode = p.mode;
  const SpMat E = restrict_matrix(assemble_stress_strain_coupling(ss, vs, ao), ss, vs);

  std::vector<Eigen::Triplet<double>> atrip, b01trip, b10trip;
  const int vd = voigt_dim(p.tensor.d);
  if (form == HrForm::b1) {
    const int points = auto_points(lambda, points_per_dim, 4, M, &warnings);
    const std::vector<SampleSet> table = cell_sample_table(ss.mesh, p.mode, 2, p.eps);
    const AffineElasticTensor* tensor = &p.tensor;
    const auto cell_at = [tensor, &table, vd](const ParamPoint& z, int c) {
      const SampleSet& s = table[static_cast<std::size_t>(c)];
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(vd, vd);
      for (std::size_t k = 0; k < s.w.size(); ++k)
        acc += s.w[k] * invert_tensor(evaluate_tensor(*tensor, z, s.x[k], s.y[k])).voigt();
      return acc;
    };
    const auto W = pair_moments(lambda, M, points, ss.mesh.ncells(), vd, vd, cell_at);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) {
        const auto& percell = W[tri(i, j)];
        for (int c = 0; c < ss.mesh.ncells(); ++c) {
          const int sid = ss.cell_scalar[c][0];
          for (int s = 0; s < vd; ++s)
            for (int t = 0; t < vd; ++t) {
              const double v = percell[static_cast<std::size_t>(c)](s, t);
              atrip.emplace_back(i * ns + ss.dof(sid, s), j * ns + ss.dof(sid, t), v);
              if (i != j) atrip.emplace_back(j * ns + ss.dof(sid, s), i * ns + ss.dof(sid, t), v);
            }
        }
      }
    for (int i = 0; i < n; ++i) scatter_block(b01trip, E, i * ns, i * nv, -1.0);
  } else {
    require_alpha_strong(p.tensor);
    const SpMat Ms = restrict_matrix(assemble_mass(ss), ss);
    const SpMat E0 = restrict_matrix(
        assemble_stress_strain_coupling(ss, vs, freeze_field(&p.tensor.abar, p.eps), ao), ss, vs);
    std::vector<SpMat> Em;
    Em.reserve(p.tensor.modes.size());
    for (const TensorMode& mode : p.tensor.modes)
      Em.push_back(restrict_matrix(
          assemble_stress_strain_coupling(ss, vs, freeze_field(&mode.psi, p.eps), ao), ss, vs));
    for (int i = 0; i < n; ++i) {
      scatter_block(atrip, Ms, i * ns, i * ns, 1.0);
      scatter_block(b01trip, E0, i * ns, i * nv, -1.0);
      const MultiIndex& nu = lambda[i];
      for (int m = 1; m <= M; ++m) {
        const int j = lambda.position(nu.plus(m, +1));
        if (j < 0) continue;
        const double c = legendre_coupling(nu.order_of(m));
        scatter_block(b01trip, Em[static_cast<std::size_t>(m - 1)], i * ns, j * nv, -c);
        scatter_block(b01trip, Em[static_cast<std::size_t>(m - 1)], j * ns, i * nv, -c);
      }
    }
  }
  const SpMat Et(E.transpose());
  for (int i = 0; i < n; ++i) scatter_block(b10trip, Et, i * nv, i * ns, -1.0);

  LinearSystem sys;
  sys.nblocks = 2;
  sys.saddle = true;
  sys.symmetric = form == HrForm::b1;
  sys.A = from_triplets(atrip, n * ns, n * ns);
  sys.B01 = from_triplets(b01trip, n * ns, n * nv);
  sys.B10 = from_triplets(b10trip, n * nv, n * ns);
  sys.rhs0 = Eigen::VectorXd::Zero(static_cast<long>(n) * ns);
  sys.rhs1 = Eigen::VectorXd::Zero(static_cast<long>(n) * nv);
  const int zp = zero_block(lambda, &warnings);
  if (zp >= 0)
    sys.rhs1.segment(static_cast<long>(zp) * nv, nv) =
        -restrict_vector(assemble_load(vs, p.f), vs);

  const auto [xs, xu] = solve_saddle(sys);
  HrExpansion out;
  out.sigma.lambda = lambda;
  out.u.lambda = lambda;
  out.sigma.diag_spread = diag_spread_of(sys.A);
  out.u.diag_spread = out.sigma.diag_spread;
  out.sigma.warnings = warnings;
  out.u.warnings = std::move(warnings);
  for (int i = 0; i < n; ++i) {
    out.sigma.coeffs.push_back(prolong_vector(xs.segment(static_cast<long>(i) * ns, ns), ss));
    out.u.coeffs.push_back(prolong_vector(xu.segment(static_cast<long>(i) * nv, nv), vs));
  }
  return out;
}

double hr_residual(const HrProblem& p, const HrExpansion& sol, HrForm form, int points_per_dim) {
  const int M = p.tensor.num_modes();
  check_set(sol.sigma.lambda, M);
  const HrSpaces sp = hr_spaces(p);
  const FeSpace& ss = sp.sspace;
  const FeSpace& vs = sp.vspace;
  const int n = sol.sigma.lambda.size(), ns = ss.nfree, nv = vs.nfree;
  if (sol.u.lambda.size() != n || static_cast<int>(sol.sigma.coeffs.size()) != n ||
      static_cast<int>(sol.u.coeffs.size()) != n)
    throw DimensionMismatch("expansion pair does not match its index set");
  std::vector<Eigen::VectorXd> xfree;
  xfree.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(ns + nv);
    x.head(ns) = restrict_vector(sol.sigma.coeffs[static_cast<std::size_t>(i)], ss);
    x.tail(nv) = restrict_vector(sol.u.coeffs[static_cast<std::size_t>(i)], vs);
    xfree.push_back(std::move(x));
  }
  const int points = auto_points(sol.sigma.lambda, points_per_dim, 6, M, nullptr);
  const ZQuadrature grid = tensor_gauss(M, points, 200000);
  std::vector<Eigen::VectorXd> proj(static_cast<std::size_t>(n),
                                    Eigen::VectorXd::Zero(ns + nv));
  double fnorm = 1e-300;
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    const LinearSystem sys = hr_system_at_z(p, ss, vs, zp, form);
    const SpMat K = block_matrix(sys);
    Eigen::VectorXd rhs(ns + nv);
    rhs.head(ns) = sys.rhs0;
    rhs.tail(nv) = sys.rhs1;
    fnorm = std::max(fnorm, sys.rhs1.norm());
    Eigen::VectorXd xz = Eigen::VectorXd::Zero(ns + nv);
    for (int i = 0; i < n; ++i)
      xz += multi_legendre_eval(sol.sigma.lambda[i], grid.nodes[q]) * xfree[static_cast<std::size_t>(i)];
    const Eigen::VectorXd r = rhs - K * xz;
    for (int i = 0; i < n; ++i)
      proj[static_cast<std::size_t>(i)] +=
          grid.weights[q] * multi_legendre_eval(sol.sigma.lambda[i], grid.nodes[q]) * r;
  }
  double worst = 0.0;
  for (const auto& r : proj) worst = std::max(worst, r.norm() / fnorm);
  return worst;
}

PenaltySolution solve_penalty_at_z(const PenaltyProblem& p, const ParamPoint& z,
                                   PenaltyForm form) {
  z.check_box();
  PenaltySpaces sp = penalty_spaces(p);
  const LinearSystem sys = penalty_system_at_z(p, sp.vspace, sp.qspace, z, form);
  const auto [uf, pf] = solve_saddle(sys);
  check_blowup(uf, pf, sys);
  PenaltySolution out;
  out.u = prolong_vector(uf, sp.vspace);
  out.p = prolong_vector(pf, sp.qspace);
  out.vspace = std::move(sp.vspace);
  out.qspace = std::move(sp.qspace);
  return out;
}

PenaltyThresholds penalty_thresholds(const PenaltyProblem& p, double kappa0) {
  const PenaltySpaces sp = penalty_spaces(p);
  const FeSpace& vs = sp.vspace;
  const FeSpace& qs = sp.qspace;
  PenaltyThresholds th;
  const SpMat B = restrict_matrix(assemble_div_coupling(vs, qs), qs, vs);
  const SpMat Mv = restrict_matrix(assemble_h1(vs), vs);
  const SpMat Mq = restrict_matrix(assemble_mass(qs), qs);
  th.c0 = estimate_inf_sup(B, Mv, Mq);
  th.korn = korn_constant(vs);
  const int d = p.lame.d;
  const TensorCoefficient identity = [d](const Point&) { return SymTensor4::identity_sym(d); };
  const SpMat Keps = restrict_matrix(assemble_elastic(vs, identity), vs);
  const double lmin = smallest_generalized_eigenvalue(Eigen::MatrixXd(Mv), Eigen::MatrixXd(Keps));
  if (!(lmin > 0.0)) throw EigSolverFailure("strain-to-H1 eigenproblem returned a nonpositive value");
  th.c7 = 1.0 / std::sqrt(lmin);
  const double mu_min = p.lame.mu_min(), mu_max = p.lame.mu_max();
  if (!(mu_min > 0.0)) throw InvalidConstants("robust shear floor must be positive");
  const double mu_star = 2.0 * mu_max * th.c7 * th.c7;
  const double c1 = 2.0 * mu_min * th.korn * th.korn;
  const double c3 = 4.0 * mu_star / th.c0;
  th.theta1 = 3.0 * c3 * c3 * (1.0 + p.lame.kappa) / c1;
  IncompressibleConstants ic;
  ic.mu_min = mu_min;
  ic.mu_max = mu_max;
  ic.c0 = th.c0;
  ic.c7 = th.c7;
  ic.kappa0 = kappa0;
  th.theta2 = incompressible_threshold(ic);
  return th;
}

PenaltyExpansion solve_penalty_galerkin(const PenaltyProblem& p, const IndexSet& lambda,
                                        PenaltyForm form, int points_per_dim, double kappa0) {
  const int M = p.lame.num_modes();
  check_set(lambda, M);
  const PenaltySpaces sp = penalty_spaces(p);
  const FeSpace& vs = sp.vspace;
  const FeSpace& qs = sp.qspace;
  const int n = lambda.size(), nv = vs.nfree, nq = qs.nfree;
  const long long total = static_cast<long long>(n) * (nv + nq);
  if (total > 2500000)
    throw BudgetExceeded("coupled system of " + std::to_string(total) +
                         " dofs is over the desk-scale budget");
  std::vector<std::string> warnings;
  if (p.lame.kappa > kappa0 * (1.0 + 1e-12))
    warnings.push_back("stability: declared margin kappa " + std::to_string(p.lame.kappa) +
                       " exceeds the assumed kappa0 " + std::to_string(kappa0));
  if (vs.nfree <= 2000) {
    const PenaltyThresholds th = penalty_thresholds(p, kappa0);
    if (p.lame.lambdabar_min <= th.theta1)
      warnings.push_back("stability: lambdabar_min " + std::to_string(p.lame.lambdabar_min) +
                         " at or below the theta1 surrogate " + std::to_string(th.theta1));
    if (p.lame.lambdabar_min <= th.theta2)
      warnings.push_back("stability: lambdabar_min " + std::to_string(p.lame.lambdabar_min) +
                         " at or below the theta2 surrogate " + std::to_string(th.theta2));
  } else {
    warnings.push_back("stability thresholds skipped: displacement space too large for the "
                       "dense eigensolves");
  }

  AssemblyOptions ao;
  ao.mode = p.mode;
  const int d = p.lame.d;
  const SpMat A0 = restrict_matrix(assemble_elastic(vs, iso_from_scalar(&p.lame.mubar, d), ao), vs);
  std::vector<SpMat> Am(p.lame.mu_modes.size());
  for (std::size_t m = 0; m < p.lame.mu_modes.size(); ++m)
    if (p.lame.mu_modes[m].field)
      Am[m] = restrict_matrix(
          assemble_elastic(vs, iso_from_scalar(&p.lame.mu_modes[m].field, d), ao), vs);
  const SpMat B = assemble_div_coupling(vs, qs, ao);
  const SpMat Btr = restrict_matrix(SpMat(B.transpose()), vs, qs);
  const SpMat Br = restrict_matrix(B, qs, vs);

  std::vector<Eigen::Triplet<double>> atrip, b01trip, b10trip, ctrip;
  for (int i = 0; i < n; ++i) {
    scatter_block(atrip, A0, i * nv, i * nv, 1.0);
    scatter_block(b01trip, Btr, i * nv, i * nq, 1.0);
    const MultiIndex& nu = lambda[i];
    for (int m = 1; m <= M; ++m) {
      const int j = lambda.position(nu.plus(m, +1));
      if (j < 0) continue;
      const double c = legendre_coupling(nu.order_of(m));
      if (m <= static_cast<int>(Am.size()) && Am[static_cast<std::size_t>(m - 1)].nonZeros() > 0) {
        scatter_block(atrip, Am[static_cast<std::size_t>(m - 1)], i * nv, j * nv, c);
        scatter_block(atrip, Am[static_cast<std::size_t>(m - 1)], j * nv, i * nv, c);
      }
    }
  }

  if (form == PenaltyForm::b3) {
    const int points = auto_points(lambda, points_per_dim, 4, M, &warnings);
    const std::vector<SampleSet> table = cell_sample_table(qs.mesh, p.mode, 2, 0.0);
    const IsotropicLameField* lame = &p.lame;
    const auto cell_at = [lame, &table](const ParamPoint& z, int c) {
      const SampleSet& s = table[static_cast<std::size_t>(c)];
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(1, 1);
      for (std::size_t k = 0; k < s.w.size(); ++k) {
        const double l = lame->lambda_at(z, s.x[k], SpatialPoint::Zero());
        if (!(l > 0.0)) throw ValidationFailure("lambda is not positive at a sample point");
        acc(0, 0) += s.w[k] / l;
      }
      return acc;
    };
    const auto W = pair_moments(lambda, M, points, qs.mesh.ncells(), 1, 1, cell_at);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) {
        const auto& percell = W[tri(i, j)];
        for (int c = 0; c < qs.mesh.ncells(); ++c) {
          const int qdof = qs.dof(qs.cell_scalar[c][0], 0);
          const double v = -percell[static_cast<std::size_t>(c)](0, 0);
          ctrip.emplace_back(i * nq + qdof, j * nq + qdof, v);
          if (i != j) ctrip.emplace_back(j * nq + qdof, i * nq + qdof, v);
        }
      }
    for (int i = 0; i < n; ++i) scatter_block(b10trip, Br, i * nq, i * nv, 1.0);
  } else {
    const double lbar = p.lame.lambdabar_min;
    const IsotropicLameField* lame = &p.lame;
    const ScalarCoefficient w0 = [lame, lbar](const Point& x) {
      return lame->lambdabar(x, SpatialPoint::Zero()) / lbar;
    };
    const SpMat B0 = restrict_matrix(assemble_div_coupling(vs, qs, w0, ao), qs, vs);
    std::vector<SpMat> Bm(p.lame.lambda_modes.size());
    for (std::size_t m = 0; m < p.lame.lambda_modes.size(); ++m)
      if (p.lame.lambda_modes[m].field) {
        const ScalarXYField* f = &p.lame.lambda_modes[m].field;
        const ScalarCoefficient wm = [f, lbar](const Point& x) {
          return (*f)(x, SpatialPoint::Zero()) / lbar;
        };
        Bm[m] = restrict_matrix(assemble_div_coupling(vs, qs, wm, ao), qs, vs);
      }
    const SpMat Mq = restrict_matrix(assemble_mass(qs), qs);
    for (int i = 0; i < n; ++i) {
      scatter_block(b10trip, B0, i * nq, i * nv, 1.0);
      scatter_block(ctrip, Mq, i * nq, i * nq, -1.0 / lbar);
      const MultiIndex& nu = lambda[i];
      for (int m = 1; m <= M; ++m) {
        const int j = lambda.position(nu.plus(m, +1));
        if (j < 0) continue;
        const double c = legendre_coupling(nu.order_of(m));
        if (m <= static_cast<int>(Bm.size()) && Bm[static_cast<std::size_t>(m - 1)].nonZeros() > 0) {
          scatter_block(b10trip, Bm[static_cast<std::size_t>(m - 1)], i * nq, j * nv, c);
          scatter_block(b10trip, Bm[static_cast<std::size_t>(m - 1)], j * nq, i * nv, c);
        }
      }
    }
  }

  LinearSystem sys;
  sys.nblocks = 2;
  sys.saddle = true;
  sys.symmetric = form == PenaltyForm::b3;
  sys.A = from_triplets(atrip, n * nv, n * nv);
  sys.B01 = from_triplets(b01trip, n * nv, n * nq);
  sys.B10 = from_triplets(b10trip, n * nq, n * nv);
  sys.C11 = from_triplets(ctrip, n * nq, n * nq);
  sys.rhs0 = Eigen::VectorXd::Zero(static_cast<long>(n) * nv);
  sys.rhs1 = Eigen::VectorXd::Zero(static_cast<long>(n) * nq);
  const int zp = zero_block(lambda, &warnings);
  if (zp >= 0)
    sys.rhs0.segment(static_cast<long>(zp) * nv, nv) =
        restrict_vector(assemble_load(vs, p.f), vs);

  const auto [xu, xp] = solve_saddle(sys);
  PenaltyExpansion out;
  out.u.lambda = lambda;
  out.p.lambda = lambda;
  out.u.diag_spread = diag_spread_of(sys.A);
  out.p.diag_spread = out.u.diag_spread;
  out.u.warnings = warnings;
  out.p.warnings = std::move(warnings);
  for (int i = 0; i < n; ++i) {
    out.u.coeffs.push_back(prolong_vector(xu.segment(static_cast<long>(i) * nv, nv), vs));
    out.p.coeffs.push_back(prolong_vector(xp.segment(static_cast<long>(i) * nq, nq), qs));
  }
  return out;
}

double penalty_residual(const PenaltyProblem& p, const PenaltyExpansion& sol, PenaltyForm form,
                        int points_per_dim) {
  const int M = p.lame.num_modes();
  check_set(sol.u.lambda, M);
  const PenaltySpaces sp = penalty_spaces(p);
  const FeSpace& vs = sp.vspace;
  const FeSpace& qs = sp.qspace;
  const int n = sol.u.lambda.size(), nv = vs.nfree, nq = qs.nfree;
  if (sol.p.lambda.size() != n || static_cast<int>(sol.u.coeffs.size()) != n ||
      static_cast<int>(sol.p.coeffs.size()) != n)
    throw DimensionMismatch("expansion pair does not match its index set");
  std::vector<Eigen::VectorXd> xfree;
  xfree.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(nv + nq);
    x.head(nv) = restrict_vector(sol.u.coeffs[static_cast<std::size_t>(i)], vs);
    x.tail(nq) = restrict_vector(sol.p.coeffs[static_cast<std::size_t>(i)], qs);
    xfree.push_back(std::move(x));
  }
  const int points = auto_points(sol.u.lambda, points_per_dim, 6, M, nullptr);
  const ZQuadrature grid = tensor_gauss(M, points, 200000);
  std::vector<Eigen::VectorXd> proj(static_cast<std::size_t>(n),
                                    Eigen::VectorXd::Zero(nv + nq));
  double fnorm = 1e-300;
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    const LinearSystem sys = penalty_system_at_z(p, vs, qs, zp, form);
    const SpMat K = block_matrix(sys);
    Eigen::VectorXd rhs(nv + nq);
    rhs.head(nv) = sys.rhs0;
    rhs.tail(nq) = sys.rhs1;
    fnorm = std::max(fnorm, sys.rhs0.norm());
    Eigen::VectorXd xz = Eigen::VectorXd::Zero(nv + nq);
    for (int i = 0; i < n; ++i)
      xz += multi_legendre_eval(sol.u.lambda[i], grid.nodes[q]) * xfree[static_cast<std::size_t>(i)];
    const Eigen::VectorXd r = rhs - K * xz;
    for (int i = 0; i < n; ++i)
      proj[static_cast<std::size_t>(i)] +=
          grid.weights[q] * multi_legendre_eval(sol.u.lambda[i], grid.nodes[q]) * r;
  }
  double worst = 0.0;
  for (const auto& r : proj) worst = std::max(worst, r.norm() / fnorm);
  return worst;
}

namespace {

struct PairMatrices {
  SpMat B, Mv, Mq;  // rows of B span the inf variable, columns the sup variable
};

PairMatrices pair_matrices(InfSupPair pair, int mesh_n, int d, DirichletTag dirichlet) {
  const Mesh mesh = make_mesh(d, mesh_n);
  PairMatrices out;
  if (pair == InfSupPair::stress_displacement) {
    const FeSpace ss = make_space(mesh, 0, Arity::symtensor, DirichletTag::none);
    const FeSpace vs = make_space(mesh, 1, Arity::vectord, dirichlet);
    const SpMat E = assemble_stress_strain_coupling(ss, vs);
    out.B = restrict_matrix(SpMat(E.transpose()), vs, ss);
    out.Mv = restrict_matrix(assemble_mass(ss), ss);
    out.Mq = restrict_matrix(assemble_h1(vs), vs);
    return out;
  }
  const int vorder = pair == InfSupPair::pressure_stable ? 2 : 1;
  const int qorder = pair == InfSupPair::pressure_stable ? 0 : 1;
  const FeSpace vs = make_space(mesh, vorder, Arity::vectord, dirichlet);
  const FeSpace qs = make_space(mesh, qorder, Arity::scalar, DirichletTag::none);
  out.B = restrict_matrix(assemble_div_coupling(vs, qs), qs, vs);
  out.Mv = restrict_matrix(assemble_h1(vs), vs);
  out.Mq = restrict_matrix(assemble_mass(qs), qs);
  return out;
}

double pair_infsup(InfSupPair pair, int mesh_n, int repeat, int d, DirichletTag dirichlet) {
  PairMatrices m = pair_matrices(pair, mesh_n, d, dirichlet);
  if (repeat > 1) {
    m.B = repeat_blockdiag(m.B, repeat);
    m.Mv = repeat_blockdiag(m.Mv, repeat);
    m.Mq = repeat_blockdiag(m.Mq, repeat);
  }
  return estimate_inf_sup(m.B, m.Mv, m.Mq);
}

const char* pair_name(InfSupPair pair) {
  switch (pair) {
    case InfSupPair::stress_displacement: return "stress_displacement";
    case InfSupPair::pressure_stable: return "pressure_stable";
    default: return "pressure_equal_order";
  }
}

}  // namespace

ConvergenceReport infsup_study(InfSupPair pair, const InfSupStudyOptions& opts) {
  if (opts.mesh_levels.size() < 2)
    throw ValidationFailure("the inf-sup study needs at least two mesh levels");
  ConvergenceReport report;
  report.scenario = "infsup";
  report.columns = {"mesh_n", "lambda_size", "infsup"};
  report.metadata["pair"] = pair_name(pair);
  double first = -1.0;
  for (const int level : opts.mesh_levels) {
    const double val = pair_infsup(pair, level, 1, opts.d, opts.dirichlet);
    report.add_row({static_cast<double>(level), 1.0, val});
    if (val == 0.0)
      report.warnings.push_back("inf-sup constant vanished at mesh " + std::to_string(level) +
                                ": a pressure mode is orthogonal to the coupling range");
    if (first < 0.0)
      first = val;
    else if (val < 0.8 * first)
      report.warnings.push_back("inf-sup degraded beyond 20% at mesh " + std::to_string(level) +
                                ": " + format_number(val) + " vs " + format_number(first));
  }
  double lfirst = -1.0;
  for (const int size : opts.lambda_sizes) {
    const double val = pair_infsup(pair, opts.lambda_mesh, std::max(size, 1), opts.d,
                                   opts.dirichlet);
    report.add_row({static_cast<double>(opts.lambda_mesh), static_cast<double>(size), val});
    if (lfirst < 0.0)
      lfirst = val;
    else if (val < 0.8 * lfirst)
      report.warnings.push_back("inf-sup degraded beyond 20% at set size " +
                                std::to_string(size) + ": " + format_number(val) + " vs " +
                                format_number(lfirst));
  }
  return report;
}

ConvergenceReport hr_error_study(const HrProblem& p, const BoundSequence& seq,
                                 const std::vector<int>& n_list, HrForm form,
                                 const MixedStudyOptions& opts) {
  std::vector<double> betas;
  for (const TensorMode& mode : p.tensor.modes) betas.push_back(mode.beta);
  const SummabilityCertificate cert =
      summability_certificate(betas, opts.p_summability, p.tensor.kappa, seq.kind);
  if (!cert.ok) throw ValidationFailure("summability certificate failed: " + cert.detail);

  ConvergenceReport report;
  report.scenario = "hr";
  report.columns = {"N", "error", "error_sigma", "error_u", "fitted_slope"};
  std::vector<IndexSet> sets;
  int max_order = 0;
  for (const int n : n_list) {
    std::vector<std::string> warn;
    sets.push_back(best_n_indices(seq, n, &warn));
    for (auto& w : warn) report.warnings.push_back(std::move(w));
    max_order = std::max(max_order, max_order_in_any_dim(sets.back()));
  }
  const int points = opts.points_per_dim > 0 ? opts.points_per_dim : max_order + 2;

  const HrSpaces sp = hr_spaces(p);
  const SpMat Msig = assemble_mass(sp.sspace);
  const SpMat Kh1 = assemble_grad_stiffness(sp.vspace);
  const ZQuadrature grid = tensor_gauss(p.tensor.num_modes(), points, 50000);
  std::vector<Eigen::VectorXd> ref_sigma, ref_u;
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    HrSolution at = solve_hr_at_z(p, zp, form);
    ref_sigma.push_back(std::move(at.sigma));
    ref_u.push_back(std::move(at.u));
  }

  std::vector<double> xs, errs;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const HrExpansion gal = solve_hr_galerkin(p, sets[k], form, opts.galerkin_points);
    for (const auto& w : gal.u.warnings) report.warnings.push_back(w);
    double es2 = 0.0, eu2 = 0.0;
    for (int q = 0; q < grid.size(); ++q) {
      const Eigen::VectorXd ds = ref_sigma[static_cast<std::size_t>(q)] -
                                 gal.sigma.evaluate(grid.nodes[q]);
      const Eigen::VectorXd du = ref_u[static_cast<std::size_t>(q)] -
                                 gal.u.evaluate(grid.nodes[q]);
      es2 += grid.weights[q] * ds.dot(Msig * ds);
      eu2 += grid.weights[q] * du.dot(Kh1 * du);
    }
    const double es = std::sqrt(std::max(es2, 0.0)), eu = std::sqrt(std::max(eu2, 0.0));
    xs.push_back(static_cast<double>(n_list[k]));
    errs.push_back(es + eu);
    report.add_row({xs.back(), errs.back(), es, eu, 0.0});
  }
  report.sort_by_first();
  try {
    const RateFit fit = fit_rate(xs, errs);
    for (auto& row : report.rows) row[4] = fit.slope;
    report.metadata["fit_rms_residual"] = format_number(fit.rms_residual);
  } catch (const NonPositiveData&) {
    report.warnings.push_back("slope fit skipped: not enough positive errors");
  }
  report.metadata["points_per_dim"] = std::to_string(points);
  report.metadata["dims"] = std::to_string(p.tensor.num_modes());
  report.metadata["summability_rate"] = format_number(cert.rate);
  return report;
}

ConvergenceReport penalty_lambda_study(
    const std::function<PenaltyProblem(double)>& make_problem,
    const std::vector<double>& lambda_mins, const std::vector<int>& n_list,
    const MixedStudyOptions& opts) {
  if (lambda_mins.empty() || n_list.empty())
    throw ValidationFailure("the lambda study needs lambda values and set sizes");
  ConvergenceReport report;
  report.scenario = "penalty";
  report.columns = {"lambda_min", "N", "error_u", "error_p"};

  const double lmax = *std::max_element(lambda_mins.begin(), lambda_mins.end());
  const PenaltyProblem pmax = make_problem(lmax);
  const PenaltyThresholds th = penalty_thresholds(pmax, opts.kappa0);
  report.metadata["c0"] = format_number(th.c0);
  report.metadata["c7"] = format_number(th.c7);
  report.metadata["theta1"] = format_number(th.theta1);
  report.metadata["theta2"] = format_number(th.theta2);

  const int M = pmax.lame.num_modes();
  std::vector<double> gamma(static_cast<std::size_t>(M), 0.0),
      delta(static_cast<std::size_t>(M), 0.0);
  for (std::size_t m = 0; m < pmax.lame.mu_modes.size(); ++m) gamma[m] = pmax.lame.mu_modes[m].bound;
  for (std::size_t m = 0; m < pmax.lame.lambda_modes.size(); ++m)
    delta[m] = pmax.lame.lambda_modes[m].bound;
  BoundSequence seq;
  try {
    IncompressibleConstants ic;
    ic.gamma = gamma;
    ic.delta = delta;
    ic.mu_min = pmax.lame.mu_min();
    ic.mu_max = pmax.lame.mu_max();
    ic.lambda_min = pmax.lame.lambda_min();
    ic.lambda_bar_min = pmax.lame.lambdabar_min;
    ic.c0 = th.c0;
    ic.c7 = th.c7;
    ic.kappa0 = opts.kappa0;
    seq = make_bound_sequence(ic);
    report.metadata["selection"] = "incompressible";
  } catch (const InvalidConstants&) {
    const AffineElasticTensor aff = pmax.lame.to_affine();
    DisplacementConstants dc;
    dc.alpha = aff.alpha();
    for (const TensorMode& mode : aff.modes) dc.beta.push_back(mode.beta);
    seq = make_bound_sequence(dc);
    report.metadata["selection"] = "displacement";
    report.warnings.push_back(
        "index selection fell back to the affine-view bounds: the robustness threshold "
        "rejects the incompressible ones at the largest lambda");
  }

  std::vector<IndexSet> sets;
  int max_order = 0;
  for (const int n : n_list) {
    std::vector<std::string> warn;
    sets.push_back(best_n_indices(seq, n, &warn));
    for (auto& w : warn) report.warnings.push_back(std::move(w));
    max_order = std::max(max_order, max_order_in_any_dim(sets.back()));
  }
  const int points = opts.points_per_dim > 0 ? opts.points_per_dim : max_order + 2;

  for (const double lam : lambda_mins) {
    const PenaltyProblem prob = make_problem(lam);
    const PenaltySpaces sp = penalty_spaces(prob);
    const SpMat Kh1 = assemble_grad_stiffness(sp.vspace);
    const SpMat Mq = assemble_mass(sp.qspace);
    const ZQuadrature grid = tensor_gauss(prob.lame.num_modes(), points, 50000);
    std::vector<Eigen::VectorXd> ref_u, ref_p;
    for (int q = 0; q < grid.size(); ++q) {
      ParamPoint zp;
      zp.z = grid.nodes[q];
      PenaltySolution at = solve_penalty_at_z(prob, zp, opts.penalty_form);
      ref_u.push_back(std::move(at.u));
      ref_p.push_back(std::move(at.p));
    }
    for (std::size_t k = 0; k < sets.size(); ++k) {
      const PenaltyExpansion gal = solve_penalty_galerkin(prob, sets[k], opts.penalty_form,
                                                          opts.galerkin_points, opts.kappa0);
      for (const auto& w : gal.u.warnings) report.warnings.push_back(w);
      double eu2 = 0.0, ep2 = 0.0;
      for (int q = 0; q < grid.size(); ++q) {
        const Eigen::VectorXd du = ref_u[static_cast<std::size_t>(q)] -
                                   gal.u.evaluate(grid.nodes[q]);
        const Eigen::VectorXd dp = ref_p[static_cast<std::size_t>(q)] -
                                   gal.p.evaluate(grid.nodes[q]);
        eu2 += grid.weights[q] * du.dot(Kh1 * du);
        ep2 += grid.weights[q] * dp.dot(Mq * dp);
      }
      report.add_row({lam, static_cast<double>(n_list[k]), std::sqrt(std::max(eu2, 0.0)),
                      std::sqrt(std::max(ep2, 0.0))});
    }
  }
  report.metadata["points_per_dim"] = std::to_string(points);
  return report;
}

}  // namespace pmel
