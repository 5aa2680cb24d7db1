#include "pmel/homogenization.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "pmel/cell_geometry.hpp"
#include "pmel/errors.hpp"
#include "pmel/quadrature.hpp"
#include "pmel/solve.hpp"

namespace pmel {

namespace {

SpMat dense_to_sparse(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m.size()));
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) trip.emplace_back(i, j, m(i, j));
  SpMat out(m.rows(), m.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Eigen::VectorXd slot_unit(int vd, int s) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(vd);
  e[s] = 1.0;
  return e;
}

SymTensor4 symmetrized_from_slots(int d, const Eigen::MatrixXd& V, const char* what) {
  const double scale = std::max(V.cwiseAbs().maxCoeff(), 1e-300);
  const double skew = (V - V.transpose()).cwiseAbs().maxCoeff();
  if (skew > 1e-8 * scale)
    throw ValidationFailure(std::string(what) + " lost symmetry beyond tolerance");
  return SymTensor4::from_voigt(d, 0.5 * (V + V.transpose()));
}

}  // namespace

Point unit_cell_point(const Point& x, double eps) {
  Point y;
  for (int i = 0; i < 2; ++i) {
    const double t = x[i] / eps;
    y[i] = t - std::floor(t);
  }
  return y;
}

CellSolutionTable solve_cell_problems(const TensorCoefficient& a_y, const Mesh& ymesh,
                                      const CellOptions& opts) {
  const int d = ymesh.d;
  const int vd = voigt_dim(d);
  CellSolutionTable table;
  table.space = make_periodic_space(ymesh, opts.order, Arity::vectord);
  const PeriodicFeSpace& W = table.space;

  const SpMat K = fold_periodic(assemble_elastic(W.base, a_y, opts.assembly), W);
  const SpMat C = dense_to_sparse(W.mean_rows);

  LinearSystem sys;
  sys.nblocks = 2;
  sys.A = K;
  sys.B01 = SpMat(C.transpose());
  sys.B10 = C;
  sys.symmetric = true;
  sys.saddle = true;
  sys.rhs1 = Eigen::VectorXd::Zero(C.rows());

  const double knorm = K.norm();
  table.n_fields.reserve(vd);
  for (int s = 0; s < vd; ++s) {
    const Eigen::VectorXd unit = slot_unit(vd, s);
    const Eigen::VectorXd g = fold_vector(
        assemble_strain_load(
            W.base, [&](const Point& y) -> Eigen::VectorXd { return a_y(y).voigt() * unit; },
            opts.assembly),
        W);
    sys.rhs0 = -g;
    auto [nfold, mult] = solve_saddle(sys);
    const Eigen::VectorXd r = K * nfold + sys.B01 * mult + g;
    const double scale = std::max({g.norm(), knorm * nfold.norm(), 1e-300});
    const double rel = r.norm() / scale;
    if (rel > 1e-10)
      throw SolverBreakdown("cell problem residual " + std::to_string(rel) +
                            " exceeds 1e-10 on slot " + std::to_string(s));
    table.residual = std::max(table.residual, rel);
    table.n_fields.push_back(unfold_vector(nfold, W));
  }
  return table;
}

SymTensor4 homogenized_tensor(const TensorCoefficient& a_y, const CellSolutionTable& cells,
                              const CellOptions& opts) {
  const Mesh& mesh = cells.space.base.mesh;
  const int d = mesh.d;
  const int vd = voigt_dim(d);
  const auto rule = reference_rule(d, opts.quad_degree, opts.assembly.mode);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(vd, vd);
  Eigen::MatrixXd strains(vd, vd);
  for (int c = 0; c < mesh.ncells(); ++c) {
    const CellGeom g = cell_geometry(mesh, c);
    for (const auto& qp : rule) {
      const BasisEval basis =
          eval_reference_basis(d, cells.space.base.order, qp.xhat);
      for (int s = 0; s < vd; ++s)
        strains.col(s) = slot_unit(vd, s) +
                         local_strain(cells.space.base, cells.n_fields[s], c, g, basis);
      const Point y = g.p0 + g.J * qp.xhat;
      const Eigen::MatrixXd A = a_y(y).voigt();
      V += (qp.w * g.detJ) * (strains.transpose() * A * strains);
    }
  }
  return symmetrized_from_slots(d, V, "effective tensor");
}

HomogenizationResult homogenize(const TensorCoefficient& a_y, const Mesh& ymesh,
                                const CellOptions& opts) {
  HomogenizationResult result;
  result.cells = solve_cell_problems(a_y, ymesh, opts);
  result.a0 = homogenized_tensor(a_y, result.cells, opts);
  return result;
}

SymTensor4 mean_tensor(const TensorCoefficient& a_y, const Mesh& ymesh, int degree) {
  const int d = ymesh.d;
  const int vd = voigt_dim(d);
  const auto rule = reference_rule(d, degree, CoefficientMode::quadrature);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(vd, vd);
  for (int c = 0; c < ymesh.ncells(); ++c) {
    const CellGeom g = cell_geometry(ymesh, c);
    for (const auto& qp : rule) V += (qp.w * g.detJ) * a_y(g.p0 + g.J * qp.xhat).voigt();
  }
  return symmetrized_from_slots(d, V, "tensor average");
}

namespace {

SymTensor4 reiterated_level(int d, int level, int nscales,
                            const std::function<SymTensor4(const std::vector<Point>&)>& a,
                            const ReiteratedConfig& config, std::vector<Point>& prefix) {
  const Mesh ymesh = make_mesh(d, config.mesh_n[level]);
  CellOptions opts;
  opts.order = config.order;
  opts.assembly.mode = CoefficientMode::midpoint;
  // Midpoint sampling revisits the same centroids in every pass, and the
  // slower variables are frozen for this level, so memoizing on the point
  // keeps the recursion at one inner homogenization per cell.
  auto cache = std::make_shared<std::map<std::pair<double, double>, SymTensor4>>();
  const TensorCoefficient coeff = [&, cache](const Point& y) -> SymTensor4 {
    const std::pair<double, double> key(y[0], y[1]);
    const auto hit = cache->find(key);
    if (hit != cache->end()) return hit->second;
    prefix.push_back(y);
    SymTensor4 value = (level + 1 == nscales)
                           ? a(prefix)
                           : reiterated_level(d, level + 1, nscales, a, config, prefix);
    prefix.pop_back();
    cache->emplace(key, value);
    return value;
  };
  const CellSolutionTable cells = solve_cell_problems(coeff, ymesh, opts);
  return homogenized_tensor(coeff, cells, opts);
}

}  // namespace

SymTensor4 reiterated_homogenize(
    int d, int nscales, const std::function<SymTensor4(const std::vector<Point>&)>& a,
    const ReiteratedConfig& config) {
  if (nscales < 1) throw ValidationFailure("reiterated homogenization needs >= 1 scale");
  if (static_cast<int>(config.mesh_n.size()) != nscales)
    throw ValidationFailure("reiterated homogenization needs one mesh size per scale");
  long long work = 1;
  for (int m = 0; m < nscales; ++m) {
    const Mesh probe = make_mesh(d, config.mesh_n[m]);
    work *= probe.ncells();
    if (work > config.budget)
      throw BudgetExceeded("reiterated homogenization needs about " + std::to_string(work) +
                           " innermost coefficient evaluations, over the budget of " +
                           std::to_string(config.budget));
  }
  std::vector<Point> prefix;
  prefix.reserve(nscales);
  return reiterated_level(d, 0, nscales, a, config, prefix);
}

IncompressibleCellResult solve_incompressible_cell(const ScalarCoefficient& mu_y,
                                                   const ScalarCoefficient& lambda_y,
                                                   const Mesh& ymesh,
                                                   const IncompressibleCellOptions& opts) {
  const int d = ymesh.d;
  const int vd = voigt_dim(d);
  IncompressibleCellResult result;
  result.cells.space = make_periodic_space(ymesh, opts.vorder, Arity::vectord);
  result.cells.pspace = make_space(ymesh, 0, Arity::scalar);
  const PeriodicFeSpace& W = result.cells.space;
  const FeSpace& Q = result.cells.pspace;

  const TensorCoefficient shear = [&](const Point& y) {
    return SymTensor4::isotropic(d, mu_y(y), 0.0);
  };
  const SpMat K = fold_periodic(assemble_elastic(W.base, shear, opts.assembly), W);
  const SpMat C = dense_to_sparse(W.mean_rows);
  const SpMat B = fold_columns(assemble_div_coupling(W.base, Q, opts.assembly), W);
  const SpMat Ml = assemble_weighted_mass(
      Q, [&](const Point& y) { return 1.0 / lambda_y(y); }, opts.assembly);

  // Primal block stacks the corrector dofs with the mean multipliers.
  const int nf = W.nfree;
  const int nm = static_cast<int>(C.rows());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(K.nonZeros() + 2 * C.nonZeros()));
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < C.outerSize(); ++k)
    for (SpMat::InnerIterator it(C, k); it; ++it) {
      trip.emplace_back(nf + it.row(), it.col(), it.value());
      trip.emplace_back(it.col(), nf + it.row(), it.value());
    }
  LinearSystem sys;
  sys.nblocks = 2;
  sys.A = SpMat(nf + nm, nf + nm);
  sys.A.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  for (int k = 0; k < B.outerSize(); ++k)
    for (SpMat::InnerIterator it(B, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  sys.B10 = SpMat(B.rows(), nf + nm);
  sys.B10.setFromTriplets(trip.begin(), trip.end());
  sys.B01 = SpMat(sys.B10.transpose());
  sys.C11 = -Ml;
  sys.symmetric = true;
  sys.saddle = true;

  result.mu0 = Eigen::MatrixXd::Zero(vd, vd);
  result.lambda0 = Eigen::VectorXd::Zero(vd);
  const Eigen::VectorXd vec_identity =
      sym_to_vec(Eigen::MatrixXd::Identity(d, d));
  for (int s = 0; s < vd; ++s) {
    const Eigen::VectorXd unit = slot_unit(vd, s);
    const Eigen::VectorXd g = fold_vector(
        assemble_strain_load(
            W.base,
            [&](const Point& y) -> Eigen::VectorXd { return (2.0 * mu_y(y)) * unit; },
            opts.assembly),
        W);
    const double trace = unit.dot(vec_identity);
    Eigen::VectorXd rhs0 = Eigen::VectorXd::Zero(nf + nm);
    rhs0.head(nf) = -g;
    sys.rhs0 = rhs0;
    sys.rhs1 = -trace * assemble_load(
                            Q, [](const Point&) { return Eigen::VectorXd::Ones(1); },
                            opts.assembly);
    auto [x, p] = solve_saddle(sys);
    result.cells.n_fields.push_back(unfold_vector(x.head(nf), W));
    result.cells.p_fields.push_back(p);
  }

  // Effective coefficients from the corrected strains and cell pressures.
  const auto rule = reference_rule(d, opts.quad_degree, opts.assembly.mode);
  const Mesh& mesh = ymesh;
  for (int c = 0; c < mesh.ncells(); ++c) {
    const CellGeom g = cell_geometry(mesh, c);
    for (const auto& qp : rule) {
      const BasisEval basis = eval_reference_basis(d, opts.vorder, qp.xhat);
      const Point y = g.p0 + g.J * qp.xhat;
      const double mu = mu_y(y);
      for (int s = 0; s < vd; ++s) {
        const Eigen::VectorXd strain =
            slot_unit(vd, s) + local_strain(W.base, result.cells.n_fields[s], c, g, basis);
        result.mu0.col(s) += (2.0 * mu * qp.w * g.detJ) * strain;
      }
    }
    const double vol = mesh.cell_volume();
    for (int s = 0; s < vd; ++s)
      result.lambda0[s] += vol * result.cells.p_fields[s][Q.cell_scalar[c][0]];
  }
  const Eigen::MatrixXd V = result.mu0 + vec_identity * result.lambda0.transpose();
  result.a0 = symmetrized_from_slots(d, V, "incompressible effective tensor");
  return result;
}

Eigen::VectorXd solve_homogenized(const FeSpace& space, const TensorCoefficient& a_at,
                                  const VectorField& f) {
  const SpMat K = restrict_matrix(assemble_elastic(space, a_at), space);
  const Eigen::VectorXd rhs = restrict_vector(assemble_load(space, f), space);
  return prolong_vector(solve_spd(K, rhs), space);
}

Eigen::VectorXd solve_homogenized(const FeSpace& space, const SymTensor4& a0,
                                  const VectorField& f) {
  return solve_homogenized(
      space, [&a0](const Point&) { return a0; }, f);
}

PointFn strain_evaluator(const FeSpace& space, const Eigen::VectorXd& coeffs) {
  const int d = space.mesh.d;
  const int vd = voigt_dim(d);
  if (space.arity != Arity::vectord) throw SpaceMismatch("strains need a vector field");
  if (coeffs.size() != space.ndof()) throw DimensionMismatch("strain evaluator coefficients");
  if (space.order >= 2) {
    auto sp = std::make_shared<FeSpace>(space);
    auto co = std::make_shared<Eigen::VectorXd>(coeffs);
    return [sp, co, d, vd](const Point& x) -> Eigen::VectorXd {
      const Eigen::MatrixXd grad = evaluate_field_gradient(*sp, *co, x);
      Eigen::VectorXd e(vd);
      if (d == 1) {
        e[0] = grad(0, 0);
      } else {
        e[0] = grad(0, 0);
        e[1] = grad(1, 1);
        e[2] = (grad(0, 1) + grad(1, 0)) / std::sqrt(2.0);
      }
      return e;
    };
  }
  // Promote cellwise-constant strains to nodal values by volume averaging.
  auto nodal = std::make_shared<FeSpace>(make_space(space.mesh, 1, Arity::symtensor));
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(nodal->ndof());
  Eigen::VectorXd vols = Eigen::VectorXd::Zero(nodal->nscalar);
  const Point centroid = space.mesh.d == 1 ? Point(0.5, 0.0) : Point(1.0 / 3.0, 1.0 / 3.0);
  for (int c = 0; c < space.mesh.ncells(); ++c) {
    const CellGeom g = cell_geometry(space.mesh, c);
    const BasisEval basis = eval_reference_basis(d, space.order, centroid);
    const Eigen::VectorXd e = local_strain(space, coeffs, c, g, basis);
    const double vol = space.mesh.cell_volume();
    for (int v = 0; v < d + 1; ++v) {
      const int sid = space.mesh.cells[c][v];
      if (sid < 0) continue;
      vols[sid] += vol;
      for (int s = 0; s < vd; ++s) sums[nodal->dof(sid, s)] += vol * e[s];
    }
  }
  for (int sid = 0; sid < nodal->nscalar; ++sid)
    for (int s = 0; s < vd; ++s) sums[nodal->dof(sid, s)] /= std::max(vols[sid], 1e-300);
  auto avg = std::make_shared<Eigen::VectorXd>(std::move(sums));
  return [nodal, avg](const Point& x) -> Eigen::VectorXd {
    return evaluate_field(*nodal, *avg, x);
  };
}

PointFn two_scale_corrector(const FeSpace& u0_space, const Eigen::VectorXd& u0,
                            const CellSolutionTable& cells, double eps) {
  if (!(eps > 0.0)) throw ValidationFailure("corrector needs a positive scale");
  const int vd = voigt_dim(u0_space.mesh.d);
  if (static_cast<int>(cells.n_fields.size()) != vd)
    throw DimensionMismatch("cell table does not match the macroscopic dimension");
  auto sp = std::make_shared<FeSpace>(u0_space);
  auto co = std::make_shared<Eigen::VectorXd>(u0);
  auto table = std::make_shared<CellSolutionTable>(cells);
  PointFn strain = strain_evaluator(u0_space, u0);
  return [sp, co, table, strain, eps, vd](const Point& x) -> Eigen::VectorXd {
    Eigen::VectorXd value = evaluate_field(*sp, *co, x);
    const Point y = unit_cell_point(x, eps);
    const Eigen::VectorXd e = strain(x);
    for (int s = 0; s < vd; ++s)
      value += (eps * e[s]) * evaluate_field(table->space.base, table->n_fields[s], y);
    return value;
  };
}

std::pair<PointFn, std::function<double(const Point&)>> incompressible_corrector(
    const FeSpace& u0_space, const Eigen::VectorXd& u0,
    const IncompressibleCellResult& cell, double eps) {
  PointFn displacement = two_scale_corrector(u0_space, u0, cell.cells, eps);
  const int vd = voigt_dim(u0_space.mesh.d);
  auto table = std::make_shared<CellSolutionTable>(cell.cells);
  PointFn strain = strain_evaluator(u0_space, u0);
  auto pressure = [table, strain, eps, vd](const Point& x) -> double {
    const Point y = unit_cell_point(x, eps);
    const Eigen::VectorXd e = strain(x);
    double p = 0.0;
    for (int s = 0; s < vd; ++s)
      p += e[s] * evaluate_field(table->pspace, table->p_fields[s], y)[0];
    return p;
  };
  return {std::move(displacement), std::move(pressure)};
}

}  // namespace pmel
