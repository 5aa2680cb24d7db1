#include "pmel/displacement.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "pmel/cell_geometry.hpp"
#include "pmel/errors.hpp"
#include "pmel/homogenization.hpp"
#include "pmel/legendre.hpp"
#include "pmel/solve.hpp"

namespace pmel {

namespace {

int max_order_in_any_dim(const IndexSet& lambda) {
  int best = 0;
  for (const MultiIndex& nu : lambda.indices())
    for (const auto& [dim, order] : nu.support()) best = std::max(best, order);
  return best;
}

// Stiffness blocks for the mean field and every mode, restricted to free dofs.
std::vector<SpMat> restricted_mode_blocks(const DisplacementProblem& p, const FeSpace& space,
                                          double eps) {
  std::vector<SpMat> blocks;
  blocks.reserve(static_cast<std::size_t>(p.tensor.num_modes()) + 1);
  const auto freeze = [eps](const TensorField& field) -> TensorCoefficient {
    return [field, eps](const Point& x) {
      const Point y = eps > 0.0 ? unit_cell_point(x, eps) : Point(Point::Zero());
      return field(x, y);
    };
  };
  blocks.push_back(restrict_matrix(assemble_elastic(space, freeze(p.tensor.abar)), space));
  for (const TensorMode& mode : p.tensor.modes)
    blocks.push_back(restrict_matrix(assemble_elastic(space, freeze(mode.psi)), space));
  return blocks;
}

}  // namespace

FeSpace displacement_space(const DisplacementProblem& p) {
  return make_space(make_mesh(p.tensor.d, p.mesh_n), p.order, Arity::vectord, p.dirichlet);
}

TensorCoefficient parametric_coefficient(const DisplacementProblem& p, const ParamPoint& z,
                                         double eps) {
  const AffineElasticTensor& tensor = p.tensor;
  return [&tensor, z, eps](const Point& x) {
    const Point y = eps > 0.0 ? unit_cell_point(x, eps) : Point(Point::Zero());
    return evaluate_tensor(tensor, z, x, y);
  };
}

Eigen::VectorXd solve_displacement_at_z(const DisplacementProblem& p, const ParamPoint& z,
                                        double eps, std::vector<std::string>* warnings) {
  const FeSpace space = displacement_space(p);
  if (warnings && eps > 0.0 && space.mesh.h > eps / 8.0 * (1.0 + 1e-12))
    warnings->push_back("mesh step " + std::to_string(space.mesh.h) +
                        " does not resolve the oscillation: need h <= eps/8 = " +
                        std::to_string(eps / 8.0));
  const TensorCoefficient coeff = parametric_coefficient(p, z, eps);
  const SpMat K = restrict_matrix(assemble_elastic(space, coeff), space);
  const Eigen::VectorXd rhs = restrict_vector(assemble_load(space, p.f), space);
  return prolong_vector(solve_spd(K, rhs), space);
}

TwoScaleField solve_two_scale_homogenized_at_z(const DisplacementProblem& p, const ParamPoint& z,
                                               const TwoScaleOptions& opts) {
  const int d = p.tensor.d;
  const int vd = voigt_dim(d);
  TwoScaleField ts;
  const Mesh dmesh = make_mesh(d, p.mesh_n);
  const Mesh ymesh = make_mesh(d, opts.ymesh_n);
  ts.xspace = make_space(dmesh, p.order, Arity::vectord, p.dirichlet);
  ts.xscalar = make_space(dmesh, 1, Arity::scalar);
  ts.yspace = make_periodic_space(ymesh, opts.yorder, Arity::vectord);
  const FeSpace& V0 = ts.xspace;
  const FeSpace& S = ts.xscalar;
  const PeriodicFeSpace& W = ts.yspace;

  const int n0f = [&] {
    int count = 0;
    for (const int f : V0.free_index) count += (f >= 0);
    return count;
  }();
  const int nds = S.nscalar;
  const int nyf = W.nfree;
  const int nprimal = n0f + nds * nyf;
  const int nmult = nds * W.ncomp();
  if (nprimal > 200000)
    throw BudgetExceeded("two-scale system with " + std::to_string(nprimal) +
                         " primal dofs is over the desk-scale budget");

  const auto yrule = reference_rule(d, 2);
  const auto xrule = reference_rule(d, 2 * std::max(p.order, 1));
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<Eigen::Triplet<double>> ctrip;

  for (int c = 0; c < dmesh.ncells(); ++c) {
    const CellGeom gx = cell_geometry(dmesh, c);
    const Point centroid =
        d == 1 ? Point(gx.p0 + gx.J * Point(0.5, 0.0))
               : Point(gx.p0 + gx.J * Point(1.0 / 3.0, 1.0 / 3.0));
    const TensorCoefficient a_c = [&](const Point& y) {
      return evaluate_tensor(p.tensor, z, centroid, y);
    };

    // Cell-side objects at the frozen macro point: stiffness, mean stress
    // response, and the plain mean of the tensor.
    const SpMat K_c = fold_periodic(assemble_elastic(W.base, a_c), W);
    Eigen::MatrixXd R_c = Eigen::MatrixXd::Zero(vd, nyf);
    Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(vd, vd);
    for (int yc = 0; yc < ymesh.ncells(); ++yc) {
      const CellGeom gy = cell_geometry(ymesh, yc);
      for (const auto& qp : yrule) {
        const BasisEval basis = eval_reference_basis(d, W.base.order, qp.xhat);
        const Eigen::MatrixXd B = strain_columns(d, W.base.ncomp, gy, basis);
        const Eigen::MatrixXd A = a_c(gy.p0 + gy.J * qp.xhat).voigt();
        const Eigen::MatrixXd AB = (qp.w * gy.detJ) * (A * B);
        Abar += (qp.w * gy.detJ) * A;
        const auto& sids = W.base.cell_scalar[yc];
        for (int b = 0; b < basis.nb; ++b)
          for (int comp = 0; comp < W.base.ncomp; ++comp)
            R_c.col(W.free_index[W.base.dof(sids[b], comp)]) +=
                AB.col(b * W.base.ncomp + comp);
      }
    }

    // Macro-side pairings on this cell.
    const auto& vsids = V0.cell_scalar[c];
    const auto& ssids = S.cell_scalar[c];
    const int nvloc = static_cast<int>(vsids.size()) * V0.ncomp;
    const int nsloc = static_cast<int>(ssids.size());
    Eigen::MatrixXd A00 = Eigen::MatrixXd::Zero(nvloc, nvloc);
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(nsloc, nsloc);
    std::vector<Eigen::MatrixXd> pair_vs(
        static_cast<std::size_t>(nsloc), Eigen::MatrixXd::Zero(vd, nvloc));
    for (const auto& qp : xrule) {
      const BasisEval vbasis = eval_reference_basis(d, V0.order, qp.xhat);
      const BasisEval sbasis = eval_reference_basis(d, S.order, qp.xhat);
      const Eigen::MatrixXd B0 = strain_columns(d, V0.ncomp, gx, vbasis);
      const double w = qp.w * gx.detJ;
      A00 += w * (B0.transpose() * Abar * B0);
      for (int j = 0; j < nsloc; ++j) {
        pair_vs[j] += (w * sbasis.val[j]) * B0;
        for (int i = 0; i < nsloc; ++i) mass(i, j) += w * sbasis.val[i] * sbasis.val[j];
      }
    }

    // Scatter.  u1 dof (node i, cell dof l) sits at n0f + i * nyf + l.
    std::vector<int> vrows(static_cast<std::size_t>(nvloc), -1);
    for (int b = 0; b < static_cast<int>(vsids.size()); ++b)
      for (int comp = 0; comp < V0.ncomp; ++comp)
        vrows[b * V0.ncomp + comp] = V0.free_index[V0.dof(vsids[b], comp)];
    for (int a = 0; a < nvloc; ++a) {
      if (vrows[a] < 0) continue;
      for (int b = 0; b < nvloc; ++b)
        if (vrows[b] >= 0 && A00(a, b) != 0.0) trip.emplace_back(vrows[a], vrows[b], A00(a, b));
      for (int j = 0; j < nsloc; ++j) {
        const Eigen::VectorXd row = pair_vs[j].col(a).transpose() * R_c;
        const int base = n0f + ssids[j] * nyf;
        for (int l = 0; l < nyf; ++l)
          if (row[l] != 0.0) {
            trip.emplace_back(vrows[a], base + l, row[l]);
            trip.emplace_back(base + l, vrows[a], row[l]);
          }
      }
    }
    for (int i = 0; i < nsloc; ++i)
      for (int j = 0; j < nsloc; ++j) {
        const double mij = mass(i, j);
        if (mij == 0.0) continue;
        const int bi = n0f + ssids[i] * nyf;
        const int bj = n0f + ssids[j] * nyf;
        for (int k = 0; k < K_c.outerSize(); ++k)
          for (SpMat::InnerIterator it(K_c, k); it; ++it)
            trip.emplace_back(bi + it.row(), bj + it.col(), mij * it.value());
      }
  }

  // Mean-zero constraints per macro node and component.
  for (int i = 0; i < nds; ++i)
    for (int comp = 0; comp < W.ncomp(); ++comp)
      for (int l = 0; l < nyf; ++l)
        if (W.mean_rows(comp, l) != 0.0)
          ctrip.emplace_back(i * W.ncomp() + comp, n0f + i * nyf + l, W.mean_rows(comp, l));

  LinearSystem sys;
  sys.nblocks = 2;
  sys.A = SpMat(nprimal, nprimal);
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.B10 = SpMat(nmult, nprimal);
  sys.B10.setFromTriplets(ctrip.begin(), ctrip.end());
  sys.B01 = SpMat(sys.B10.transpose());
  sys.symmetric = true;
  sys.saddle = true;
  sys.rhs0 = Eigen::VectorXd::Zero(nprimal);
  sys.rhs0.head(n0f) = restrict_vector(assemble_load(V0, p.f), V0);
  sys.rhs1 = Eigen::VectorXd::Zero(nmult);

  const auto [x, mult] = solve_saddle(sys);
  ts.u0 = prolong_vector(x.head(n0f), V0);
  ts.u1.resize(nyf, nds);
  for (int i = 0; i < nds; ++i) ts.u1.col(i) = x.segment(n0f + i * nyf, nyf);
  ts.energy = x.dot(sys.A * x);
  ts.load_work = sys.rhs0.dot(x);
  return ts;
}

Eigen::VectorXd evaluate_u1(const TwoScaleField& ts, const Point& x, const Point& y) {
  const int ncomp = ts.yspace.ncomp();
  const int nds = ts.xscalar.nscalar;
  Eigen::MatrixXd at_y(ncomp, nds);
  for (int i = 0; i < nds; ++i)
    at_y.col(i) = evaluate_field(ts.yspace.base, unfold_vector(ts.u1.col(i), ts.yspace), y);
  Eigen::VectorXd out(ncomp);
  for (int comp = 0; comp < ncomp; ++comp) {
    const Eigen::VectorXd profile = at_y.row(comp).transpose();
    out[comp] = evaluate_field(ts.xscalar, profile, x)[0];
  }
  return out;
}

GpcExpansion project_gpc(const DisplacementProblem& p, const IndexSet& lambda,
                         int points_per_dim, const AtZSolver& solver) {
  const int M = p.tensor.num_modes();
  if (lambda.size() == 0) throw ValidationFailure("projection needs a nonempty index set");
  if (lambda.max_dim() > M)
    throw DimensionMismatch("index set uses dimension " + std::to_string(lambda.max_dim()) +
                            " but the tensor has " + std::to_string(M) + " modes");
  GpcExpansion out;
  out.lambda = lambda;
  const int max_order = max_order_in_any_dim(lambda);
  if (points_per_dim < max_order + 1)
    out.warnings.push_back("quadrature too low: " + std::to_string(points_per_dim) +
                           " points per dimension cannot integrate degree " +
                           std::to_string(max_order) + " exactly against itself");
  const ZQuadrature grid = tensor_gauss(M, points_per_dim);
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    const Eigen::VectorXd u = solver(zp);
    if (out.coeffs.empty())
      out.coeffs.assign(static_cast<std::size_t>(lambda.size()),
                        Eigen::VectorXd::Zero(u.size()));
    for (int i = 0; i < lambda.size(); ++i)
      out.coeffs[i] += grid.weights[q] * multi_legendre_eval(lambda[i], grid.nodes[q]) * u;
  }
  return out;
}

GpcExpansion project_gpc(const DisplacementProblem& p, const IndexSet& lambda,
                         int points_per_dim, double eps) {
  return project_gpc(p, lambda, points_per_dim, [&p, eps](const ParamPoint& z) {
    return solve_displacement_at_z(p, z, eps);
  });
}

GpcExpansion solve_semidiscrete_galerkin(const DisplacementProblem& p, const IndexSet& lambda,
                                         double eps) {
  if (lambda.size() == 0) throw ValidationFailure("Galerkin needs a nonempty index set");
  const FeSpace space = displacement_space(p);
  const int n0 = space.nfree;
  const int nsets = lambda.size();
  const long long total = static_cast<long long>(n0) * nsets;
  if (total > 2500000)
    throw BudgetExceeded("coupled Galerkin system of " + std::to_string(total) +
                         " dofs is over the desk-scale budget");
  const std::vector<SpMat> blocks = restricted_mode_blocks(p, space, eps);

  std::vector<Eigen::Triplet<double>> trip;
  const auto add_block = [&](int bi, int bj, const SpMat& A, double scale) {
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it)
        trip.emplace_back(bi * n0 + it.row(), bj * n0 + it.col(), scale * it.value());
  };
  for (int i = 0; i < nsets; ++i) {
    add_block(i, i, blocks[0], 1.0);
    const MultiIndex& nu = lambda[i];
    for (int m = 1; m <= p.tensor.num_modes(); ++m) {
      const int ord = nu.order_of(m);
      const int j = lambda.position(nu.plus(m, +1));
      if (j >= 0) {
        const double c = legendre_coupling(ord);
        add_block(i, j, blocks[static_cast<std::size_t>(m)], c);
        add_block(j, i, blocks[static_cast<std::size_t>(m)], c);
      }
    }
  }
  SpMat global(static_cast<int>(total), static_cast<int>(total));
  global.setFromTriplets(trip.begin(), trip.end());

  GpcExpansion out;
  out.lambda = lambda;
  const Eigen::VectorXd diag = global.diagonal();
  out.diag_spread = diag.maxCoeff() / std::max(diag.minCoeff(), 1e-300);
  if (out.diag_spread > 1e12)
    out.warnings.push_back("coupled system is badly conditioned: diagonal spread " +
                           std::to_string(out.diag_spread));

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total);
  const int zero_pos = lambda.position(MultiIndex::zero());
  if (zero_pos >= 0)
    rhs.segment(zero_pos * n0, n0) = restrict_vector(assemble_load(space, p.f), space);
  else
    out.warnings.push_back("index set lacks the zero index: homogeneous right-hand side");

  const Eigen::VectorXd sol = solve_spd(global, rhs);
  out.coeffs.reserve(static_cast<std::size_t>(nsets));
  for (int i = 0; i < nsets; ++i)
    out.coeffs.push_back(prolong_vector(sol.segment(i * n0, n0), space));
  return out;
}

double galerkin_residual(const DisplacementProblem& p, const GpcExpansion& u, double eps,
                         int points_per_dim) {
  const FeSpace space = displacement_space(p);
  const std::vector<SpMat> blocks = restricted_mode_blocks(p, space, eps);
  const Eigen::VectorXd F = restrict_vector(assemble_load(space, p.f), space);
  const int M = p.tensor.num_modes();
  if (points_per_dim <= 0) points_per_dim = max_order_in_any_dim(u.lambda) + 2;

  std::vector<Eigen::VectorXd> coeffs_free;
  coeffs_free.reserve(u.coeffs.size());
  for (const auto& c : u.coeffs) coeffs_free.push_back(restrict_vector(c, space));

  const ZQuadrature grid = tensor_gauss(M, points_per_dim);
  std::vector<Eigen::VectorXd> residuals(
      static_cast<std::size_t>(u.lambda.size()), Eigen::VectorXd::Zero(F.size()));
  for (int q = 0; q < grid.size(); ++q) {
    const Eigen::VectorXd& z = grid.nodes[q];
    Eigen::VectorXd uz = Eigen::VectorXd::Zero(F.size());
    for (int i = 0; i < u.lambda.size(); ++i)
      uz += multi_legendre_eval(u.lambda[i], z) * coeffs_free[i];
    Eigen::VectorXd r = F - blocks[0] * uz;
    for (int m = 1; m <= M; ++m) r -= z[m - 1] * (blocks[static_cast<std::size_t>(m)] * uz);
    for (int i = 0; i < u.lambda.size(); ++i)
      residuals[static_cast<std::size_t>(i)] +=
          grid.weights[q] * multi_legendre_eval(u.lambda[i], z) * r;
  }
  double worst = 0.0;
  const double fnorm = std::max(F.norm(), 1e-300);
  for (const auto& r : residuals) worst = std::max(worst, r.norm() / fnorm);
  return worst;
}

ConvergenceReport galerkin_error_study(const DisplacementProblem& p, const BoundSequence& seq,
                                       const std::vector<int>& n_list,
                                       const GalerkinStudyOptions& opts) {
  std::vector<double> betas;
  for (const TensorMode& mode : p.tensor.modes) betas.push_back(mode.beta);
  const SummabilityCertificate cert = summability_certificate(
      betas, opts.p_summability, p.tensor.kappa, seq.kind);
  if (!cert.ok)
    throw ValidationFailure("summability certificate failed: " + cert.detail);

  ConvergenceReport report;
  report.scenario = "displacement";
  report.columns = {"N", "error", "bound_tail", "fitted_slope"};

  // Index sets for every requested N, and the quadrature degree they need.
  std::vector<IndexSet> sets;
  int max_order = 0;
  for (const int n : n_list) {
    std::vector<std::string> warn;
    sets.push_back(best_n_indices(seq, n, &warn));
    for (auto& w : warn) report.warnings.push_back(std::move(w));
    max_order = std::max(max_order, max_order_in_any_dim(sets.back()));
  }
  const int points = opts.points_per_dim > 0 ? opts.points_per_dim : max_order + 2;

  const FeSpace space = displacement_space(p);
  const SpMat Kh1 = assemble_grad_stiffness(space);
  const ZQuadrature grid = tensor_gauss(p.tensor.num_modes(), points, 50000);
  std::vector<Eigen::VectorXd> reference;
  reference.reserve(static_cast<std::size_t>(grid.size()));
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    reference.push_back(solve_displacement_at_z(p, zp, opts.eps));
  }

  const double S = seq.sum();
  std::vector<double> xs, errs;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const GpcExpansion gal = solve_semidiscrete_galerkin(p, sets[k], opts.eps);
    for (const auto& w : gal.warnings) report.warnings.push_back(w);
    double err2 = 0.0;
    for (int q = 0; q < grid.size(); ++q) {
      const Eigen::VectorXd diff = reference[static_cast<std::size_t>(q)] -
                                   gal.evaluate(grid.nodes[q]);
      err2 += grid.weights[q] * diff.dot(Kh1 * diff);
    }
    double tail = -1.0;
    if (S < 1.0) {
      tail = 1.0 / (1.0 - S);
      for (const MultiIndex& nu : sets[k].indices()) tail -= coeff_bound(nu, seq);
      tail = std::max(tail, 0.0);
    } else {
      report.warnings.push_back("bound tail unavailable: sum of dhat >= 1");
    }
    xs.push_back(static_cast<double>(n_list[k]));
    errs.push_back(std::sqrt(std::max(err2, 0.0)));
    report.add_row({xs.back(), errs.back(), tail, 0.0});
  }
  report.sort_by_first();
  try {
    const RateFit fit = fit_rate(xs, errs);
    for (auto& row : report.rows) row[3] = fit.slope;
    report.metadata["fit_rms_residual"] = format_number(fit.rms_residual);
  } catch (const NonPositiveData&) {
    report.warnings.push_back("slope fit skipped: not enough positive errors");
  }
  report.metadata["points_per_dim"] = std::to_string(points);
  report.metadata["dims"] = std::to_string(p.tensor.num_modes());
  report.metadata["summability_rate"] = format_number(cert.rate);
  return report;
}

}  // namespace pmel
