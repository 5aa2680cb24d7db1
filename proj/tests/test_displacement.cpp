// Parameter-point solves, the coupled two-scale system, Legendre projection,
// and the coupled Galerkin method over sparse index sets.  Oracles: exact
// rational parameter dependence for single-mode scalings, the closed-form
// homogenized limit in one dimension, block-elimination identities for the
// two-scale system, and independent scalar quadrature cross-checks.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "pmel/assembly.hpp"
#include "pmel/bounds.hpp"
#include "pmel/cell_geometry.hpp"
#include "pmel/displacement.hpp"
#include "pmel/errors.hpp"
#include "pmel/homogenization.hpp"
#include "pmel/norms.hpp"
#include "pmel/quadrature.hpp"
#include "pmel/solve.hpp"

using namespace pmel;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Constant isotropic mean with modes that scale it: a(z) = (1 + sum s_m z_m) abar.
AffineElasticTensor scaled_family(double mu, double lambda, const std::vector<double>& scales,
                                  double kappa) {
  AffineElasticTensor t;
  t.d = 2;
  const SymTensor4 base = SymTensor4::isotropic(2, mu, lambda);
  t.abar = [base](const Point&, const Point&) { return base; };
  t.alpha0 = 2.0 * mu;
  t.beta0 = 2.0 * mu + 2.0 * lambda;
  for (const double s : scales) {
    TensorMode mode;
    mode.psi = [base, s](const Point&, const Point&) { return base.scaled(s); };
    mode.beta = std::abs(s) * t.beta0;
    t.modes.push_back(std::move(mode));
  }
  t.kappa = kappa;
  return t;
}

DisplacementProblem square_problem(AffineElasticTensor tensor, int mesh_n) {
  DisplacementProblem p;
  p.tensor = std::move(tensor);
  p.f = [](const Point&) { return Eigen::Vector2d(1.0, -0.5); };
  p.mesh_n = mesh_n;
  return p;
}

Eigen::VectorXd direct_solve(const DisplacementProblem& p, const TensorCoefficient& a) {
  const FeSpace space = displacement_space(p);
  const SpMat K = restrict_matrix(assemble_elastic(space, a), space);
  const Eigen::VectorXd rhs = restrict_vector(assemble_load(space, p.f), space);
  return prolong_vector(solve_spd(K, rhs), space);
}

}  // namespace

TEST_CASE("constant families scale solutions exactly in the parameter") {
  DisplacementProblem p = square_problem(scaled_family(1.0, 0.5, {0.3}, 1.0), 8);
  const Eigen::VectorXd u0 = solve_displacement_at_z(p, ParamPoint::zero(1));
  const SymTensor4 base = SymTensor4::isotropic(2, 1.0, 0.5);
  const Eigen::VectorXd ref = direct_solve(p, [&](const Point&) { return base; });
  CHECK((u0 - ref).norm() <= 1e-10 * ref.norm());

  // a(z) = (1 + 0.3 z) abar, so u(z) = u(0) / (1 + 0.3 z).
  for (const double z : {0.7, -1.0, 0.25}) {
    const Eigen::VectorXd uz = solve_displacement_at_z(p, ParamPoint::of({z}));
    CHECK((uz * (1.0 + 0.3 * z) - u0).norm() <= 1e-9 * u0.norm());
  }

  // Uniform stability: the gradient norm varies over a 33-point parameter
  // grid by less than the contrast beta/alpha.
  const FeSpace space = displacement_space(p);
  const SpMat Kgrad = assemble_grad_stiffness(space);
  const ZQuadrature grid = tensor_gauss(1, 33);
  double lo = 1e300, hi = 0.0;
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    const Eigen::VectorXd u = solve_displacement_at_z(p, zp);
    const double nrm = std::sqrt(u.dot(Kgrad * u));
    lo = std::min(lo, nrm);
    hi = std::max(hi, nrm);
  }
  CHECK(hi / lo - 1.0 < p.tensor.beta() / p.tensor.alpha());

  // One analytic parameter dimension: degree-graded sets converge at least
  // geometrically.
  const ZQuadrature zref = tensor_gauss(1, 8);
  std::vector<Eigen::VectorXd> refs;
  for (int q = 0; q < zref.size(); ++q) {
    ParamPoint zp;
    zp.z = zref.nodes[q];
    refs.push_back(solve_displacement_at_z(p, zp));
  }
  std::vector<double> errs;
  std::vector<MultiIndex> members;
  members.push_back(MultiIndex::zero());
  for (int k = 0; k <= 3; ++k) {
    if (k > 0) members.push_back(MultiIndex::unit(1, k));
    const GpcExpansion gal = solve_semidiscrete_galerkin(p, IndexSet(members));
    double err2 = 0.0;
    for (int q = 0; q < zref.size(); ++q) {
      const Eigen::VectorXd diff = refs[static_cast<std::size_t>(q)] -
                                   gal.evaluate(zref.nodes[q]);
      err2 += zref.weights[q] * diff.dot(Kgrad * diff);
    }
    errs.push_back(std::sqrt(err2));
  }
  for (std::size_t k = 1; k < errs.size(); ++k) CHECK(errs[k] < 0.4 * errs[k - 1]);
}

TEST_CASE("oscillatory solves approach the one-dimensional homogenized limit") {
  // a(y) = 2 + cos(2 pi y): harmonic mean sqrt(3), so with f = 1 and clamped
  // ends the limit is u0(x) = x (1 - x) / (2 sqrt(3)).
  AffineElasticTensor t;
  t.d = 1;
  t.abar = [](const Point&, const Point& y) {
    return SymTensor4::from_voigt(
        1, Eigen::MatrixXd::Constant(1, 1, 2.0 + std::cos(2.0 * kPi * y[0])));
  };
  t.alpha0 = 1.0;
  t.beta0 = 3.0;
  DisplacementProblem p;
  p.tensor = t;
  p.f = [](const Point&) { return Eigen::VectorXd::Constant(1, 1.0); };

  const auto exact = [](const Point& x) {
    return Eigen::VectorXd::Constant(1, x[0] * (1.0 - x[0]) / (2.0 * std::sqrt(3.0)));
  };
  std::vector<double> errors;
  double exact_l2 = 1.0;
  for (const double eps : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
    p.mesh_n = static_cast<int>(std::lround(8.0 / eps));
    std::vector<std::string> warnings;
    const Eigen::VectorXd uh = solve_displacement_at_z(p, ParamPoint::zero(0), eps, &warnings);
    CHECK(warnings.empty());  // h = eps / 8 resolves the oscillation
    const FeSpace space = displacement_space(p);
    const Eigen::VectorXd diff = uh - interpolate(space, exact);
    errors.push_back(compute_norms(space, diff).l2);
    exact_l2 = compute_norms(space, interpolate(space, exact)).l2;
  }
  CHECK(errors[1] < errors[0]);
  CHECK(errors[2] < errors[1]);
  CHECK(errors[2] < 0.05 * exact_l2);

  // A mesh that cannot resolve the oscillation is flagged, not rejected.
  p.mesh_n = 16;
  std::vector<std::string> warnings;
  solve_displacement_at_z(p, ParamPoint::zero(0), 1.0 / 8.0, &warnings);
  CHECK(!warnings.empty());

  // eps <= 0 freezes the cell variable at the origin: a(x, 0) = 3.
  p.mesh_n = 32;
  const Eigen::VectorXd frozen = solve_displacement_at_z(p, ParamPoint::zero(0), 0.0);
  const FeSpace space = displacement_space(p);
  const SpMat K = restrict_matrix(
      assemble_elastic(space, [](const Point&) {
        return SymTensor4::from_voigt(1, Eigen::MatrixXd::Constant(1, 1, 3.0));
      }),
      space);
  const Eigen::VectorXd ref =
      prolong_vector(solve_spd(K, restrict_vector(assemble_load(space, p.f), space)), space);
  CHECK((frozen - ref).norm() <= 1e-10 * ref.norm());
}

TEST_CASE("two-scale system collapses when the coefficient has no cell variable") {
  AffineElasticTensor t;
  t.d = 2;
  t.abar = [](const Point& x, const Point&) {
    return SymTensor4::isotropic(2, 1.0 + 0.3 * x[0], 0.5 + 0.2 * x[1]);
  };
  t.alpha0 = 2.0;
  t.beta0 = 4.0;
  DisplacementProblem p;
  p.tensor = t;
  p.f = [](const Point&) { return Eigen::Vector2d(1.0, 0.5); };
  p.mesh_n = 8;

  TwoScaleOptions opts;
  opts.ymesh_n = 4;
  const TwoScaleField ts = solve_two_scale_homogenized_at_z(p, ParamPoint::zero(0), opts);

  CHECK(std::abs(ts.energy - ts.load_work) <= 1e-9 * std::abs(ts.energy));
  CHECK(ts.u1.cwiseAbs().maxCoeff() <= 1e-8 * ts.u0.cwiseAbs().maxCoeff());

  // With the corrector inactive the macro block is the centroid-frozen
  // stiffness, so the macro field matches a midpoint-mode assembly.
  AssemblyOptions mid;
  mid.mode = CoefficientMode::midpoint;
  const FeSpace space = displacement_space(p);
  const TensorCoefficient axy = parametric_coefficient(p, ParamPoint::zero(0), 0.0);
  const SpMat K = restrict_matrix(assemble_elastic(space, axy, mid), space);
  const Eigen::VectorXd ref =
      prolong_vector(solve_spd(K, restrict_vector(assemble_load(space, p.f), space)), space);
  CHECK((ts.u0 - ref).norm() <= 1e-8 * ref.norm());
}

TEST_CASE("two-scale corrector equals the projected cell responses") {
  const auto a_y = [](const Point& y) {
    const double mu = 1.0 + 0.4 * std::cos(2.0 * kPi * y[0]) * std::cos(2.0 * kPi * y[1]);
    const double lambda = 0.8 + 0.3 * std::sin(2.0 * kPi * y[0]);
    return SymTensor4::isotropic(2, mu, lambda);
  };
  AffineElasticTensor t;
  t.d = 2;
  t.abar = [&](const Point&, const Point& y) { return a_y(y); };
  t.alpha0 = 1.2;
  t.beta0 = 5.0;
  DisplacementProblem p;
  p.tensor = t;
  p.f = [](const Point&) { return Eigen::Vector2d(0.8, -0.4); };
  p.mesh_n = 6;

  TwoScaleOptions opts;
  opts.ymesh_n = 6;
  const TwoScaleField ts = solve_two_scale_homogenized_at_z(p, ParamPoint::zero(0), opts);
  CHECK(std::abs(ts.energy - ts.load_work) <= 1e-9 * std::abs(ts.energy));

  const PeriodicFeSpace& W = ts.yspace;
  const int d = 2, vd = 3;

  // Eliminating the corrector block by hand: u1 at macro node i must equal
  // sum_s pi_s[i] n_s, where n_s solves the mean-constrained cell problem
  // K n_s = -(strain load of slot s) and pi_s is the mass projection of the
  // macro strain slot onto the scalar profile space.
  std::vector<Eigen::VectorXd> n_fields;
  for (int s = 0; s < vd; ++s) {
    LinearSystem sys;
    sys.nblocks = 2;
    sys.A = fold_periodic(assemble_elastic(W.base, [&](const Point& y) { return a_y(y); }), W);
    sys.B10 = W.mean_rows.sparseView();
    sys.B01 = SpMat(sys.B10.transpose());
    sys.symmetric = true;
    sys.saddle = true;
    const Eigen::VectorXd load = assemble_strain_load(W.base, [&](const Point& y) {
      return Eigen::VectorXd(a_y(y).voigt().col(s));
    });
    sys.rhs0 = -fold_vector(load, W);
    sys.rhs1 = Eigen::VectorXd::Zero(W.ncomp());
    n_fields.push_back(solve_saddle(sys).first);
  }

  const FeSpace& S = ts.xscalar;
  const Mesh& dmesh = ts.xspace.mesh;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(S.nscalar, vd);
  const auto rule = reference_rule(d, 2);
  for (int c = 0; c < dmesh.ncells(); ++c) {
    const CellGeom g = cell_geometry(dmesh, c);
    for (const auto& qp : rule) {
      const BasisEval vb = eval_reference_basis(d, ts.xspace.order, qp.xhat);
      const BasisEval sb = eval_reference_basis(d, S.order, qp.xhat);
      const Eigen::VectorXd strain = local_strain(ts.xspace, ts.u0, c, g, vb);
      for (int j = 0; j < sb.nb; ++j)
        b.row(S.cell_scalar[c][j]) += (qp.w * g.detJ * sb.val[j]) * strain.transpose();
    }
  }
  const SpMat M = assemble_mass(S);
  Eigen::MatrixXd pi(S.nscalar, vd);
  for (int s = 0; s < vd; ++s) pi.col(s) = solve_spd(M, Eigen::VectorXd(b.col(s)));

  double num = 0.0, den = 0.0;
  for (int i = 0; i < S.nscalar; ++i) {
    Eigen::VectorXd predicted = Eigen::VectorXd::Zero(W.nfree);
    for (int s = 0; s < vd; ++s) predicted += pi(i, s) * n_fields[static_cast<std::size_t>(s)];
    num += (predicted - ts.u1.col(i)).squaredNorm();
    den += predicted.squaredNorm();
    CHECK((W.mean_rows * ts.u1.col(i)).cwiseAbs().maxCoeff() <= 1e-9);
  }
  CHECK(den > 1e-8);  // the corrector is genuinely active
  CHECK(std::sqrt(num) <= 1e-7 * std::sqrt(den));

  // The macro field sits near the solve with the homogenized tensor.
  const auto hom = homogenize([&](const Point& y) { return a_y(y); }, make_mesh(2, opts.ymesh_n));
  const Eigen::VectorXd uref = solve_homogenized(ts.xspace, hom.a0, p.f);
  CHECK((ts.u0 - uref).norm() <= 0.1 * uref.norm());

  // Point evaluation assembles the same nodal fields.
  const Point x(0.5, 0.5), y(0.3, 0.7);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
  for (int comp = 0; comp < 2; ++comp) {
    Eigen::VectorXd profile(S.nscalar);
    for (int i = 0; i < S.nscalar; ++i)
      profile[i] = evaluate_field(W.base, unfold_vector(ts.u1.col(i), W), y)[comp];
    expect[comp] = evaluate_field(S, profile, x)[0];
  }
  CHECK((evaluate_u1(ts, x, y) - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
}

TEST_CASE("legendre projection is exact for polynomial and rational parameter maps") {
  // Affine map handed in as a closed-form solver.
  Eigen::VectorXd w0(5), w1(5);
  w0 << 0.3, -1.2, 0.05, 2.0, -0.4;
  w1 << 1.0, 0.2, -0.7, 0.1, 0.9;
  DisplacementProblem p = square_problem(scaled_family(1.0, 0.5, {0.3}, 1.0), 4);
  IndexSet lambda(
      {MultiIndex::zero(), MultiIndex::unit(1, 1), MultiIndex::unit(1, 2)});
  const GpcExpansion affine = project_gpc(p, lambda, 3, [&](const ParamPoint& z) {
    return Eigen::VectorXd(w0 + z.z[0] * w1);
  });
  CHECK((affine.coeffs[lambda.position(MultiIndex::zero())] - w0).norm() <= 1e-13 * w0.norm());
  CHECK((affine.coeffs[lambda.position(MultiIndex::unit(1, 1))] - w1 / std::sqrt(3.0)).norm() <=
        1e-13 * w1.norm());
  CHECK(affine.coeffs[lambda.position(MultiIndex::unit(1, 2))].norm() <= 1e-13 * w1.norm());
  CHECK(affine.warnings.empty());

  // Rational map u(z) = u(0) / (1 + 0.3 z): coefficients are scalar integrals
  // int L_nu(t) / (1 + 0.3 t) dt / 2 of the mean solution, checked against an
  // independent one-dimensional quadrature of the same order.
  const Eigen::VectorXd u0 = solve_displacement_at_z(p, ParamPoint::zero(1));
  IndexSet rich({MultiIndex::zero(), MultiIndex::unit(1, 1), MultiIndex::unit(1, 2),
                 MultiIndex::unit(1, 3)});
  const int points = 24;
  const GpcExpansion proj = project_gpc(p, rich, points);
  const Quad1 rule = gauss_legendre(points);
  for (int i = 0; i < rich.size(); ++i) {
    const int order = rich[i].order_of(1);
    double integral = 0.0;
    for (std::size_t q = 0; q < rule.x.size(); ++q)
      integral +=
          0.5 * rule.w[q] * legendre_eval(order, rule.x[q]) / (1.0 + 0.3 * rule.x[q]);
    CHECK((proj.coeffs[i] - integral * u0).norm() <= 1e-10 * u0.norm());
  }

  // Too few points for the degrees in the set is flagged.
  const GpcExpansion low = project_gpc(p, rich, 2);
  CHECK(!low.warnings.empty());
}

TEST_CASE("coupled galerkin solves annihilate the projected residual") {
  AffineElasticTensor t;
  t.d = 2;
  t.abar = [](const Point&, const Point&) { return SymTensor4::isotropic(2, 1.0, 0.5); };
  t.alpha0 = 2.0;
  t.beta0 = 3.0;
  TensorMode m1;
  m1.psi = [](const Point&, const Point&) { return SymTensor4::isotropic(2, 0.2, 0.1); };
  m1.beta = 0.6;
  TensorMode m2;
  m2.psi = [](const Point& x, const Point&) {
    return SymTensor4::isotropic(2, 0.15 * std::sin(kPi * x[0]), 0.0);
  };
  m2.beta = 0.3;
  t.modes = {m1, m2};
  t.kappa = 1.0;
  DisplacementProblem p;
  p.tensor = t;
  p.f = [](const Point&) { return Eigen::Vector2d(1.0, -0.5); };
  p.mesh_n = 6;

  IndexSet lambda({MultiIndex::zero(), MultiIndex::unit(1, 1), MultiIndex::unit(2, 1),
                   MultiIndex::unit(1, 2),
                   MultiIndex::unit(1, 1).plus(2, 1)});
  const GpcExpansion gal = solve_semidiscrete_galerkin(p, lambda);
  CHECK(gal.diag_spread >= 1.0);
  CHECK(galerkin_residual(p, gal) <= 1e-10);

  // Quadrature projection of the exact map is not a Galerkin solution.
  const GpcExpansion proj = project_gpc(p, lambda, 6);
  CHECK(galerkin_residual(p, proj) > 1e-7);

  // The trivial set reproduces the mean-coefficient solve.
  IndexSet trivial({MultiIndex::zero()});
  const GpcExpansion mean = solve_semidiscrete_galerkin(p, trivial);
  const Eigen::VectorXd ref = direct_solve(p, [&](const Point& x) {
    return evaluate_tensor(p.tensor, ParamPoint::zero(2), x, Point::Zero());
  });
  CHECK((mean.coeffs[0] - ref).norm() <= 1e-10 * ref.norm());
  CHECK(galerkin_residual(p, mean) <= 1e-10);

  // Coefficient norms decay along the degree ladder.
  const double n0 = gal.coeffs[lambda.position(MultiIndex::zero())].norm();
  const double n1 = gal.coeffs[lambda.position(MultiIndex::unit(1, 1))].norm();
  const double n2 = gal.coeffs[lambda.position(MultiIndex::unit(1, 2))].norm();
  CHECK(n1 < n0);
  CHECK(n2 < n1);

  // Energy error against reference solves is monotone under set growth.
  const FeSpace space = displacement_space(p);
  std::vector<SpMat> blocks;
  blocks.push_back(restrict_matrix(
      assemble_elastic(space, [&](const Point& x) {
        return p.tensor.abar(x, Point::Zero());
      }),
      space));
  for (const TensorMode& mode : p.tensor.modes)
    blocks.push_back(restrict_matrix(
        assemble_elastic(space, [&](const Point& x) { return mode.psi(x, Point::Zero()); }),
        space));
  const ZQuadrature grid = tensor_gauss(2, 4);
  std::vector<Eigen::VectorXd> refs;
  for (int q = 0; q < grid.size(); ++q) {
    ParamPoint zp;
    zp.z = grid.nodes[q];
    refs.push_back(solve_displacement_at_z(p, zp));
  }
  const auto energy_error = [&](const IndexSet& set) {
    const GpcExpansion g = solve_semidiscrete_galerkin(p, set);
    double err = 0.0;
    for (int q = 0; q < grid.size(); ++q) {
      const Eigen::VectorXd diff =
          restrict_vector(refs[static_cast<std::size_t>(q)] - g.evaluate(grid.nodes[q]), space);
      Eigen::VectorXd Ad = blocks[0] * diff;
      for (int m = 1; m <= 2; ++m)
        Ad += grid.nodes[q][m - 1] * (blocks[static_cast<std::size_t>(m)] * diff);
      err += grid.weights[q] * diff.dot(Ad);
    }
    return std::sqrt(err);
  };
  const double e1 = energy_error(trivial);
  const double e2 = energy_error(IndexSet({MultiIndex::zero(), MultiIndex::unit(1, 1)}));
  const double e3 = energy_error(lambda);
  CHECK(e2 <= e1 + 1e-12);
  CHECK(e3 <= e2 + 1e-12);
  CHECK(e3 < 0.9 * e1);

  // Full tensor-degree sets drive the Galerkin evaluations toward the per-z
  // solves as the degree grows.
  const auto full_tensor_set = [](int deg) {
    std::vector<MultiIndex> v;
    for (int i = 0; i <= deg; ++i)
      for (int j = 0; j <= deg; ++j) {
        MultiIndex m;
        if (i > 0) m = m.plus(1, i);
        if (j > 0) m = m.plus(2, j);
        v.push_back(m);
      }
    return IndexSet(v);
  };
  std::vector<Eigen::VectorXd> probes;
  probes.push_back((Eigen::VectorXd(2) << 0.8, -0.6).finished());
  probes.push_back((Eigen::VectorXd(2) << -0.5, 0.9).finished());
  probes.push_back((Eigen::VectorXd(2) << 0.2, 0.3).finished());
  std::vector<double> gaps;
  for (int deg = 1; deg <= 3; ++deg) {
    const GpcExpansion g = solve_semidiscrete_galerkin(p, full_tensor_set(deg));
    double worst = 0.0;
    for (const auto& z : probes) {
      ParamPoint zp;
      zp.z = z;
      worst = std::max(worst,
                       (solve_displacement_at_z(p, zp) - g.evaluate(z)).norm());
    }
    gaps.push_back(worst);
  }
  CHECK(gaps[1] < gaps[0]);
  CHECK(gaps[2] < gaps[1]);
}

TEST_CASE("galerkin error study reports certified decreasing errors") {
  AffineElasticTensor t;
  t.d = 2;
  t.abar = [](const Point&, const Point&) { return SymTensor4::isotropic(2, 1.0, 0.5); };
  t.alpha0 = 2.0;
  t.beta0 = 3.0;
  for (int m = 1; m <= 4; ++m) {
    const double scale = 0.2 / (m * m * m);
    TensorMode mode;
    mode.psi = [scale, m](const Point& x, const Point&) {
      return SymTensor4::isotropic(2, scale * std::cos(kPi * m * x[0]), 0.0);
    };
    mode.beta = 2.0 * scale;
    t.modes.push_back(std::move(mode));
  }
  t.kappa = 0.5;
  DisplacementProblem p;
  p.tensor = t;
  p.f = [](const Point&) { return Eigen::Vector2d(1.0, -0.5); };
  p.mesh_n = 6;

  DisplacementConstants c;
  c.alpha = t.alpha();
  for (const TensorMode& mode : t.modes) c.beta.push_back(mode.beta);
  const BoundSequence seq = make_bound_sequence(c);

  const ConvergenceReport report = galerkin_error_study(p, seq, {1, 2, 4, 8}, {});
  REQUIRE(report.rows.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(report.rows[k].size() == 4);
  for (std::size_t k = 1; k < 4; ++k) {
    CHECK(report.rows[k][0] > report.rows[k - 1][0]);
    CHECK(report.rows[k][1] < report.rows[k - 1][1]);
    CHECK(report.rows[k][2] <= report.rows[k - 1][2]);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(report.rows[k][2] > 0.0);
    CHECK(report.rows[k][3] < -0.5);
  }
  CHECK(report.metadata.count("summability_rate") == 1);

  // A sequence without algebraic decay fails the certificate.
  AffineElasticTensor flat = scaled_family(1.0, 0.5, {0.1, 0.1, 0.1}, 1.0);
  DisplacementProblem pf = square_problem(flat, 4);
  DisplacementConstants cf;
  cf.alpha = flat.alpha();
  for (const TensorMode& mode : flat.modes) cf.beta.push_back(mode.beta);
  CHECK_THROWS_AS(galerkin_error_study(pf, make_bound_sequence(cf), {1, 2}, {}),
                  ValidationFailure);
}

TEST_CASE("guards reject mismatched sets and oversized systems") {
  DisplacementProblem p = square_problem(scaled_family(1.0, 0.5, {0.3}, 1.0), 4);
  CHECK_THROWS_AS(project_gpc(p, IndexSet({MultiIndex::unit(3, 1)}), 3),
                  DimensionMismatch);
  CHECK_THROWS_AS(project_gpc(p, IndexSet(), 3), ValidationFailure);
  CHECK_THROWS_AS(solve_semidiscrete_galerkin(p, IndexSet()), ValidationFailure);

  DisplacementProblem big = square_problem(scaled_family(1.0, 0.5, {0.3}, 1.0), 64);
  std::vector<MultiIndex> many;
  many.push_back(MultiIndex::zero());
  for (int k = 1; k < 320; ++k) many.push_back(MultiIndex::unit(1, k));
  CHECK_THROWS_AS(solve_semidiscrete_galerkin(big, IndexSet(many)), BudgetExceeded);
}
