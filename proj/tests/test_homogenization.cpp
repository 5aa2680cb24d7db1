// Cell problems, effective tensors, reiterated limits, the incompressible
// cell system, and two-scale correctors.  Oracles: closed-form harmonic means
// in 1d (exact at the discrete level when quadratures match), the classical
// laminate formula for layered media evaluated by plain 1d quadrature, and
// constant-coefficient closed forms.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "pmel/assembly.hpp"
#include "pmel/errors.hpp"
#include "pmel/homogenization.hpp"
#include "pmel/norms.hpp"
#include "pmel/quadrature.hpp"
#include "pmel/solve.hpp"

using namespace pmel;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Laminate formula for a coefficient depending on y1 only: the traction slots
// (normal column of the stress) are constant across layers, the in-plane
// strain slot is constant, and all means reduce to 1d integrals.
Eigen::Matrix3d laminate_oracle(const std::function<Eigen::Matrix3d(double)>& A) {
  Eigen::Matrix2d ipp = Eigen::Matrix2d::Zero();
  Eigen::Vector2d ip1 = Eigen::Vector2d::Zero();
  Eigen::RowVector2d i1p = Eigen::RowVector2d::Zero();
  double i11 = 0.0;
  const Quad1 rule = gauss_legendre_01(4);
  const int cells = 128;
  const double h = 1.0 / cells;
  for (int c = 0; c < cells; ++c) {
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const double w = h * rule.w[q];
      const Eigen::Matrix3d a = A((c + rule.x[q]) * h);
      Eigen::Matrix2d app;
      app << a(0, 0), a(0, 2), a(2, 0), a(2, 2);
      const Eigen::Vector2d ap1(a(0, 1), a(2, 1));
      const Eigen::RowVector2d a1p(a(1, 0), a(1, 2));
      const Eigen::Matrix2d ai = app.inverse();
      ipp += w * ai;
      ip1 += w * ai * ap1;
      i1p += w * a1p * ai;
      i11 += w * (a(1, 1) - a1p * ai * ap1);
    }
  }
  const Eigen::Matrix2d g = ipp.inverse();
  Eigen::Matrix3d a0;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector2d ep = Eigen::Vector2d::Zero();
    double e1 = 0.0;
    if (k == 1) e1 = 1.0;
    if (k == 0) ep[0] = 1.0;
    if (k == 2) ep[1] = 1.0;
    const Eigen::Vector2d t = g * (ep + ip1 * e1);
    const double s1 = i1p * t + i11 * e1;
    a0(0, k) = t[0];
    a0(1, k) = s1;
    a0(2, k) = t[1];
  }
  return a0;
}

SymTensor4 smooth_periodic_tensor(const Point& y) {
  const double mu = 1.0 + 0.4 * std::cos(2.0 * kPi * y[0]) * std::cos(2.0 * kPi * y[1]);
  const double lambda = 0.9 + 0.3 * std::sin(2.0 * kPi * y[0]);
  return SymTensor4::isotropic(2, mu, lambda);
}

}  // namespace

TEST_CASE("constant coefficients leave the unit strains uncorrected") {
  const SymTensor4 a = SymTensor4::isotropic(2, 1.3, 0.7);
  const Mesh ymesh = make_mesh(2, 8);
  const auto result = homogenize([&](const Point&) { return a; }, ymesh);
  for (const auto& n : result.cells.n_fields) CHECK(n.norm() < 1e-10);
  CHECK((result.a0.voigt() - a.voigt()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("1d effective coefficient is the harmonic mean") {
  const auto a_of = [](double y) { return 2.0 + std::cos(2.0 * kPi * y); };
  const TensorCoefficient a_y = [&](const Point& y) {
    return SymTensor4::from_voigt(1, Eigen::MatrixXd::Constant(1, 1, a_of(y[0])));
  };
  const Mesh ymesh = make_mesh(1, 128);
  CellOptions opts;
  opts.assembly.quad_degree = 4;  // match the effective-tensor quadrature
  opts.quad_degree = 4;
  const auto result = homogenize(a_y, ymesh, opts);
  const double a0 = result.a0.voigt()(0, 0);

  // Exact discrete identity: harmonic mean of the per-cell quadrature
  // averages of a (same 3-point rule as the assembly).
  const Quad1 rule = gauss_legendre_01(3);
  double inv_sum = 0.0;
  for (int c = 0; c < ymesh.ncells(); ++c) {
    double cell_avg = 0.0;
    for (std::size_t q = 0; q < rule.x.size(); ++q)
      cell_avg += rule.w[q] * a_of((c + rule.x[q]) * ymesh.h);
    inv_sum += ymesh.h / cell_avg;
  }
  CHECK(a0 == doctest::Approx(1.0 / inv_sum).epsilon(1e-12));

  // Continuum limit: harmonic mean of 2 + cos(2 pi y) is sqrt(3).
  CHECK(std::abs(a0 - std::sqrt(3.0)) < 2e-4);

  // And it tightens under refinement.
  CellOptions coarse_opts = opts;
  const auto coarse = homogenize(a_y, make_mesh(1, 32), coarse_opts);
  CHECK(std::abs(a0 - std::sqrt(3.0)) <
        std::abs(coarse.a0.voigt()(0, 0) - std::sqrt(3.0)));
}

TEST_CASE("layered media match the laminate formula and stay layered") {
  const auto tensor_of_y1 = [](double y1) {
    const double mu = 1.0 + 0.5 * std::sin(2.0 * kPi * y1);
    const double lambda = 0.8 + 0.4 * std::cos(2.0 * kPi * y1);
    return SymTensor4::isotropic(2, mu, lambda);
  };
  const TensorCoefficient a_y = [&](const Point& y) { return tensor_of_y1(y[0]); };

  const Eigen::Matrix3d oracle =
      laminate_oracle([&](double y1) -> Eigen::Matrix3d { return tensor_of_y1(y1).voigt(); });
  // The oracle reproduces a constant tensor exactly.
  const Eigen::Matrix3d flat = laminate_oracle(
      [](double) -> Eigen::Matrix3d { return SymTensor4::isotropic(2, 1.3, 0.7).voigt(); });
  CHECK((flat - SymTensor4::isotropic(2, 1.3, 0.7).voigt()).cwiseAbs().maxCoeff() < 1e-12);

  const auto fine = homogenize(a_y, make_mesh(2, 32));
  const auto coarse = homogenize(a_y, make_mesh(2, 16));
  const double err_fine = (fine.a0.voigt() - oracle).cwiseAbs().maxCoeff();
  const double err_coarse = (coarse.a0.voigt() - oracle).cwiseAbs().maxCoeff();
  CHECK(err_fine < 6e-3);
  CHECK(err_fine < err_coarse);

  // Correctors inherit the layering: invariant under shifts in y2.
  const FeSpace& base = fine.cells.space.base;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int trial = 0; trial < 20; ++trial) {
    const double y1 = unif(rng);
    const Point p(y1, unif(rng)), q(y1, unif(rng));
    for (const auto& n : fine.cells.n_fields) {
      const Eigen::VectorXd dv = evaluate_field(base, n, p) - evaluate_field(base, n, q);
      CHECK(dv.cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("effective tensors sit between the harmonic and arithmetic means") {
  const Mesh ymesh = make_mesh(2, 16);
  const auto result = homogenize(smooth_periodic_tensor, ymesh);
  const SymTensor4 arith = mean_tensor(smooth_periodic_tensor, ymesh, 4);
  const SymTensor4 harm_inv = mean_tensor(
      [](const Point& y) { return smooth_periodic_tensor(y).inverse(); }, ymesh, 4);
  const Eigen::MatrixXd harm = harm_inv.voigt().inverse();

  const double scale = arith.voigt().cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> upper(arith.voigt() - result.a0.voigt());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lower(result.a0.voigt() - harm);
  CHECK(upper.eigenvalues().minCoeff() > -1e-8 * scale);
  CHECK(lower.eigenvalues().minCoeff() > -1e-3 * scale);  // quadrature-level slack

  // Ellipticity never drops below the pointwise floor 2 min(mu) = 1.2.
  CHECK(result.a0.min_eigenvalue() > 1.2 - 1e-8);
}

TEST_CASE("cell responses are linear in the driving strain") {
  const Mesh ymesh = make_mesh(2, 8);
  const auto cells = solve_cell_problems(smooth_periodic_tensor, ymesh);
  const PeriodicFeSpace& W = cells.space;

  // Re-solve directly for a combined strain and compare with the slot mix.
  Eigen::VectorXd mix(3);
  mix << 0.3, -1.1, 0.5;
  const SpMat K = fold_periodic(assemble_elastic(W.base, smooth_periodic_tensor), W);
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < W.mean_rows.rows(); ++i)
    for (int j = 0; j < W.mean_rows.cols(); ++j)
      if (W.mean_rows(i, j) != 0.0) trip.emplace_back(i, j, W.mean_rows(i, j));
  SpMat C(W.mean_rows.rows(), W.mean_rows.cols());
  C.setFromTriplets(trip.begin(), trip.end());
  LinearSystem sys;
  sys.nblocks = 2;
  sys.A = K;
  sys.B01 = SpMat(C.transpose());
  sys.B10 = C;
  sys.saddle = true;
  sys.rhs1 = Eigen::VectorXd::Zero(C.rows());
  sys.rhs0 = -fold_vector(
      assemble_strain_load(
          W.base,
          [&](const Point& y) -> Eigen::VectorXd { return smooth_periodic_tensor(y).voigt() * mix; }),
      W);
  const Eigen::VectorXd combined = unfold_vector(solve_saddle(sys).first, W);

  Eigen::VectorXd mixed = Eigen::VectorXd::Zero(W.base.ndof());
  for (int s = 0; s < 3; ++s) mixed += mix[s] * cells.n_fields[s];
  CHECK((combined - mixed).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, mixed.cwiseAbs().maxCoeff()));
}

TEST_CASE("reiterated limits: single scale, separable scales, frozen scales, budget") {
  // One level reproduces the plain midpoint homogenization.
  const TensorCoefficient layered_1d = [](const Point& y) {
    return SymTensor4::from_voigt(
        1, Eigen::MatrixXd::Constant(1, 1, 2.0 + std::cos(2.0 * kPi * y[0])));
  };
  ReiteratedConfig cfg;
  cfg.mesh_n = {128};
  const SymTensor4 one_level = reiterated_homogenize(
      1, 1, [&](const std::vector<Point>& ys) { return layered_1d(ys[0]); }, cfg);
  CellOptions mid;
  mid.assembly.mode = CoefficientMode::midpoint;
  const auto direct = homogenize(layered_1d, make_mesh(1, 128), mid);
  CHECK(std::abs(one_level.voigt()(0, 0) - direct.a0.voigt()(0, 0)) < 1e-12);

  // Separable two-scale 1d product: harmonic means multiply.
  cfg.mesh_n = {128, 128};
  const SymTensor4 two_level = reiterated_homogenize(
      1, 2,
      [&](const std::vector<Point>& ys) {
        const double v =
            (2.0 + std::cos(2.0 * kPi * ys[0][0])) * (3.0 + std::cos(2.0 * kPi * ys[1][0]));
        return SymTensor4::from_voigt(1, Eigen::MatrixXd::Constant(1, 1, v));
      },
      cfg);
  CHECK(std::abs(two_level.voigt()(0, 0) - std::sqrt(3.0) * 2.0 * std::sqrt(2.0)) < 4e-3);

  // A microstructure blind to the faster scale collapses to one level.
  ReiteratedConfig cfg2;
  cfg2.mesh_n = {8, 4};
  const SymTensor4 frozen = reiterated_homogenize(
      2, 2,
      [](const std::vector<Point>& ys) {
        const double mu = 1.0 + 0.5 * std::sin(2.0 * kPi * ys[0][0]);
        return SymTensor4::isotropic(2, mu, 0.6);
      },
      cfg2);
  CellOptions mid2;
  mid2.assembly.mode = CoefficientMode::midpoint;
  const auto single = homogenize(
      [](const Point& y) {
        const double mu = 1.0 + 0.5 * std::sin(2.0 * kPi * y[0]);
        return SymTensor4::isotropic(2, mu, 0.6);
      },
      make_mesh(2, 8), mid2);
  CHECK((frozen.voigt() - single.a0.voigt()).cwiseAbs().maxCoeff() < 1e-8);

  ReiteratedConfig tiny;
  tiny.mesh_n = {8, 4};
  tiny.budget = 10;
  CHECK_THROWS_AS(reiterated_homogenize(
                      2, 2,
                      [](const std::vector<Point>&) { return SymTensor4::isotropic(2, 1.0, 0.0); },
                      tiny),
                  BudgetExceeded);
  CHECK_THROWS_AS(reiterated_homogenize(
                      2, 2,
                      [](const std::vector<Point>&) { return SymTensor4::isotropic(2, 1.0, 0.0); },
                      ReiteratedConfig{}),
                  ValidationFailure);
}

TEST_CASE("incompressible cell: constant closed form and pressure recovery") {
  const double mu = 1.5, lambda = 7.0;
  const Mesh ymesh = make_mesh(2, 8);
  const auto result = solve_incompressible_cell([&](const Point&) { return mu; },
                                                [&](const Point&) { return lambda; }, ymesh);
  for (const auto& n : result.cells.n_fields) CHECK(n.norm() < 1e-9);
  // Pressures are lambda times the trace of the driving slot strain.
  for (int s = 0; s < 3; ++s) {
    const double trace = (s < 2) ? 1.0 : 0.0;
    CHECK((result.cells.p_fields[s].array() - lambda * trace).abs().maxCoeff() < 1e-8);
  }
  Eigen::VectorXd lam0(3);
  lam0 << lambda, lambda, 0.0;
  CHECK((result.lambda0 - lam0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((result.mu0 - 2.0 * mu * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((result.a0.voigt() - SymTensor4::isotropic(2, mu, lambda).voigt()).cwiseAbs().maxCoeff() <
        1e-8);

  // Pressure recovery identity on a variable microstructure: per pressure
  // dof, int div N + tr(E_s) vol = int p / lambda.
  const ScalarCoefficient mu_y = [](const Point& y) {
    return 1.0 + 0.4 * std::cos(2.0 * kPi * y[0]) * std::cos(2.0 * kPi * y[1]);
  };
  const ScalarCoefficient lam_y = [](const Point& y) {
    return 50.0 * (1.0 + 0.3 * std::cos(2.0 * kPi * y[0]));
  };
  const auto varying = solve_incompressible_cell(mu_y, lam_y, ymesh);
  const SpMat B = assemble_div_coupling(varying.cells.space.base, varying.cells.pspace);
  const SpMat Ml = assemble_weighted_mass(
      varying.cells.pspace, [&](const Point& y) { return 1.0 / lam_y(y); });
  for (int s = 0; s < 3; ++s) {
    const double trace = (s < 2) ? 1.0 : 0.0;
    const Eigen::VectorXd lhs = B * varying.cells.n_fields[s] +
                                trace * ymesh.cell_volume() *
                                    Eigen::VectorXd::Ones(varying.cells.pspace.ndof());
    const Eigen::VectorXd rhs = Ml * varying.cells.p_fields[s];
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("incompressible cell: lambda robustness and cross-route agreement") {
  const ScalarCoefficient mu_y = [](const Point& y) {
    return 1.0 + 0.4 * std::cos(2.0 * kPi * y[0]) * std::cos(2.0 * kPi * y[1]);
  };
  std::vector<double> norms;
  for (const double lam_bar : {1e2, 1e4, 1e6}) {
    const auto r = solve_incompressible_cell(
        mu_y, [&](const Point& y) { return lam_bar * (1.0 + 0.3 * std::cos(2.0 * kPi * y[0])); },
        make_mesh(2, 8));
    double total = 0.0;
    for (const auto& n : r.cells.n_fields) total += n.norm();
    norms.push_back(total);
  }
  for (const double v : norms) {
    CHECK(v < 1.1 * norms[0]);
    CHECK(v > 0.9 * norms[0]);
  }

  // At moderate lambda the split route agrees with the full-tensor route.
  const ScalarCoefficient lam_y = [](const Point& y) {
    return 10.0 * (1.0 + 0.3 * std::cos(2.0 * kPi * y[0]));
  };
  const TensorCoefficient full = [&](const Point& y) {
    return SymTensor4::isotropic(2, mu_y(y), lam_y(y));
  };
  double prev_err = 1e300;
  for (const int n : {8, 16}) {
    const auto split = solve_incompressible_cell(mu_y, lam_y, make_mesh(2, n));
    CellOptions p2;
    p2.order = 2;
    const auto fullroute = homogenize(full, make_mesh(2, n), p2);
    const double err = (split.a0.voigt() - fullroute.a0.voigt()).cwiseAbs().maxCoeff() /
                       fullroute.a0.voigt().cwiseAbs().maxCoeff();
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 2e-2);
}

TEST_CASE("strain evaluators and two-scale correctors") {
  const Mesh dmesh = make_mesh(2, 8);

  // Order-1 nodal averaging reproduces constant strains exactly.
  const FeSpace v1 = make_space(dmesh, 1, Arity::vectord);
  const Eigen::VectorXd lin = interpolate(v1, [](const Point& x) {
    return Eigen::Vector2d(0.7 * x[0] + 0.2 * x[1], -0.4 * x[0] + 1.1 * x[1]);
  });
  const auto strain1 = strain_evaluator(v1, lin);
  Eigen::VectorXd expected(3);
  expected << 0.7, 1.1, (0.2 - 0.4) / std::sqrt(2.0);
  for (const Point& x : {Point(0.33, 0.41), Point(0.91, 0.07), Point(0.5, 0.5)})
    CHECK((strain1(x) - expected).cwiseAbs().maxCoeff() < 1e-12);

  // Order-2 fields evaluate their exact pointwise strain.
  const FeSpace v2 = make_space(dmesh, 2, Arity::vectord);
  const Eigen::VectorXd quad = interpolate(v2, [](const Point& x) {
    return Eigen::Vector2d(x[0] * x[0] + 0.5 * x[1], x[0] * x[1]);
  });
  const auto strain2 = strain_evaluator(v2, quad);
  const Point probe(0.37, 0.61);
  Eigen::VectorXd exact(3);
  exact << 2.0 * probe[0], probe[0], (0.5 + probe[1]) / std::sqrt(2.0);
  CHECK((strain2(probe) - exact).cwiseAbs().maxCoeff() < 1e-11);

  // With constant coefficients the corrector collapses to u0.
  const auto cells = solve_cell_problems(
      [](const Point&) { return SymTensor4::isotropic(2, 1.0, 1.0); }, make_mesh(2, 8));
  const auto corr = two_scale_corrector(v2, quad, cells, 1.0 / 4.0);
  for (const Point& x : {Point(0.3, 0.4), Point(0.81, 0.13)})
    CHECK((corr(x) - evaluate_field(v2, quad, x)).cwiseAbs().maxCoeff() < 1e-9);

  // General case: the corrector follows its defining formula.
  const auto vcells = solve_cell_problems(smooth_periodic_tensor, make_mesh(2, 16));
  const double eps = 1.0 / 8.0;
  const auto corr2 = two_scale_corrector(v2, quad, vcells, eps);
  for (const Point& x : {Point(0.21, 0.66), Point(0.94, 0.37)}) {
    Eigen::VectorXd manual = evaluate_field(v2, quad, x);
    const Eigen::VectorXd e = strain2(x);
    const Point y = unit_cell_point(x, eps);
    for (int s = 0; s < 3; ++s)
      manual += (eps * e[s]) * evaluate_field(vcells.space.base, vcells.n_fields[s], y);
    CHECK((corr2(x) - manual).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(two_scale_corrector(v2, quad, vcells, 0.0), ValidationFailure);

  // Incompressible corrector: constant coefficients give pressure
  // lambda * div(u0) pointwise.
  const double lam = 40.0;
  const auto inc = solve_incompressible_cell([](const Point&) { return 1.0; },
                                             [&](const Point&) { return lam; }, make_mesh(2, 8));
  const auto [disp, press] = incompressible_corrector(v2, quad, inc, 1.0 / 4.0);
  const Point xp(0.43, 0.27);
  const double div_u0 = 2.0 * xp[0] + xp[0];
  CHECK(std::abs(press(xp) - lam * div_u0) < 1e-7 * lam);
  CHECK((disp(xp) - evaluate_field(v2, quad, xp)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("unit cell points and homogenized solves") {
  CHECK((unit_cell_point(Point(0.55, 0.3), 0.25) - Point(0.2, 0.2)).norm() < 1e-12);
  CHECK((unit_cell_point(Point(-0.1, 1.0), 0.5) - Point(0.8, 0.0)).norm() < 1e-12);

  // The effective solve agrees with a directly assembled reference.
  const Mesh dmesh = make_mesh(2, 8);
  const FeSpace space = make_space(dmesh, 1, Arity::vectord, DirichletTag::all);
  const SymTensor4 a0 = SymTensor4::isotropic(2, 1.0, 0.5);
  const VectorField f = [](const Point& x) {
    return Eigen::Vector2d(std::sin(kPi * x[0]), x[1]);
  };
  const Eigen::VectorXd u = solve_homogenized(space, a0, f);
  const SpMat K = restrict_matrix(assemble_elastic(space, [&](const Point&) { return a0; }), space);
  const Eigen::VectorXd rhs = restrict_vector(assemble_load(space, f), space);
  const Eigen::VectorXd ref = prolong_vector(solve_spd(K, rhs), space);
  CHECK((u - ref).cwiseAbs().maxCoeff() < 1e-12);
  // Force balance: total load is carried by the clamped boundary.
  CHECK(u.cwiseAbs().maxCoeff() > 1e-3);
}
