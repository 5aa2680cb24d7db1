#include "pmel/tensor_fields.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pmel {

ParamPoint ParamPoint::of(std::initializer_list<double> vals) {
  ParamPoint p;
  p.z = Eigen::VectorXd(static_cast<int>(vals.size()));
  int i = 0;
  for (double v : vals) p.z[i++] = v;
  return p;
}

void ParamPoint::check_box() const {
  for (int i = 0; i < z.size(); ++i)
    if (std::abs(z[i]) > 1.0 + 1e-12)
      throw ValidationFailure("ParamPoint: |z_" + std::to_string(i + 1) +
                              "| > 1");
}

double AffineElasticTensor::sum_beta() const {
  double s = 0.0;
  for (const auto& m : modes) s += m.beta;
  return s;
}

SymTensor4 evaluate_tensor(const AffineElasticTensor& a, const ParamPoint& z,
                           const SpatialPoint& x, const SpatialPoint& y) {
  z.check_box();
  if (z.z.size() > a.num_modes())
    throw DimensionMismatch("evaluate_tensor: more z entries than modes");
  SymTensor4 t = a.abar(x, y);
  if (t.dim() != a.d) throw DimensionMismatch("evaluate_tensor: abar dim");
  for (int m = 0; m < z.z.size(); ++m) {
    if (z.z[m] == 0.0) continue;
    t = t.plus(a.modes[m].psi(x, y).scaled(z.z[m]));
  }
  return t;
}

namespace {

std::vector<SpatialPoint> sample_grid(int d, int n) {
  std::vector<SpatialPoint> pts;
  if (d == 1) {
    for (int i = 0; i < n; ++i)
      pts.push_back(SpatialPoint((i + 0.5) / n, 0.0));
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        pts.push_back(SpatialPoint((i + 0.5) / n, (j + 0.5) / n));
  }
  return pts;
}

}  // namespace

EllipticityReport validate_uniform_ellipticity(const AffineElasticTensor& a,
                                               const ValidationOptions& opt) {
  if (!a.abar) throw ValidationFailure("validate: abar not set");
  EllipticityReport rep;
  rep.sum_beta = a.sum_beta();
  rep.alpha = a.alpha0 - rep.sum_beta;
  rep.beta = a.beta0 + rep.sum_beta;
  const double denom = a.alpha0 - rep.sum_beta;
  rep.kappa_effective =
      (denom > 0.0) ? rep.sum_beta / denom
                    : std::numeric_limits<double>::infinity();

  std::ostringstream bad;
  const auto xs = sample_grid(a.d, opt.grid_n);
  const auto ys = sample_grid(a.d, opt.grid_n);
  // Stride the y grid so x-cross-y stays within the pair budget.
  const std::size_t stride = std::max<std::size_t>(
      1, xs.size() * ys.size() / std::max(1, opt.pair_cap));

  rep.observed_alpha0 = std::numeric_limits<double>::infinity();
  rep.observed_beta0 = 0.0;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    for (std::size_t yi = offset; yi < ys.size(); yi += stride) {
      const auto& y = ys[yi];
      const SymTensor4 t = a.abar(x, y);
      const double lo = t.min_eigenvalue();
      const double hi = t.op_norm();
      if (lo < rep.observed_alpha0) {
        rep.observed_alpha0 = lo;
        rep.worst_x = x;
        rep.worst_y = y;
      }
      rep.observed_beta0 = std::max(rep.observed_beta0, hi);
      for (int m = 0; m < a.num_modes(); ++m) {
        const double nm = a.modes[m].psi(x, y).op_norm();
        if (nm > a.modes[m].beta + opt.tol && bad.tellp() == 0)
          bad << "mode " << (m + 1) << " norm " << nm << " exceeds beta_m "
              << a.modes[m].beta << " at sample point";
      }
    }
    offset = (offset + 1) % stride;
  }
  if (rep.observed_alpha0 < a.alpha0 - opt.tol && bad.tellp() == 0)
    bad << "abar eigenvalue " << rep.observed_alpha0
        << " below declared alpha0 " << a.alpha0;
  if (rep.observed_beta0 > a.beta0 + opt.tol && bad.tellp() == 0)
    bad << "abar norm " << rep.observed_beta0 << " above declared beta0 "
        << a.beta0;
  const double budget = a.kappa / (1.0 + a.kappa) * a.alpha0;
  if (rep.sum_beta > budget + opt.tol && bad.tellp() == 0)
    bad << "mode budget violated: sum beta_m = " << rep.sum_beta << " > "
        << budget << " = kappa/(1+kappa) alpha0";

  // Direct spot check: a(z) must stay coercive with floor alpha at random z.
  if (bad.tellp() == 0) {
    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int s = 0; s < opt.z_samples; ++s) {
      ParamPoint z;
      z.z = Eigen::VectorXd(a.num_modes());
      for (int m = 0; m < a.num_modes(); ++m) z.z[m] = u(rng);
      const auto& x = xs[s % xs.size()];
      const auto& y = ys[(s * 7 + 3) % ys.size()];
      const double lo = evaluate_tensor(a, z, x, y).min_eigenvalue();
      if (lo < rep.alpha - opt.tol) {
        bad << "sampled a(z) eigenvalue " << lo << " below floor " << rep.alpha;
        break;
      }
    }
  }

  rep.violation = bad.str();
  rep.pass = rep.violation.empty();
  return rep;
}

EllipticityReport validate_lame_field(const IsotropicLameField& f,
                                      const ValidationOptions& opt) {
  if (!f.mubar || !f.lambdabar)
    throw ValidationFailure("validate_lame_field: mean fields not set");
  // The generic affine check with beta_m = 2 gamma_m + d delta_m is strictly
  // more conservative than the per-field budgets (isotropy keeps the shear
  // floor 2 mu(z) intact no matter how large lambda is), so the isotropic
  // family is validated against its own budgets here.
  EllipticityReport rep;
  rep.isotropic = true;
  std::ostringstream bad;

  const auto xs = sample_grid(f.d, opt.grid_n);
  const auto ys = sample_grid(f.d, opt.grid_n);
  const std::size_t stride = std::max<std::size_t>(
      1, xs.size() * ys.size() / std::max(1, opt.pair_cap));
  double mu_lo = std::numeric_limits<double>::infinity(), mu_hi = 0.0;
  double la_lo = std::numeric_limits<double>::infinity(), la_hi = 0.0;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    for (std::size_t yi = offset; yi < ys.size(); yi += stride) {
      const auto& y = ys[yi];
      const double mv = f.mubar(x, y);
      const double lv = f.lambdabar(x, y);
      mu_lo = std::min(mu_lo, mv);
      mu_hi = std::max(mu_hi, mv);
      la_lo = std::min(la_lo, lv);
      la_hi = std::max(la_hi, lv);
      for (std::size_t m = 0; m < f.mu_modes.size(); ++m)
        if (f.mu_modes[m].field &&
            std::abs(f.mu_modes[m].field(x, y)) >
                f.mu_modes[m].bound + opt.tol &&
            bad.tellp() == 0)
          bad << "mu mode " << (m + 1) << " exceeds gamma_m";
      for (std::size_t m = 0; m < f.lambda_modes.size(); ++m)
        if (f.lambda_modes[m].field &&
            std::abs(f.lambda_modes[m].field(x, y)) >
                f.lambda_modes[m].bound + opt.tol &&
            bad.tellp() == 0)
          bad << "lambda mode " << (m + 1) << " exceeds delta_m";
    }
    offset = (offset + 1) % stride;
  }
  if (mu_lo < f.mubar_min - opt.tol && bad.tellp() == 0)
    bad << "mubar dips below declared mubar_min";
  if (mu_hi > f.mubar_max + opt.tol && bad.tellp() == 0)
    bad << "mubar exceeds declared mubar_max";
  if (la_lo < f.lambdabar_min - opt.tol && bad.tellp() == 0)
    bad << "lambdabar dips below declared lambdabar_min";
  if (la_hi > f.lambdabar_max + opt.tol && bad.tellp() == 0)
    bad << "lambdabar exceeds declared lambdabar_max";
  const double budget_mu = f.kappa / (1.0 + f.kappa) * f.mubar_min;
  const double budget_la = f.kappa / (1.0 + f.kappa) * f.lambdabar_min;
  if (f.sum_gamma() > budget_mu + opt.tol && bad.tellp() == 0)
    bad << "mu mode budget violated: sum gamma_m = " << f.sum_gamma() << " > "
        << budget_mu;
  if (f.sum_delta() > budget_la + opt.tol && bad.tellp() == 0)
    bad << "lambda mode budget violated: sum delta_m = " << f.sum_delta()
        << " > " << budget_la;

  // Parameter-robust bounds and derived constants at the effective margin.
  const double ke = f.kappa_effective();
  rep.kappa_effective = ke;
  rep.observed_alpha0 = 2.0 * mu_lo;
  rep.observed_beta0 = 2.0 * mu_hi + f.d * std::max(la_hi, 0.0);
  const AffineElasticTensor affine = f.to_affine();
  rep.sum_beta = affine.sum_beta();
  if (std::isfinite(ke)) {
    rep.mu_min = f.mubar_min / (1.0 + ke);
    rep.mu_max = f.mubar_max + ke / (1.0 + ke) * f.mubar_min;
    rep.lambda_min = f.lambdabar_min / (1.0 + ke);
    rep.lambda_max = f.lambdabar_max + ke / (1.0 + ke) * f.lambdabar_min;
    rep.alpha = 2.0 * rep.mu_min;
    rep.beta = 2.0 * rep.mu_max + f.d * rep.lambda_max;
  } else if (bad.tellp() == 0) {
    bad << "mode sums reach the mean-field floor: no uniform margin exists";
  }

  // Spot check: the shear floor survives at random parameter draws.
  if (bad.tellp() == 0) {
    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int M = f.num_modes();
    for (int s = 0; s < opt.z_samples; ++s) {
      ParamPoint z;
      z.z = Eigen::VectorXd(M);
      for (int m = 0; m < M; ++m) z.z[m] = u(rng);
      const auto& x = xs[s % xs.size()];
      const auto& y = ys[(s * 7 + 3) % ys.size()];
      const double mv = f.mu_at(z, x, y);
      const double lv = f.lambda_at(z, x, y);
      if (2.0 * mv < rep.alpha - opt.tol || lv < rep.lambda_min - opt.tol) {
        bad << "sampled Lame pair (" << mv << ", " << lv
            << ") falls below the robust floors";
        break;
      }
    }
  }
  rep.violation = bad.str();
  rep.pass = rep.violation.empty();
  return rep;
}

void require_uniform_ellipticity(const AffineElasticTensor& a,
                                 const ValidationOptions& opt) {
  const EllipticityReport rep = validate_uniform_ellipticity(a, opt);
  if (!rep.pass) throw ValidationFailure(rep.violation);
}

void require_valid_lame_field(const IsotropicLameField& f,
                              const ValidationOptions& opt) {
  const EllipticityReport rep = validate_lame_field(f, opt);
  if (!rep.pass) throw ValidationFailure(rep.violation);
}

SymTensor4 isotropic_to_tensor(double mu, double lambda, int d) {
  return SymTensor4::isotropic(d, mu, lambda);
}

Eigen::MatrixXd apply_tensor(const SymTensor4& a, const Eigen::MatrixXd& xi) {
  return a.apply(xi);
}

SymTensor4 invert_tensor(const SymTensor4& a) { return a.inverse(); }

int IsotropicLameField::num_modes() const {
  return static_cast<int>(std::max(mu_modes.size(), lambda_modes.size()));
}

double IsotropicLameField::mu_at(const ParamPoint& z, const SpatialPoint& x,
                                 const SpatialPoint& y) const {
  z.check_box();
  double v = mubar(x, y);
  for (int m = 0; m < z.z.size() && m < static_cast<int>(mu_modes.size()); ++m)
    if (mu_modes[m].field) v += z.z[m] * mu_modes[m].field(x, y);
  return v;
}

double IsotropicLameField::lambda_at(const ParamPoint& z, const SpatialPoint& x,
                                     const SpatialPoint& y) const {
  z.check_box();
  double v = lambdabar(x, y);
  for (int m = 0; m < z.z.size() && m < static_cast<int>(lambda_modes.size());
       ++m)
    if (lambda_modes[m].field) v += z.z[m] * lambda_modes[m].field(x, y);
  return v;
}

double IsotropicLameField::sum_gamma() const {
  double s = 0.0;
  for (const auto& m : mu_modes) s += m.bound;
  return s;
}

double IsotropicLameField::sum_delta() const {
  double s = 0.0;
  for (const auto& m : lambda_modes) s += m.bound;
  return s;
}

double IsotropicLameField::kappa_effective() const {
  // Smallest kappa with sum_gamma <= k/(1+k) mubar_min and the lambda analog.
  auto keff = [](double s, double floor) {
    if (s <= 0.0) return 0.0;
    if (s >= floor) return std::numeric_limits<double>::infinity();
    return s / (floor - s);
  };
  return std::max(keff(sum_gamma(), mubar_min),
                  keff(sum_delta(), lambdabar_min));
}

double IsotropicLameField::mu_min() const { return mubar_min / (1.0 + kappa); }

double IsotropicLameField::mu_max() const {
  return mubar_max + kappa / (1.0 + kappa) * mubar_min;
}

double IsotropicLameField::lambda_min() const {
  return lambdabar_min / (1.0 + kappa);
}

double IsotropicLameField::lambda_max() const {
  return lambdabar_max + kappa / (1.0 + kappa) * lambdabar_min;
}

AffineElasticTensor IsotropicLameField::to_affine() const {
  AffineElasticTensor a;
  a.d = d;
  const auto mb = mubar;
  const auto lb = lambdabar;
  const int dd = d;
  a.abar = [mb, lb, dd](const SpatialPoint& x, const SpatialPoint& y) {
    return SymTensor4::isotropic(dd, mb(x, y), lb(x, y));
  };
  const int M = num_modes();
  for (int m = 0; m < M; ++m) {
    ScalarXYField mf =
        (m < static_cast<int>(mu_modes.size())) ? mu_modes[m].field : nullptr;
    ScalarXYField lf = (m < static_cast<int>(lambda_modes.size()))
                           ? lambda_modes[m].field
                           : nullptr;
    const double gb = (m < static_cast<int>(mu_modes.size()))
                          ? mu_modes[m].bound
                          : 0.0;
    const double db = (m < static_cast<int>(lambda_modes.size()))
                          ? lambda_modes[m].bound
                          : 0.0;
    TensorMode mode;
    mode.psi = [mf, lf, dd](const SpatialPoint& x, const SpatialPoint& y) {
      const double mv = mf ? mf(x, y) : 0.0;
      const double lv = lf ? lf(x, y) : 0.0;
      return SymTensor4::isotropic(dd, mv, lv);
    };
    // Operator norm of iso(mu, lambda): eigenvalues are 2mu (shear/deviatoric)
    // and 2mu + d lambda (volumetric), so 2|mu| + d|lambda| is a valid bound.
    mode.beta = 2.0 * gb + d * db;
    a.modes.push_back(std::move(mode));
  }
  a.kappa = kappa;
  // Coercivity floor of iso(mu, lambda) with mu, lambda >= 0 is 2 mu.
  a.alpha0 = 2.0 * mubar_min;
  a.beta0 = 2.0 * mubar_max + d * lambdabar_max;
  return a;
}

}  // namespace pmel
