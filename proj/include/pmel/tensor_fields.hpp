#pragma once
// Affinely parametrized elastic tensor families
//   a(z; x, y) = abar(x, y) + sum_m z_m psi_m(x, y),   z in [-1,1]^M,
// with per-mode operator-norm bounds beta_m, plus the isotropic special case
// where both Lame fields are affine in z.  The key invariant is the mode
// budget sum_m beta_m <= kappa/(1+kappa) * alpha0, which yields the uniform
// coercivity floor alpha = alpha0 - sum_m beta_m and ceiling
// beta = beta0 + sum_m beta_m over the whole parameter box.
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmel/tensor.hpp"

namespace pmel {

using SpatialPoint = Eigen::Vector2d;  // d = 1 uses the first component only
using TensorField =
    std::function<SymTensor4(const SpatialPoint&, const SpatialPoint&)>;
using ScalarXYField =
    std::function<double(const SpatialPoint&, const SpatialPoint&)>;

struct ParamPoint {
  Eigen::VectorXd z;  // entries in [-1, 1]

  static ParamPoint zero(int M) {
    ParamPoint p;
    p.z = Eigen::VectorXd::Zero(M);
    return p;
  }
  static ParamPoint of(std::initializer_list<double> vals);
  void check_box() const;  // ValidationFailure if any |z_m| > 1 + 1e-12
};

struct TensorMode {
  TensorField psi;
  double beta = 0.0;  // pointwise operator-norm bound of psi
};

struct AffineElasticTensor {
  int d = 2;
  TensorField abar;
  std::vector<TensorMode> modes;
  double kappa = 1.0;   // declared budget margin: sum beta_m <= k/(1+k) alpha0
  double alpha0 = 0.0;  // coercivity floor of abar
  double beta0 = 0.0;   // operator-norm ceiling of abar

  int num_modes() const { return static_cast<int>(modes.size()); }
  double sum_beta() const;
  double alpha() const { return alpha0 - sum_beta(); }
  double beta() const { return beta0 + sum_beta(); }
};

// a(z; x, y); z may have fewer entries than modes (missing entries read as 0).
SymTensor4 evaluate_tensor(const AffineElasticTensor& a, const ParamPoint& z,
                           const SpatialPoint& x, const SpatialPoint& y);

struct EllipticityReport {
  bool pass = false;
  std::string violation;  // empty when pass
  // Derived constants at the effective margin kappa_eff (the smallest kappa
  // for which the mode budget holds): alpha = alpha0/(1+kappa_eff), which
  // equals alpha0 - sum beta_m, and beta = beta0 + sum beta_m.
  double alpha = 0.0;
  double beta = 0.0;
  double kappa_effective = 0.0;
  double sum_beta = 0.0;
  double observed_alpha0 = 0.0;  // min eigenvalue of abar over samples
  double observed_beta0 = 0.0;   // max |eigenvalue| of abar over samples
  SpatialPoint worst_x = SpatialPoint::Zero();
  SpatialPoint worst_y = SpatialPoint::Zero();
  // Filled only by the isotropic validator: parameter-robust Lame bounds at
  // the effective margin.
  bool isotropic = false;
  double mu_min = 0.0, mu_max = 0.0, lambda_min = 0.0, lambda_max = 0.0;
};

struct ValidationOptions {
  int grid_n = 17;      // samples per axis for the x and y grids
  int pair_cap = 20000; // max (x,y) pairs visited (y grid strided if needed)
  int z_samples = 16;   // random parameter draws for the direct coercivity check
  unsigned seed = 20240817u;
  double tol = 1e-9;
};

// Samples abar and the modes on a spatial grid, checks the declared floors
// and per-mode bounds, checks the mode budget for the declared kappa, and
// spot-checks coercivity of a(z) at random z.  Failures are reported, not
// thrown; malformed inputs (no modes vector mismatch etc.) do throw.
EllipticityReport validate_uniform_ellipticity(
    const AffineElasticTensor& a, const ValidationOptions& opt = {});

// Isotropic counterpart: additionally checks the declared envelopes of the
// Lame mean fields and per-mode bounds, and fills the parameter-robust
// mu/lambda bounds at the effective margin.
EllipticityReport validate_lame_field(const struct IsotropicLameField& f,
                                      const ValidationOptions& opt = {});

// Throwing forms: ValidationFailure carrying the violation description.
void require_uniform_ellipticity(const AffineElasticTensor& a,
                                 const ValidationOptions& opt = {});
void require_valid_lame_field(const struct IsotropicLameField& f,
                              const ValidationOptions& opt = {});

// Constant isotropic tensor (free-function form of SymTensor4::isotropic).
SymTensor4 isotropic_to_tensor(double mu, double lambda, int d = 2);

// Free-function forms of the member operations.
Eigen::MatrixXd apply_tensor(const SymTensor4& a, const Eigen::MatrixXd& xi);
SymTensor4 invert_tensor(const SymTensor4& a);

struct ScalarMode {
  ScalarXYField field;
  double bound = 0.0;  // pointwise |field| <= bound
};

// Isotropic family: mu(z) = mubar + sum z_m mu_m, lambda alike.  The declared
// envelope [mubar_min, mubar_max] etc. refers to the mean fields; the
// parameter-robust bounds divide out the kappa margin.
struct IsotropicLameField {
  int d = 2;
  ScalarXYField mubar, lambdabar;
  std::vector<ScalarMode> mu_modes, lambda_modes;
  double kappa = 1.0;
  double mubar_min = 0.0, mubar_max = 0.0;
  double lambdabar_min = 0.0, lambdabar_max = 0.0;

  int num_modes() const;
  double mu_at(const ParamPoint& z, const SpatialPoint& x,
               const SpatialPoint& y) const;
  double lambda_at(const ParamPoint& z, const SpatialPoint& x,
                   const SpatialPoint& y) const;
  double sum_gamma() const;  // sum of mu-mode bounds
  double sum_delta() const;  // sum of lambda-mode bounds
  double kappa_effective() const;

  // Uniform bounds over the parameter box:
  //   mu_min = mubar_min/(1+kappa),  mu_max = mubar_max + k/(1+k) mubar_min.
  double mu_min() const;
  double mu_max() const;
  double lambda_min() const;
  double lambda_max() const;

  // View as a general affine family: abar = iso(mubar, lambdabar),
  // psi_m = iso(mu_m, lambda_m), beta_m = 2 gamma_m + d delta_m.
  AffineElasticTensor to_affine() const;
};

}  // namespace pmel
