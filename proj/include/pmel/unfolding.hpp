#pragma once
// Periodic folding and unfolding operators on the unit domain: the cell-average
// folding map that pulls two-scale (and nested multiscale) fields back onto the
// physical domain, its reverse unfolding map, quadrature helpers aligned with
// the cell grids, and a corrector accuracy study that compares fine-scale
// parametric solves against folded homogenized expansions in the mean-square
// parameter norm.
//
// Scale conventions: the physical domain is (0,1)^d with d in {1,2}; cell scales
// are reciprocals of integers so cell boundaries align with mesh lines.  The
// enlarged domain used by the conservation identities is the 2-cell-wide
// neighborhood of the unit domain; integrands are extended by zero outside the
// unit domain in their slow slot.

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "pmel/bounds.hpp"
#include "pmel/displacement.hpp"
#include "pmel/mesh.hpp"
#include "pmel/report.hpp"

namespace pmel {

// Nested cell scales eps_1 > eps_2 > ... > eps_n with integer refinement
// ratios between consecutive scales.  n = ratios.size() + 1.
struct ScaleSchedule {
  double eps = 0.0;         // coarsest scale eps_1
  std::vector<int> ratios;  // integer ratio of consecutive scales, coarsest pair first

  int n() const { return static_cast<int>(ratios.size()) + 1; }
  // Validates and returns {eps_1, ..., eps_n}.  Throws NonIntegerRatio when a
  // ratio is below 2 and ValidationFailure when eps is not positive.
  std::vector<double> scales() const;
};

// Function of a slow point and one fast cell point.
using TwoScaleFn = std::function<double(const Point& x, const Point& y)>;
// Function of a slow point and a stack of nested cell points (y_1, ..., y_n).
using MultiScaleFn = std::function<double(const Point& x, const std::vector<Point>& ys)>;
// Function on the physical domain.
using DomainFn = std::function<double(const Point& x)>;

// Result of folding: a field on the physical domain, evaluable anywhere (zero
// where the underlying integrand vanishes).
struct FoldedField {
  std::function<double(const Point& x)> values;
  double operator()(const Point& x) const { return values(x); }
};

// Cell-average folding: value at x is the average of phi over the cell of x in
// its slow slot, with the fast slot pinned at the in-cell position of x.
// The slow slot of phi is extended by zero outside the unit domain.  t_points
// Gauss points per direction resolve the cell average.
FoldedField fold_U(const TwoScaleFn& phi, double eps, int d, int t_points = 2);

// Nested folding over a scale schedule: every scale contributes a bracketed
// cell anchor plus an averaged in-cell offset, except the finest slot which is
// pinned at the in-cell position of x.  n = 1 reduces exactly to fold_U.
FoldedField fold_Un(const MultiScaleFn& phi, const ScaleSchedule& schedule, int d,
                    int t_points = 2);

// Unfolding: spreads a domain function onto the product of the domain with the
// nested cell stack by re-assembling the physical point from cell anchors.
// phi is extended by zero outside the unit domain.
MultiScaleFn unfold_T(const DomainFn& phi, const ScaleSchedule& schedule, int d);

// Integral over the 2-cell-enlarged cover of the unit domain, composite Gauss
// with the given points per direction on each cell of size eps.
double integrate_enlarged(const DomainFn& f, double eps, int d, int points = 2);

// Integral of f over the unit domain, composite Gauss per cell of size eps.
double integrate_domain(const DomainFn& f, double eps, int d, int points = 2);

// Integral of phi(x, y) over (unit domain) x (unit cell): composite per-cell
// Gauss in x, tensor Gauss in y.
double integrate_two_scale(const TwoScaleFn& phi, double eps, int d, int points = 2);

// L2 norms built from the composite rules above.
double l2_norm_domain(const DomainFn& f, double eps, int d, int points = 2);
double l2_norm_two_scale(const TwoScaleFn& phi, double eps, int d, int points = 2);

// Integral of an unfolded function over (enlarged cover) x (cell stack); the
// cell-stack quadrature is composited on the bracket grids of the schedule so
// piecewise-constant unfoldings integrate exactly.
double integrate_unfolded(const MultiScaleFn& f, const ScaleSchedule& schedule, int d,
                          int points = 2);

// Corrector accuracy study.  For every scale in eps_list and every expansion
// size in set_sizes, measures the mean-square (in the parameter, Gauss grid)
// L2 distance between the gradient of the fine-scale solve and the folded
// first-order expansion: grad u0 plus the cell average of the fast corrector
// gradient, and likewise between the fine stress and the folded expansion
// stress.  The coefficient's slow slot is frozen at the domain midpoint when
// building cell correctors, so the study targets coefficients whose fast
// pattern does not drift across the domain.
struct CorrectorStudyOptions {
  std::vector<double> eps_list = {0.25, 0.125};  // reciprocals of integers
  std::vector<int> set_sizes = {1, 4};           // expansion sizes N
  int coarse_n = 8;       // macroscopic mesh for homogenized solves
  int coarse_per_eps = 0; // when positive, overrides coarse_n with this many
                          // cells per eps cell so the homogenized-solve
                          // discretization error shrinks along the scale sweep
  int ymesh_n = 8;        // unit-cell mesh for corrector fields
  int fine_per_eps = 8;   // fine cells per eps cell (fine mesh n = this / eps)
  int points_per_dim = 3; // parameter quadrature nodes per mode
  double p_summability = 0.5;
  double fit_decay = 0.0;      // N-decay exponent of the additive fit; 0 = certificate rate
  long long budget = 4000000;  // cap on total fine-solve scalar dofs across the sweep
};

// Rows: {eps, N, error_grad, error_stress}.  Metadata carries the fitted
// additive-model constants err ~ c_eps sqrt(eps) + c_n N^{-s} per error kind
// with their relative least-squares residuals.
ConvergenceReport folded_corrector_error(const DisplacementProblem& problem,
                                         const BoundSequence& seq,
                                         const CorrectorStudyOptions& opts = {});

}  // namespace pmel
