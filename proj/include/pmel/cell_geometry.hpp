#pragma once
// Per-cell affine geometry and reference quadrature shared by the modules
// that integrate discrete fields outside the core assembly routines.
#include <cmath>
#include <vector>

#include "pmel/assembly.hpp"
#include "pmel/fe_space.hpp"
#include "pmel/quadrature.hpp"

namespace pmel {

struct CellGeom {
  Point p0;
  Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d invJT = Eigen::Matrix2d::Identity();
  double detJ = 1.0;
};

inline CellGeom cell_geometry(const Mesh& mesh, int c) {
  CellGeom g;
  const auto& cell = mesh.cells[c];
  g.p0 = mesh.nodes[cell[0]];
  if (mesh.d == 1) {
    const double h = mesh.nodes[cell[1]][0] - g.p0[0];
    g.J(0, 0) = h;
    g.invJT(0, 0) = 1.0 / h;
    g.detJ = h;
  } else {
    g.J.col(0) = mesh.nodes[cell[1]] - g.p0;
    g.J.col(1) = mesh.nodes[cell[2]] - g.p0;
    g.detJ = g.J.determinant();
    g.invJT = g.J.inverse().transpose();
  }
  return g;
}

struct QuadPoint {
  Point xhat;
  double w = 0.0;
};

// Reference-cell rule of the requested degree; midpoint mode collapses to the
// centroid with the full reference measure.
inline std::vector<QuadPoint> reference_rule(int d, int degree,
                                             CoefficientMode mode = CoefficientMode::quadrature) {
  std::vector<QuadPoint> pts;
  if (mode == CoefficientMode::midpoint) {
    if (d == 1) pts.push_back({Point(0.5, 0.0), 1.0});
    else pts.push_back({Point(1.0 / 3.0, 1.0 / 3.0), 0.5});
    return pts;
  }
  if (d == 1) {
    const Quad1 q = gauss_legendre_01(degree / 2 + 1);
    for (std::size_t i = 0; i < q.x.size(); ++i) pts.push_back({Point(q.x[i], 0.0), q.w[i]});
  } else {
    const QuadTri q = triangle_rule(degree);
    for (std::size_t i = 0; i < q.x.size(); ++i)
      pts.push_back({Point(q.x[i][0], q.x[i][1]), q.w[i]});
  }
  return pts;
}

// Strain (slot coordinates) of a vector field on one cell at a reference point.
inline Eigen::VectorXd local_strain(const FeSpace& space, const Eigen::VectorXd& coeffs, int c,
                                    const CellGeom& g, const BasisEval& basis) {
  const int d = space.mesh.d;
  Eigen::Matrix2d grad = Eigen::Matrix2d::Zero();
  const auto& sids = space.cell_scalar[c];
  for (int b = 0; b < basis.nb; ++b) {
    const Eigen::Vector2d gphi = g.invJT * basis.grad[b];
    for (int comp = 0; comp < space.ncomp; ++comp)
      grad.row(comp) += coeffs[space.dof(sids[b], comp)] * gphi.transpose();
  }
  Eigen::VectorXd e(d * (d + 1) / 2);
  if (d == 1) {
    e[0] = grad(0, 0);
  } else {
    e[0] = grad(0, 0);
    e[1] = grad(1, 1);
    e[2] = (grad(0, 1) + grad(1, 0)) / std::sqrt(2.0);
  }
  return e;
}

// Strain columns of all local vector basis functions at a reference point;
// column index = local_basis * ncomp + comp.
inline Eigen::MatrixXd strain_columns(int d, int ncomp, const CellGeom& g,
                                      const BasisEval& basis) {
  const int vd = d * (d + 1) / 2;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(vd, basis.nb * ncomp);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int b = 0; b < basis.nb; ++b) {
    const Eigen::Vector2d gphi = g.invJT * basis.grad[b];
    if (d == 1) {
      B(0, b) = gphi[0];
      continue;
    }
    const int c0 = b * ncomp;
    B(0, c0) = gphi[0];
    B(2, c0) = gphi[1] * inv_sqrt2;
    B(1, c0 + 1) = gphi[1];
    B(2, c0 + 1) = gphi[0] * inv_sqrt2;
  }
  return B;
}

}  // namespace pmel
