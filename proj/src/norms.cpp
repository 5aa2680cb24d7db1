#include "pmel/norms.hpp"

#include <cmath>

#include "pmel/errors.hpp"
#include "pmel/quadrature.hpp"

namespace pmel {

FieldNorms compute_norms(const FeSpace& space, const Eigen::VectorXd& coeffs,
                         const TensorCoefficient& energy_tensor) {
  if (coeffs.size() != space.ndof()) throw DimensionMismatch("coefficient size mismatch");
  const Mesh& mesh = space.mesh;
  const int d = mesh.d, vd = voigt_dim(d);
  const int nc = space.ncomp;
  const bool strain_defined = space.arity == Arity::vectord;

  std::vector<Point> qx;
  std::vector<double> qw;
  if (d == 1) {
    const Quad1 q = gauss_legendre_01(3);
    for (size_t i = 0; i < q.x.size(); ++i) {
      qx.emplace_back(q.x[i], 0.0);
      qw.push_back(q.w[i]);
    }
  } else {
    const QuadTri q = triangle_rule(space.order == 2 ? 4 : 2);
    for (size_t i = 0; i < q.x.size(); ++i) {
      qx.emplace_back(q.x[i][0], q.x[i][1]);
      qw.push_back(q.w[i]);
    }
  }

  double l2 = 0.0, semi = 0.0, energy = 0.0;
  const double sqrt2 = std::sqrt(2.0);
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const auto& verts = mesh.cells[cell];
    const Point p0 = mesh.nodes[verts[0]];
    Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
    if (d == 1) {
      J(0, 0) = mesh.nodes[verts[1]][0] - p0[0];
    } else {
      J.col(0) = mesh.nodes[verts[1]] - p0;
      J.col(1) = mesh.nodes[verts[2]] - p0;
    }
    const double detJ = d == 1 ? J(0, 0) : J.determinant();
    const Eigen::Matrix2d invJT =
        d == 1 ? Eigen::Matrix2d(Eigen::Vector2d(1.0 / J(0, 0), 1.0).asDiagonal())
               : Eigen::Matrix2d(J.inverse().transpose());
    const auto& ids = space.cell_scalar[cell];
    for (size_t q = 0; q < qx.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, qx[q]);
      const double wq = qw[q] * detJ;
      Eigen::VectorXd val = Eigen::VectorXd::Zero(nc);
      Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(nc, d);
      for (int k = 0; k < b.nb; ++k) {
        const Eigen::Vector2d G = invJT * b.grad[k];
        for (int c = 0; c < nc; ++c) {
          const double u = coeffs[space.dof(ids[k], c)];
          val[c] += u * b.val[k];
          for (int e = 0; e < d; ++e) grad(c, e) += u * G[e];
        }
      }
      l2 += wq * val.squaredNorm();
      semi += wq * grad.squaredNorm();
      if (strain_defined) {
        Eigen::VectorXd eps(vd);
        if (d == 1) {
          eps[0] = grad(0, 0);
        } else {
          eps[0] = grad(0, 0);
          eps[1] = grad(1, 1);
          eps[2] = (grad(0, 1) + grad(1, 0)) / sqrt2;
        }
        if (energy_tensor) {
          const Point xq = p0 + J * Eigen::Vector2d(qx[q][0], qx[q][1]);
          const SymTensor4 a = energy_tensor(xq);
          if (a.dim() != d) throw DimensionMismatch("energy tensor has wrong dimension");
          energy += wq * eps.dot(a.voigt() * eps);
        } else {
          energy += wq * eps.squaredNorm();
        }
      }
    }
  }
  FieldNorms out;
  out.l2 = std::sqrt(std::max(0.0, l2));
  out.h1_semi = std::sqrt(std::max(0.0, semi));
  out.h1 = std::sqrt(std::max(0.0, l2 + semi));
  out.energy = strain_defined ? std::sqrt(std::max(0.0, energy)) : out.h1_semi;
  return out;
}

}  // namespace pmel
