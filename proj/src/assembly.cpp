#include "pmel/assembly.hpp"

#include <cmath>
#include <vector>

#include "pmel/errors.hpp"
#include "pmel/quadrature.hpp"

namespace pmel {

namespace {

struct CellGeom {
  Eigen::Matrix2d invJT = Eigen::Matrix2d::Identity();
  double detJ = 1.0;
  Point p0 = Point::Zero();
  Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
};

CellGeom cell_geometry(const Mesh& mesh, int cell) {
  CellGeom g;
  const auto& v = mesh.cells[cell];
  g.p0 = mesh.nodes[v[0]];
  if (mesh.d == 1) {
    const double len = mesh.nodes[v[1]][0] - g.p0[0];
    g.J(0, 0) = len;
    g.invJT(0, 0) = 1.0 / len;
    g.detJ = len;
    return g;
  }
  g.J.col(0) = mesh.nodes[v[1]] - g.p0;
  g.J.col(1) = mesh.nodes[v[2]] - g.p0;
  g.detJ = g.J.determinant();
  g.invJT = g.J.inverse().transpose();
  return g;
}

struct QuadRule {
  std::vector<Point> x;   // reference points
  std::vector<double> w;  // weights carrying the reference measure
};

QuadRule cell_rule(int d, int degree) {
  QuadRule r;
  if (d == 1) {
    const Quad1 q = gauss_legendre_01(degree / 2 + 1);
    for (size_t i = 0; i < q.x.size(); ++i) {
      r.x.emplace_back(q.x[i], 0.0);
      r.w.push_back(q.w[i]);
    }
  } else {
    const QuadTri q = triangle_rule(degree);
    for (size_t i = 0; i < q.x.size(); ++i) {
      r.x.emplace_back(q.x[i][0], q.x[i][1]);
      r.w.push_back(q.w[i]);
    }
  }
  return r;
}

int default_degree(const FeSpace& space) { return space.order == 2 ? 4 : 2; }

int rule_degree(const FeSpace& space, const AssemblyOptions& opts) {
  return opts.quad_degree > 0 ? opts.quad_degree : default_degree(space);
}

Point centroid_ref(int d) { return d == 1 ? Point(0.5, 0.0) : Point(1.0 / 3, 1.0 / 3); }

// Columns of the strain operator at one quadrature point: local dof (k, c)
// maps to the slot vector of eps(phi_k e_c).
void fill_strain_matrix(const FeSpace& space, const BasisEval& b, const CellGeom& g,
                        Eigen::MatrixXd& B) {
  const int d = space.mesh.d;
  B.setZero();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < b.nb; ++k) {
    const Eigen::Vector2d G = g.invJT * b.grad[k];
    if (d == 1) {
      B(0, k) = G[0];
    } else {
      B(0, 2 * k + 0) = G[0];
      B(2, 2 * k + 0) = G[1] * inv_sqrt2;
      B(1, 2 * k + 1) = G[1];
      B(2, 2 * k + 1) = G[0] * inv_sqrt2;
    }
  }
}

void scatter(const FeSpace& rows, const FeSpace& cols, int cell_r, int cell_c,
             const Eigen::MatrixXd& Ke, std::vector<Eigen::Triplet<double>>& trip) {
  const auto& ri = rows.cell_scalar[cell_r];
  const auto& ci = cols.cell_scalar[cell_c];
  const int rn = static_cast<int>(ri.size()), rc = rows.ncomp;
  const int cn = static_cast<int>(ci.size()), cc = cols.ncomp;
  for (int a = 0; a < rn; ++a)
    for (int p = 0; p < rc; ++p)
      for (int b = 0; b < cn; ++b)
        for (int q = 0; q < cc; ++q)
          trip.emplace_back(rows.dof(ri[a], p), cols.dof(ci[b], q),
                            Ke(a * rc + p, b * cc + q));
}

SymTensor4 eval_tensor_coefficient(const TensorCoefficient& fn, const Point& x, int d) {
  SymTensor4 a;
  try {
    a = fn(x);
  } catch (const std::exception& e) {
    throw AssemblyFailure(std::string("coefficient evaluation failed: ") + e.what());
  }
  if (a.dim() != d) throw AssemblyFailure("coefficient tensor has wrong dimension");
  return a;
}

void require_same_mesh(const FeSpace& a, const FeSpace& b) {
  if (a.mesh.d != b.mesh.d || a.mesh.n != b.mesh.n)
    throw SpaceMismatch("spaces live on different meshes");
}

}  // namespace

SpMat assemble_elastic(const FeSpace& space, const TensorCoefficient& tensor_at,
                       const AssemblyOptions& opts) {
  if (space.arity != Arity::vectord) throw SpaceMismatch("elastic form needs a vector space");
  const Mesh& mesh = space.mesh;
  const int d = mesh.d, vd = voigt_dim(d);
  const QuadRule rule = cell_rule(d, rule_degree(space, opts));
  const int nb = static_cast<int>(space.cell_scalar[0].size());
  const int ldof = nb * space.ncomp;
  Eigen::MatrixXd B(vd, ldof), Ke(ldof, ldof);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.ncells()) * ldof * ldof);
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    Eigen::MatrixXd Amid;
    if (opts.mode == CoefficientMode::midpoint) {
      const Point xm = g.p0 + g.J * centroid_ref(d);
      Amid = eval_tensor_coefficient(tensor_at, xm, d).voigt();
    }
    Ke.setZero();
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, rule.x[q]);
      fill_strain_matrix(space, b, g, B);
      const double wq = rule.w[q] * g.detJ;
      if (opts.mode == CoefficientMode::midpoint) {
        Ke.noalias() += wq * B.transpose() * Amid * B;
      } else {
        const Point xq = g.p0 + g.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
        const Eigen::MatrixXd A = eval_tensor_coefficient(tensor_at, xq, d).voigt();
        Ke.noalias() += wq * B.transpose() * A * B;
      }
    }
    scatter(space, space, cell, cell, Ke, trip);
  }
  SpMat K(space.ndof(), space.ndof());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

namespace {

SpMat div_coupling_impl(const FeSpace& vspace, const FeSpace& qspace,
                        const ScalarCoefficient* weight, const AssemblyOptions& opts) {
  if (vspace.arity != Arity::vectord) throw SpaceMismatch("div coupling needs a vector space");
  if (qspace.arity != Arity::scalar) throw SpaceMismatch("div coupling needs a scalar q-space");
  require_same_mesh(vspace, qspace);
  const Mesh& mesh = vspace.mesh;
  const int d = mesh.d;
  const int degree = opts.quad_degree > 0 ? opts.quad_degree : 4;
  const QuadRule rule = cell_rule(d, degree);
  const int nbv = static_cast<int>(vspace.cell_scalar[0].size());
  const int nbq = static_cast<int>(qspace.cell_scalar[0].size());
  const int lv = nbv * vspace.ncomp;
  Eigen::MatrixXd Be(nbq, lv);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.ncells()) * nbq * lv);
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    Be.setZero();
    double wmid = 1.0;
    if (weight && opts.mode == CoefficientMode::midpoint) {
      const Point xm = g.p0 + g.J * Eigen::Vector2d(centroid_ref(d)[0], centroid_ref(d)[1]);
      wmid = (*weight)(xm);
    }
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval bv = eval_reference_basis(d, vspace.order, rule.x[q]);
      const BasisEval bq = eval_reference_basis(d, qspace.order, rule.x[q]);
      double wq = rule.w[q] * g.detJ;
      if (weight) {
        if (opts.mode == CoefficientMode::midpoint) {
          wq *= wmid;
        } else {
          const Point xq = g.p0 + g.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
          wq *= (*weight)(xq);
        }
      }
      for (int k = 0; k < bv.nb; ++k) {
        const Eigen::Vector2d G = g.invJT * bv.grad[k];
        for (int c = 0; c < d; ++c)
          for (int l = 0; l < bq.nb; ++l) Be(l, k * d + c) += wq * bq.val[l] * G[c];
      }
    }
    scatter(qspace, vspace, cell, cell, Be, trip);
  }
  SpMat Bmat(qspace.ndof(), vspace.ndof());
  Bmat.setFromTriplets(trip.begin(), trip.end());
  return Bmat;
}

}  // namespace

SpMat assemble_div_coupling(const FeSpace& vspace, const FeSpace& qspace,
                            const AssemblyOptions& opts) {
  return div_coupling_impl(vspace, qspace, nullptr, opts);
}

SpMat assemble_div_coupling(const FeSpace& vspace, const FeSpace& qspace,
                            const ScalarCoefficient& weight, const AssemblyOptions& opts) {
  return div_coupling_impl(vspace, qspace, &weight, opts);
}

namespace {

// shared mass loop; weight_voigt computes the ncomp x ncomp slot-space weight
// matrix at a physical point
template <class WeightAt>
SpMat assemble_mass_loop(const FeSpace& space, const AssemblyOptions& opts,
                         const WeightAt& weight_at) {
  const Mesh& mesh = space.mesh;
  const int d = mesh.d;
  const QuadRule rule = cell_rule(d, rule_degree(space, opts));
  const int nb = static_cast<int>(space.cell_scalar[0].size());
  const int nc = space.ncomp;
  const int ldof = nb * nc;
  Eigen::MatrixXd Me(ldof, ldof);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.ncells()) * ldof * ldof);
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    Me.setZero();
    Eigen::MatrixXd Wmid;
    if (opts.mode == CoefficientMode::midpoint) {
      const Point xm = g.p0 + g.J * Eigen::Vector2d(centroid_ref(d)[0], centroid_ref(d)[1]);
      Wmid = weight_at(xm);
    }
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, rule.x[q]);
      const Point xq = g.p0 + g.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
      const Eigen::MatrixXd W =
          opts.mode == CoefficientMode::midpoint ? Wmid : Eigen::MatrixXd(weight_at(xq));
      const double wq = rule.w[q] * g.detJ;
      for (int k = 0; k < nb; ++k)
        for (int l = 0; l < nb; ++l) {
          const double phi = wq * b.val[k] * b.val[l];
          for (int s = 0; s < nc; ++s)
            for (int t = 0; t < nc; ++t) Me(k * nc + s, l * nc + t) += phi * W(t, s);
        }
    }
    scatter(space, space, cell, cell, Me, trip);
  }
  SpMat M(space.ndof(), space.ndof());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace

SpMat assemble_weighted_mass(const FeSpace& space, const ScalarCoefficient& weight,
                             const AssemblyOptions& opts) {
  const int nc = space.ncomp;
  return assemble_mass_loop(space, opts, [&](const Point& x) {
    const double w = weight(x);
    if (!(w > 0.0)) throw NonpositiveWeight("mass weight is not positive");
    return Eigen::MatrixXd(w * Eigen::MatrixXd::Identity(nc, nc));
  });
}

SpMat assemble_weighted_mass(const FeSpace& space, const TensorCoefficient& weight,
                             const AssemblyOptions& opts) {
  if (space.arity != Arity::symtensor)
    throw SpaceMismatch("tensor-weighted mass needs a symmetric-tensor space");
  const int d = space.mesh.d;
  return assemble_mass_loop(space, opts, [&](const Point& x) {
    const SymTensor4 w = eval_tensor_coefficient(weight, x, d);
    if (!(w.min_eigenvalue() > 0.0))
      throw NonpositiveWeight("tensor mass weight is not positive definite");
    return Eigen::MatrixXd(w.voigt());
  });
}

SpMat assemble_mass(const FeSpace& space) {
  return assemble_weighted_mass(space, [](const Point&) { return 1.0; });
}

SpMat assemble_grad_stiffness(const FeSpace& space) {
  const Mesh& mesh = space.mesh;
  const int d = mesh.d;
  const QuadRule rule = cell_rule(d, 2);
  const int nb = static_cast<int>(space.cell_scalar[0].size());
  const int nc = space.ncomp;
  const int ldof = nb * nc;
  Eigen::MatrixXd Ke(ldof, ldof);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.ncells()) * ldof * ldof);
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    Ke.setZero();
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, rule.x[q]);
      const double wq = rule.w[q] * g.detJ;
      for (int k = 0; k < nb; ++k) {
        const Eigen::Vector2d Gk = g.invJT * b.grad[k];
        for (int l = 0; l < nb; ++l) {
          const Eigen::Vector2d Gl = g.invJT * b.grad[l];
          const double v = wq * Gk.head(d).dot(Gl.head(d));
          for (int c = 0; c < nc; ++c) Ke(k * nc + c, l * nc + c) += v;
        }
      }
    }
    scatter(space, space, cell, cell, Ke, trip);
  }
  SpMat K(space.ndof(), space.ndof());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

SpMat assemble_h1(const FeSpace& space) {
  return SpMat(assemble_mass(space) + assemble_grad_stiffness(space));
}

namespace {

SpMat stress_strain_impl(const FeSpace& sspace, const FeSpace& vspace,
                         const TensorCoefficient* tensor_at, const AssemblyOptions& opts) {
  if (sspace.arity != Arity::symtensor)
    throw SpaceMismatch("stress-strain coupling needs a symmetric-tensor row space");
  if (vspace.arity != Arity::vectord)
    throw SpaceMismatch("stress-strain coupling needs a vector column space");
  require_same_mesh(sspace, vspace);
  const Mesh& mesh = vspace.mesh;
  const int d = mesh.d, vd = voigt_dim(d);
  const int degree = opts.quad_degree > 0
                         ? opts.quad_degree
                         : (vspace.order == 2 || sspace.order == 2 ? 4 : 2);
  const QuadRule rule = cell_rule(d, degree);
  const int nbs = static_cast<int>(sspace.cell_scalar[0].size());
  const int nbv = static_cast<int>(vspace.cell_scalar[0].size());
  const int ls = nbs * vd, lv = nbv * d;
  Eigen::MatrixXd B(vd, lv), Ee(ls, lv);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.ncells()) * ls * lv);
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    Ee.setZero();
    Eigen::MatrixXd Amid;
    if (tensor_at && opts.mode == CoefficientMode::midpoint) {
      const Point xm = g.p0 + g.J * Eigen::Vector2d(centroid_ref(d)[0], centroid_ref(d)[1]);
      Amid = eval_tensor_coefficient(*tensor_at, xm, d).voigt();
    }
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval bs = eval_reference_basis(d, sspace.order, rule.x[q]);
      const BasisEval bv = eval_reference_basis(d, vspace.order, rule.x[q]);
      fill_strain_matrix(vspace, bv, g, B);
      const double wq = rule.w[q] * g.detJ;
      Eigen::MatrixXd cols = B;
      if (tensor_at) {
        if (opts.mode == CoefficientMode::midpoint) {
          cols = Amid * B;
        } else {
          const Point xq = g.p0 + g.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
          cols = eval_tensor_coefficient(*tensor_at, xq, d).voigt() * B;
        }
      }
      for (int l = 0; l < bs.nb; ++l)
        for (int s = 0; s < vd; ++s)
          for (int j = 0; j < lv; ++j)
            Ee(l * vd + s, j) += wq * bs.val[l] * cols(s, j);
    }
    scatter(sspace, vspace, cell, cell, Ee, trip);
  }
  SpMat E(sspace.ndof(), vspace.ndof());
  E.setFromTriplets(trip.begin(), trip.end());
  return E;
}

}  // namespace

SpMat assemble_stress_strain_coupling(const FeSpace& sspace, const FeSpace& vspace,
                                      const AssemblyOptions& opts) {
  return stress_strain_impl(sspace, vspace, nullptr, opts);
}

SpMat assemble_stress_strain_coupling(const FeSpace& sspace, const FeSpace& vspace,
                                      const TensorCoefficient& tensor_at,
                                      const AssemblyOptions& opts) {
  return stress_strain_impl(sspace, vspace, &tensor_at, opts);
}

Eigen::VectorXd assemble_load(const FeSpace& space, const VectorField& f,
                              const AssemblyOptions& opts) {
  const Mesh& mesh = space.mesh;
  const int d = mesh.d;
  const QuadRule rule = cell_rule(d, rule_degree(space, opts));
  const int nb = static_cast<int>(space.cell_scalar[0].size());
  const int nc = space.ncomp;
  Eigen::VectorXd L = Eigen::VectorXd::Zero(space.ndof());
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    const auto& ids = space.cell_scalar[cell];
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, rule.x[q]);
      const Point xq = g.p0 + g.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
      const Eigen::VectorXd fv = f(xq);
      if (fv.size() != nc) throw DimensionMismatch("load density has wrong component count");
      const double wq = rule.w[q] * g.detJ;
      for (int k = 0; k < nb; ++k)
        for (int c = 0; c < nc; ++c) L[space.dof(ids[k], c)] += wq * b.val[k] * fv[c];
    }
  }
  return L;
}

Eigen::VectorXd assemble_strain_load(const FeSpace& space, const VectorField& stress_at,
                                     const AssemblyOptions& opts) {
  if (space.arity != Arity::vectord) throw SpaceMismatch("strain load needs a vector space");
  const Mesh& mesh = space.mesh;
  const int d = mesh.d, vd = voigt_dim(d);
  const QuadRule rule = cell_rule(d, rule_degree(space, opts));
  const int nb = static_cast<int>(space.cell_scalar[0].size());
  const int ldof = nb * d;
  Eigen::MatrixXd B(vd, ldof);
  Eigen::VectorXd L = Eigen::VectorXd::Zero(space.ndof());
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    const auto& ids = space.cell_scalar[cell];
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, rule.x[q]);
      fill_strain_matrix(space, b, g, B);
      const Point xq = g.p0 + g.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
      const Eigen::VectorXd S = stress_at(xq);
      if (S.size() != vd) throw DimensionMismatch("stress field has wrong slot count");
      const double wq = rule.w[q] * g.detJ;
      const Eigen::VectorXd row = wq * (S.transpose() * B).transpose();
      for (int k = 0; k < nb; ++k)
        for (int c = 0; c < d; ++c) L[space.dof(ids[k], c)] += row[k * d + c];
    }
  }
  return L;
}

Eigen::VectorXd assemble_div_load(const FeSpace& space, const ScalarCoefficient& g,
                                  const AssemblyOptions& opts) {
  if (space.arity != Arity::vectord) throw SpaceMismatch("div load needs a vector space");
  const Mesh& mesh = space.mesh;
  const int d = mesh.d;
  const QuadRule rule = cell_rule(d, rule_degree(space, opts));
  const int nb = static_cast<int>(space.cell_scalar[0].size());
  Eigen::VectorXd L = Eigen::VectorXd::Zero(space.ndof());
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom geo = cell_geometry(mesh, cell);
    const auto& ids = space.cell_scalar[cell];
    for (size_t q = 0; q < rule.x.size(); ++q) {
      const BasisEval b = eval_reference_basis(d, space.order, rule.x[q]);
      const Point xq = geo.p0 + geo.J * Eigen::Vector2d(rule.x[q][0], rule.x[q][1]);
      const double gv = g(xq);
      const double wq = rule.w[q] * geo.detJ;
      for (int k = 0; k < nb; ++k) {
        const Eigen::Vector2d G = geo.invJT * b.grad[k];
        for (int c = 0; c < d; ++c) L[space.dof(ids[k], c)] += wq * gv * G[c];
      }
    }
  }
  return L;
}

}  // namespace pmel
