#include "pmel/fe_space.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pmel/errors.hpp"
#include "pmel/tensor.hpp"

namespace pmel {

int arity_components(Arity arity, int d) {
  switch (arity) {
    case Arity::scalar:
      return 1;
    case Arity::vectord:
      return d;
    case Arity::symtensor:
      return voigt_dim(d);
  }
  return 1;
}

namespace {

int local_basis_count(int d, int order) {
  if (order == 0) return 1;
  if (d == 1) return order + 1;
  return order == 1 ? 3 : 6;
}

}  // namespace

BasisEval eval_reference_basis(int d, int order, const Point& xhat) {
  BasisEval b;
  b.nb = local_basis_count(d, order);
  if (order == 0) {
    b.val[0] = 1.0;
    b.grad[0].setZero();
    return b;
  }
  if (d == 1) {
    const double t = xhat[0];
    if (order == 1) {
      b.val[0] = 1.0 - t;
      b.val[1] = t;
      b.grad[0] = Eigen::Vector2d(-1.0, 0.0);
      b.grad[1] = Eigen::Vector2d(1.0, 0.0);
    } else {
      b.val[0] = (1.0 - t) * (1.0 - 2.0 * t);
      b.val[1] = t * (2.0 * t - 1.0);
      b.val[2] = 4.0 * t * (1.0 - t);
      b.grad[0] = Eigen::Vector2d(4.0 * t - 3.0, 0.0);
      b.grad[1] = Eigen::Vector2d(4.0 * t - 1.0, 0.0);
      b.grad[2] = Eigen::Vector2d(4.0 - 8.0 * t, 0.0);
    }
    return b;
  }
  const double l1 = xhat[0], l2 = xhat[1], l0 = 1.0 - l1 - l2;
  const Eigen::Vector2d g0(-1.0, -1.0), g1(1.0, 0.0), g2(0.0, 1.0);
  if (order == 1) {
    b.val[0] = l0;
    b.val[1] = l1;
    b.val[2] = l2;
    b.grad[0] = g0;
    b.grad[1] = g1;
    b.grad[2] = g2;
    return b;
  }
  b.val[0] = l0 * (2.0 * l0 - 1.0);
  b.val[1] = l1 * (2.0 * l1 - 1.0);
  b.val[2] = l2 * (2.0 * l2 - 1.0);
  b.val[3] = 4.0 * l0 * l1;
  b.val[4] = 4.0 * l1 * l2;
  b.val[5] = 4.0 * l2 * l0;
  b.grad[0] = (4.0 * l0 - 1.0) * g0;
  b.grad[1] = (4.0 * l1 - 1.0) * g1;
  b.grad[2] = (4.0 * l2 - 1.0) * g2;
  b.grad[3] = 4.0 * (l1 * g0 + l0 * g1);
  b.grad[4] = 4.0 * (l2 * g1 + l1 * g2);
  b.grad[5] = 4.0 * (l0 * g2 + l2 * g0);
  return b;
}

FeSpace make_space(const Mesh& mesh, int order, Arity arity, DirichletTag dirichlet) {
  if (order < 0 || order > 2) throw ValidationFailure("element order must be 0, 1, or 2");
  FeSpace sp;
  sp.mesh = mesh;
  sp.order = order;
  sp.arity = arity;
  sp.dirichlet = dirichlet;
  sp.ncomp = arity_components(arity, mesh.d);
  sp.cell_scalar.resize(mesh.ncells());

  if (order == 0) {
    sp.nscalar = mesh.ncells();
    sp.scalar_x.resize(sp.nscalar);
    for (int c = 0; c < mesh.ncells(); ++c) {
      sp.cell_scalar[c] = {c};
      Point centroid = Point::Zero();
      for (int k = 0; k < mesh.verts_per_cell(); ++k) centroid += mesh.nodes[mesh.cells[c][k]];
      sp.scalar_x[c] = centroid / mesh.verts_per_cell();
    }
  } else if (order == 1) {
    sp.nscalar = mesh.nverts();
    sp.scalar_x = mesh.nodes;
    for (int c = 0; c < mesh.ncells(); ++c) {
      sp.cell_scalar[c].assign(mesh.cells[c].begin(),
                               mesh.cells[c].begin() + mesh.verts_per_cell());
    }
  } else if (mesh.d == 1) {
    // vertices then one bubble per interval
    sp.nscalar = mesh.nverts() + mesh.ncells();
    sp.scalar_x = mesh.nodes;
    sp.scalar_x.resize(sp.nscalar);
    for (int c = 0; c < mesh.ncells(); ++c) {
      const int mid = mesh.nverts() + c;
      sp.cell_scalar[c] = {mesh.cells[c][0], mesh.cells[c][1], mid};
      sp.scalar_x[mid] = 0.5 * (mesh.nodes[mesh.cells[c][0]] + mesh.nodes[mesh.cells[c][1]]);
    }
  } else {
    // vertices then edge midpoints, edges numbered on first appearance
    std::unordered_map<long long, int> edge_id;
    sp.scalar_x = mesh.nodes;
    auto edge_dof = [&](int a, int b) {
      if (a > b) std::swap(a, b);
      const long long key = static_cast<long long>(a) * mesh.nverts() + b;
      auto it = edge_id.find(key);
      if (it != edge_id.end()) return mesh.nverts() + it->second;
      const int id = static_cast<int>(edge_id.size());
      edge_id.emplace(key, id);
      sp.scalar_x.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
      return mesh.nverts() + id;
    };
    for (int c = 0; c < mesh.ncells(); ++c) {
      const auto& v = mesh.cells[c];
      sp.cell_scalar[c] = {v[0], v[1], v[2], edge_dof(v[0], v[1]), edge_dof(v[1], v[2]),
                           edge_dof(v[2], v[0])};
    }
    sp.nscalar = static_cast<int>(sp.scalar_x.size());
  }

  sp.free_index.assign(sp.ndof(), -1);
  int next = 0;
  for (int s = 0; s < sp.nscalar; ++s) {
    const bool constrained =
        order >= 1 && on_dirichlet(mesh, sp.scalar_x[s], dirichlet);
    for (int c = 0; c < sp.ncomp; ++c)
      sp.free_index[sp.dof(s, c)] = constrained ? -1 : next++;
  }
  sp.nfree = next;
  return sp;
}

Eigen::VectorXd interpolate(const FeSpace& space,
                            const std::function<Eigen::VectorXd(const Point&)>& fn) {
  Eigen::VectorXd out(space.ndof());
  for (int s = 0; s < space.nscalar; ++s) {
    const Eigen::VectorXd v = fn(space.scalar_x[s]);
    if (v.size() != space.ncomp)
      throw DimensionMismatch("interpolated function has wrong component count");
    for (int c = 0; c < space.ncomp; ++c) out[space.dof(s, c)] = v[c];
  }
  return out;
}

Eigen::VectorXd interpolate_scalar(const FeSpace& space,
                                   const std::function<double(const Point&)>& fn) {
  if (space.ncomp != 1) throw SpaceMismatch("scalar interpolation on non-scalar space");
  Eigen::VectorXd out(space.ndof());
  for (int s = 0; s < space.nscalar; ++s) out[s] = fn(space.scalar_x[s]);
  return out;
}

namespace {

struct CellGeom {
  Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d invJT = Eigen::Matrix2d::Identity();
  double detJ = 1.0;
  Point p0 = Point::Zero();
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

// Locate the cell containing x and its reference coordinates.
void locate(const Mesh& mesh, const Point& x, int& cell, Point& xhat) {
  const int n = mesh.n;
  auto clamp_cell = [n](double t) {
    int i = static_cast<int>(std::floor(t));
    return std::min(n - 1, std::max(0, i));
  };
  if (mesh.d == 1) {
    cell = clamp_cell(x[0] * n);
    xhat = Point(x[0] * n - cell, 0.0);
    return;
  }
  const int i = clamp_cell(x[0] * n);
  const int j = clamp_cell(x[1] * n);
  const double s = x[0] * n - i;
  const double t = x[1] * n - j;
  if (t <= s) {
    cell = 2 * (i + j * n);
    xhat = Point(s - t, t);
  } else {
    cell = 2 * (i + j * n) + 1;
    xhat = Point(s, t - s);
  }
}

}  // namespace

Eigen::VectorXd evaluate_field(const FeSpace& space, const Eigen::VectorXd& coeffs,
                               const Point& x) {
  if (coeffs.size() != space.ndof()) throw DimensionMismatch("coefficient size mismatch");
  int cell;
  Point xhat;
  locate(space.mesh, x, cell, xhat);
  const BasisEval b = eval_reference_basis(space.mesh.d, space.order, xhat);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.ncomp);
  const auto& ids = space.cell_scalar[cell];
  for (int k = 0; k < b.nb; ++k)
    for (int c = 0; c < space.ncomp; ++c) out[c] += coeffs[space.dof(ids[k], c)] * b.val[k];
  return out;
}

Eigen::MatrixXd evaluate_field_gradient(const FeSpace& space,
                                        const Eigen::VectorXd& coeffs, const Point& x) {
  if (coeffs.size() != space.ndof()) throw DimensionMismatch("coefficient size mismatch");
  int cell;
  Point xhat;
  locate(space.mesh, x, cell, xhat);
  const BasisEval b = eval_reference_basis(space.mesh.d, space.order, xhat);
  const CellGeom g = cell_geometry(space.mesh, cell);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(space.ncomp, space.mesh.d);
  const auto& ids = space.cell_scalar[cell];
  for (int k = 0; k < b.nb; ++k) {
    const Eigen::Vector2d grad = g.invJT * b.grad[k];
    for (int c = 0; c < space.ncomp; ++c)
      for (int e = 0; e < space.mesh.d; ++e)
        out(c, e) += coeffs[space.dof(ids[k], c)] * grad[e];
  }
  return out;
}

SpMat restrict_matrix(const SpMat& full, const FeSpace& rows, const FeSpace& cols) {
  if (full.rows() != rows.ndof() || full.cols() != cols.ndof())
    throw DimensionMismatch("restriction shape mismatch");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(full.nonZeros());
  for (int k = 0; k < full.outerSize(); ++k) {
    for (SpMat::InnerIterator it(full, k); it; ++it) {
      const int r = rows.free_index[it.row()];
      const int c = cols.free_index[it.col()];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  }
  SpMat out(rows.nfree, cols.nfree);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

SpMat restrict_matrix(const SpMat& full, const FeSpace& space) {
  return restrict_matrix(full, space, space);
}

Eigen::VectorXd restrict_vector(const Eigen::VectorXd& full, const FeSpace& space) {
  if (full.size() != space.ndof()) throw DimensionMismatch("restriction size mismatch");
  Eigen::VectorXd out(space.nfree);
  for (int i = 0; i < space.ndof(); ++i)
    if (space.free_index[i] >= 0) out[space.free_index[i]] = full[i];
  return out;
}

Eigen::VectorXd prolong_vector(const Eigen::VectorXd& free, const FeSpace& space) {
  if (free.size() != space.nfree) throw DimensionMismatch("prolongation size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.ndof());
  for (int i = 0; i < space.ndof(); ++i)
    if (space.free_index[i] >= 0) out[i] = free[space.free_index[i]];
  return out;
}

PeriodicFeSpace make_periodic_space(const Mesh& mesh, int order, Arity arity) {
  if (order < 1) throw ValidationFailure("periodic identification needs a nodal basis");
  PeriodicFeSpace sp;
  sp.base = make_space(mesh, order, arity, DirichletTag::none);
  const int n2 = 2 * mesh.n;  // positions are multiples of h/2
  std::unordered_map<long long, int> first_at;
  sp.scalar_rep.resize(sp.base.nscalar);
  for (int s = 0; s < sp.base.nscalar; ++s) {
    const Point& x = sp.base.scalar_x[s];
    long long ix = std::llround(x[0] * n2) % n2;
    long long iy = mesh.d == 2 ? std::llround(x[1] * n2) % n2 : 0;
    const long long key = ix + iy * (n2 + 1);
    auto it = first_at.find(key);
    if (it == first_at.end()) {
      first_at.emplace(key, s);
      sp.scalar_rep[s] = s;
    } else {
      sp.scalar_rep[s] = it->second;
    }
  }
  const int ncomp = sp.base.ncomp;
  sp.free_index.assign(sp.base.ndof(), -1);
  int next = 0;
  for (int s = 0; s < sp.base.nscalar; ++s) {
    if (sp.scalar_rep[s] == s) {
      for (int c = 0; c < ncomp; ++c) sp.free_index[sp.base.dof(s, c)] = next++;
    }
  }
  for (int s = 0; s < sp.base.nscalar; ++s) {
    if (sp.scalar_rep[s] != s) {
      for (int c = 0; c < ncomp; ++c)
        sp.free_index[sp.base.dof(s, c)] = sp.free_index[sp.base.dof(sp.scalar_rep[s], c)];
    }
  }
  sp.nfree = next;

  // componentwise means by exact quadrature of the identified basis
  sp.mean_rows = Eigen::MatrixXd::Zero(ncomp, sp.nfree);
  std::vector<double> scalar_integral(sp.base.nscalar, 0.0);
  // degree-2 nodes on the reference simplex integrate P2 exactly
  std::vector<Point> qx;
  std::vector<double> qw;
  if (mesh.d == 1) {
    const double r = 0.5 / std::sqrt(3.0);
    qx = {Point(0.5 - r, 0.0), Point(0.5 + r, 0.0)};
    qw = {0.5, 0.5};
  } else {
    qx = {Point(1.0 / 6, 1.0 / 6), Point(2.0 / 3, 1.0 / 6), Point(1.0 / 6, 2.0 / 3)};
    qw = {1.0 / 6, 1.0 / 6, 1.0 / 6};
  }
  for (int cell = 0; cell < mesh.ncells(); ++cell) {
    const CellGeom g = cell_geometry(mesh, cell);
    const auto& ids = sp.base.cell_scalar[cell];
    for (size_t q = 0; q < qx.size(); ++q) {
      const BasisEval b = eval_reference_basis(mesh.d, order, qx[q]);
      for (int k = 0; k < b.nb; ++k) scalar_integral[ids[k]] += qw[q] * b.val[k] * g.detJ;
    }
  }
  for (int s = 0; s < sp.base.nscalar; ++s)
    for (int c = 0; c < ncomp; ++c)
      sp.mean_rows(c, sp.free_index[sp.base.dof(s, c)]) += scalar_integral[s];
  return sp;
}

SpMat fold_periodic(const SpMat& full, const PeriodicFeSpace& rows,
                    const PeriodicFeSpace& cols) {
  if (full.rows() != rows.base.ndof() || full.cols() != cols.base.ndof())
    throw DimensionMismatch("periodic fold shape mismatch");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(full.nonZeros());
  for (int k = 0; k < full.outerSize(); ++k)
    for (SpMat::InnerIterator it(full, k); it; ++it)
      trip.emplace_back(rows.free_index[it.row()], cols.free_index[it.col()], it.value());
  SpMat out(rows.nfree, cols.nfree);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

SpMat fold_periodic(const SpMat& full, const PeriodicFeSpace& space) {
  return fold_periodic(full, space, space);
}

SpMat fold_columns(const SpMat& full, const PeriodicFeSpace& cols) {
  if (full.cols() != cols.base.ndof())
    throw DimensionMismatch("periodic column fold shape mismatch");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(full.nonZeros());
  for (int k = 0; k < full.outerSize(); ++k)
    for (SpMat::InnerIterator it(full, k); it; ++it)
      trip.emplace_back(it.row(), cols.free_index[it.col()], it.value());
  SpMat out(full.rows(), cols.nfree);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Eigen::VectorXd fold_vector(const Eigen::VectorXd& full, const PeriodicFeSpace& space) {
  if (full.size() != space.base.ndof()) throw DimensionMismatch("periodic fold size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.nfree);
  for (int i = 0; i < space.base.ndof(); ++i) out[space.free_index[i]] += full[i];
  return out;
}

Eigen::VectorXd fold_nodal(const Eigen::VectorXd& full, const PeriodicFeSpace& space) {
  if (full.size() != space.base.ndof()) throw DimensionMismatch("periodic fold size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.nfree);
  for (int i = 0; i < space.base.ndof(); ++i) out[space.free_index[i]] = full[i];
  return out;
}

Eigen::VectorXd unfold_vector(const Eigen::VectorXd& folded, const PeriodicFeSpace& space) {
  if (folded.size() != space.nfree) throw DimensionMismatch("periodic unfold size mismatch");
  Eigen::VectorXd out(space.base.ndof());
  for (int i = 0; i < space.base.ndof(); ++i) out[i] = folded[space.free_index[i]];
  return out;
}

}  // namespace pmel
