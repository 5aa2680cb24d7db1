#include "pmel/mesh.hpp"

#include <cmath>

#include "pmel/errors.hpp"

namespace pmel {

Mesh make_mesh(int d, int n) {
  if (d != 1 && d != 2) throw ValidationFailure("mesh dimension must be 1 or 2");
  if (n < 1) throw ValidationFailure("mesh needs at least one subdivision");
  Mesh mesh;
  mesh.d = d;
  mesh.n = n;
  mesh.h = 1.0 / n;
  if (d == 1) {
    mesh.nodes.reserve(n + 1);
    for (int i = 0; i <= n; ++i) mesh.nodes.push_back(Point(i * mesh.h, 0.0));
    mesh.cells.reserve(n);
    for (int i = 0; i < n; ++i) mesh.cells.push_back({i, i + 1, -1});
    return mesh;
  }
  mesh.nodes.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) mesh.nodes.push_back(Point(i * mesh.h, j * mesh.h));
  mesh.cells.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = mesh.vertex_id(i, j);
      const int v10 = mesh.vertex_id(i + 1, j);
      const int v01 = mesh.vertex_id(i, j + 1);
      const int v11 = mesh.vertex_id(i + 1, j + 1);
      mesh.cells.push_back({v00, v10, v11});
      mesh.cells.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

bool on_dirichlet(const Mesh& mesh, const Point& x, DirichletTag tag) {
  constexpr double tol = 1e-9;
  switch (tag) {
    case DirichletTag::none:
      return false;
    case DirichletTag::left:
      return std::abs(x[0]) < tol;
    case DirichletTag::all:
      if (std::abs(x[0]) < tol || std::abs(x[0] - 1.0) < tol) return true;
      if (mesh.d == 2 && (std::abs(x[1]) < tol || std::abs(x[1] - 1.0) < tol)) return true;
      return false;
  }
  return false;
}

}  // namespace pmel
