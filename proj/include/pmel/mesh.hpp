#pragma once
// Structured simplicial meshes on the unit interval (d = 1) and the unit
// square (d = 2).  The square is cut into n x n cells, each split by the
// (i,j) -> (i+1,j+1) diagonal into two counterclockwise triangles, so every
// cell has the same volume and opposite boundary faces match node-for-node.
#include <array>
#include <vector>

#include <Eigen/Core>

namespace pmel {

using Point = Eigen::Vector2d;  // d = 1 uses the first component only

enum class DirichletTag { none, left, all };

struct Mesh {
  int d = 2;
  int n = 1;       // subdivisions per axis
  double h = 1.0;  // grid spacing 1/n
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> cells;  // vertex ids; third slot -1 in 1d

  int nverts() const { return static_cast<int>(nodes.size()); }
  int ncells() const { return static_cast<int>(cells.size()); }
  int verts_per_cell() const { return d + 1; }
  double cell_volume() const { return d == 1 ? h : 0.5 * h * h; }
  int vertex_id(int i, int j) const { return i + j * (n + 1); }
};

Mesh make_mesh(int d, int n);

// Whether a nodal position lies on the constrained boundary part.
bool on_dirichlet(const Mesh& mesh, const Point& x, DirichletTag tag);

}  // namespace pmel
