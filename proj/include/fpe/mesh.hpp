#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpe {

using Point = std::array<double, 2>;

enum class BcTag { Dirichlet, Neumann, Robin };

std::string to_string(BcTag tag);
BcTag parse_bc_tag(const std::string& s);

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Axis-aligned box. In 1D only lo[0], hi[0] are used.
struct Box {
  int dim = 1;
  Point lo{0.0, 0.0};
  Point hi{1.0, 1.0};

  double measure() const;
};

// Boundary side tags of a box: 1D {left, right}; 2D {left, right, bottom, top}.
struct SideTags {
  BcTag left = BcTag::Dirichlet;
  BcTag right = BcTag::Dirichlet;
  BcTag bottom = BcTag::Dirichlet;
  BcTag top = BcTag::Dirichlet;

  static SideTags all(BcTag t) { return {t, t, t, t}; }
};

struct BoundaryFacet {
  std::array<int, 2> v{-1, -1};  // 1D facets use v[0] only
  BcTag tag = BcTag::Dirichlet;
};

// Simplicial mesh. A 2D cell (a,b,c) carries its refinement edge a-b; c is the
// newest vertex. 1D cells use c = -1.
struct Mesh {
  int dim = 1;
  Box box;
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<BoundaryFacet> bfacets;
  std::vector<int> parent;  // parent cell in the previous mesh, -1 if none

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int verts_per_cell() const { return dim + 1; }

  double cell_measure(int k) const;
  double cell_diameter(int k) const;
  Point centroid(int k) const;
  double total_measure() const;

  // throws MeshError when an invariant fails
  void validate() const;
};

struct RefinementPlan {
  std::vector<int> marked_cells;
  std::vector<int> closure_cells;  // filled by refine_marked
};

Mesh interval_mesh(double a, double b, int n, BcTag left = BcTag::Dirichlet,
                   BcTag right = BcTag::Dirichlet);
// n_x by n_y rectangles, each cut along its SW-NE diagonal
Mesh rectangle_mesh(const Box& box, int nx, int ny, const SideTags& tags = {});
Mesh unit_square_mesh(int n, const SideTags& tags = {});

Mesh refine_uniform(const Mesh& mesh);
Mesh refine_marked(const Mesh& mesh, RefinementPlan& plan);
Mesh refine_marked(const Mesh& mesh, const std::vector<int>& marked);

double min_cell_diameter(const Mesh& mesh);

struct ConformityReport {
  bool ok = true;
  std::string message;
};
// brute-force facet and hanging-node scan
ConformityReport check_conformity(const Mesh& mesh);

// edges of a 2D mesh: sorted vertex pairs, plus cell -> 3 edge ids, where
// local edge i is opposite local vertex i
struct EdgeTable {
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> cell_edges;
  std::vector<std::array<int, 2>> edge_cells;  // -1 if boundary
};
EdgeTable build_edges(const Mesh& mesh);

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void write_mesh_file(const std::string& path, const Mesh& mesh);
Mesh read_mesh_file(const std::string& path);

}  // namespace fpe
