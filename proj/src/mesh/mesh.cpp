#include "fpe/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace fpe {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double dist(const Point& p, const Point& q) {
  return std::hypot(p[0] - q[0], p[1] - q[1]);
}

Point mid(const Point& p, const Point& q) {
  return {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])};
}

}  // namespace

std::string to_string(BcTag tag) {
  switch (tag) {
    case BcTag::Dirichlet: return "DIRICHLET";
    case BcTag::Neumann: return "NEUMANN";
    case BcTag::Robin: return "ROBIN";
  }
  return "?";
}

BcTag parse_bc_tag(const std::string& s) {
  std::string u = s;
  for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "DIRICHLET") return BcTag::Dirichlet;
  if (u == "NEUMANN") return BcTag::Neumann;
  if (u == "ROBIN") return BcTag::Robin;
  throw MeshError("unknown boundary tag '" + s + "'");
}

double Box::measure() const {
  double m = hi[0] - lo[0];
  if (dim == 2) m *= hi[1] - lo[1];
  return m;
}

double Mesh::cell_measure(int k) const {
  const auto& c = cells[k];
  const Point& a = vertices[c[0]];
  const Point& b = vertices[c[1]];
  if (dim == 1) return std::abs(b[0] - a[0]);
  const Point& p = vertices[c[2]];
  return 0.5 * std::abs((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]));
}

double Mesh::cell_diameter(int k) const {
  const auto& c = cells[k];
  if (dim == 1) return std::abs(vertices[c[1]][0] - vertices[c[0]][0]);
  return std::max({dist(vertices[c[0]], vertices[c[1]]), dist(vertices[c[1]], vertices[c[2]]),
                   dist(vertices[c[2]], vertices[c[0]])});
}

Point Mesh::centroid(int k) const {
  const auto& c = cells[k];
  Point s{0.0, 0.0};
  const int nv = verts_per_cell();
  for (int i = 0; i < nv; ++i) {
    s[0] += vertices[c[i]][0];
    s[1] += vertices[c[i]][1];
  }
  return {s[0] / nv, s[1] / nv};
}

double Mesh::total_measure() const {
  double s = 0.0;
  for (int k = 0; k < n_cells(); ++k) s += cell_measure(k);
  return s;
}

EdgeTable build_edges(const Mesh& mesh) {
  EdgeTable t;
  if (mesh.dim != 2) return t;
  std::unordered_map<std::uint64_t, int> ids;
  ids.reserve(mesh.cells.size() * 2);
  t.cell_edges.resize(mesh.cells.size());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const auto& c = mesh.cells[k];
    for (int i = 0; i < 3; ++i) {
      int a = c[(i + 1) % 3], b = c[(i + 2) % 3];
      auto key = edge_key(a, b);
      auto it = ids.find(key);
      int id;
      if (it == ids.end()) {
        id = static_cast<int>(t.edges.size());
        ids.emplace(key, id);
        t.edges.push_back({std::min(a, b), std::max(a, b)});
        t.edge_cells.push_back({k, -1});
      } else {
        id = it->second;
        if (t.edge_cells[id][1] != -1)
          throw MeshError("edge shared by more than two cells");
        t.edge_cells[id][1] = k;
      }
      t.cell_edges[k][i] = id;
    }
  }
  return t;
}

void Mesh::validate() const {
  if (dim != 1 && dim != 2) throw MeshError("dimension must be 1 or 2");
  for (int k = 0; k < n_cells(); ++k) {
    for (int i = 0; i < verts_per_cell(); ++i)
      if (cells[k][i] < 0 || cells[k][i] >= n_vertices()) throw MeshError("bad vertex index");
    if (!(cell_measure(k) > 0.0)) throw MeshError("cell " + std::to_string(k) + " has zero measure");
  }
  const double tol = 1e-12 * std::max(1.0, box.measure());
  if (std::abs(total_measure() - box.measure()) > tol) throw MeshError("cells do not tile the box");
  if (dim == 1) {
    if (bfacets.size() != 2) throw MeshError("1D mesh needs two boundary points");
    return;
  }
  EdgeTable t = build_edges(*this);
  std::unordered_map<std::uint64_t, int> bset;
  for (const auto& f : bfacets) bset[edge_key(f.v[0], f.v[1])]++;
  std::size_t nb = 0;
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    if (t.edge_cells[e][1] != -1) continue;
    ++nb;
    auto it = bset.find(edge_key(t.edges[e][0], t.edges[e][1]));
    if (it == bset.end() || it->second != 1)
      throw MeshError("boundary edge without exactly one tag");
  }
  if (nb != bfacets.size()) throw MeshError("tagged facet is not a boundary edge");
}

ConformityReport check_conformity(const Mesh& mesh) {
  ConformityReport r;
  if (mesh.dim == 1) return r;
  EdgeTable t;
  try {
    t = build_edges(mesh);
  } catch (const MeshError& e) {
    return {false, e.what()};
  }
  const double scale = std::max(mesh.box.hi[0] - mesh.box.lo[0], mesh.box.hi[1] - mesh.box.lo[1]);
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const Point& p = mesh.vertices[t.edges[e][0]];
    const Point& q = mesh.vertices[t.edges[e][1]];
    const double len = dist(p, q);
    const double xmin = std::min(p[0], q[0]), xmax = std::max(p[0], q[0]);
    const double ymin = std::min(p[1], q[1]), ymax = std::max(p[1], q[1]);
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      if (v == t.edges[e][0] || v == t.edges[e][1]) continue;
      const Point& x = mesh.vertices[v];
      if (x[0] < xmin - 1e-14 || x[0] > xmax + 1e-14 || x[1] < ymin - 1e-14 || x[1] > ymax + 1e-14)
        continue;
      double cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
      if (std::abs(cross) <= 1e-12 * scale * len) {
        std::ostringstream os;
        os << "hanging vertex " << v << " on edge " << e;
        return {false, os.str()};
      }
    }
  }
  return r;
}

Mesh interval_mesh(double a, double b, int n, BcTag left, BcTag right) {
  if (n < 1 || !(b > a)) throw MeshError("invalid interval mesh request");
  Mesh m;
  m.dim = 1;
  m.box.dim = 1;
  m.box.lo = {a, 0.0};
  m.box.hi = {b, 0.0};
  for (int i = 0; i <= n; ++i) m.vertices.push_back({a + (b - a) * i / n, 0.0});
  for (int i = 0; i < n; ++i) m.cells.push_back({i, i + 1, -1});
  m.bfacets.push_back({{0, -1}, left});
  m.bfacets.push_back({{n, -1}, right});
  m.parent.assign(n, -1);
  return m;
}

Mesh rectangle_mesh(const Box& box, int nx, int ny, const SideTags& tags) {
  if (nx < 1 || ny < 1) throw MeshError("invalid rectangle mesh request");
  Mesh m;
  m.dim = 2;
  m.box = box;
  m.box.dim = 2;
  const double hx = (box.hi[0] - box.lo[0]) / nx, hy = (box.hi[1] - box.lo[1]) / ny;
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({i == nx ? box.hi[0] : box.lo[0] + i * hx,
                            j == ny ? box.hi[1] : box.lo[1] + j * hy});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int sw = vid(i, j), se = vid(i + 1, j), nw = vid(i, j + 1), ne = vid(i + 1, j + 1);
      // refinement edge = the diagonal
      m.cells.push_back({sw, ne, se});
      m.cells.push_back({ne, sw, nw});
    }
  for (int i = 0; i < nx; ++i) m.bfacets.push_back({{vid(i, 0), vid(i + 1, 0)}, tags.bottom});
  for (int j = 0; j < ny; ++j) m.bfacets.push_back({{vid(nx, j), vid(nx, j + 1)}, tags.right});
  for (int i = nx; i > 0; --i) m.bfacets.push_back({{vid(i, ny), vid(i - 1, ny)}, tags.top});
  for (int j = ny; j > 0; --j) m.bfacets.push_back({{vid(0, j), vid(0, j - 1)}, tags.left});
  m.parent.assign(m.cells.size(), -1);
  return m;
}

Mesh unit_square_mesh(int n, const SideTags& tags) {
  Box b;
  b.dim = 2;
  b.lo = {0.0, 0.0};
  b.hi = {1.0, 1.0};
  return rectangle_mesh(b, n, n, tags);
}

Mesh refine_uniform(const Mesh& mesh) {
  Mesh out;
  out.dim = mesh.dim;
  out.box = mesh.box;
  out.vertices = mesh.vertices;
  if (mesh.dim == 1) {
    for (int k = 0; k < mesh.n_cells(); ++k) {
      const auto& c = mesh.cells[k];
      int m = out.n_vertices();
      out.vertices.push_back(mid(mesh.vertices[c[0]], mesh.vertices[c[1]]));
      out.cells.push_back({c[0], m, -1});
      out.cells.push_back({m, c[1], -1});
      out.parent.push_back(k);
      out.parent.push_back(k);
    }
    out.bfacets = mesh.bfacets;
    return out;
  }
  EdgeTable t = build_edges(mesh);
  std::vector<int> emid(t.edges.size());
  std::unordered_map<std::uint64_t, int> eid;
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    emid[e] = out.n_vertices();
    out.vertices.push_back(mid(mesh.vertices[t.edges[e][0]], mesh.vertices[t.edges[e][1]]));
    eid[edge_key(t.edges[e][0], t.edges[e][1])] = static_cast<int>(e);
  }
  out.cells.reserve(4 * mesh.cells.size());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const auto& c = mesh.cells[k];
    const int a = c[0], b = c[1], p = c[2];
    const int mab = emid[t.cell_edges[k][2]];
    const int mbc = emid[t.cell_edges[k][0]];
    const int mca = emid[t.cell_edges[k][1]];
    out.cells.push_back({a, mab, mca});
    out.cells.push_back({mab, b, mbc});
    out.cells.push_back({mca, mbc, p});
    out.cells.push_back({mbc, mca, mab});
    for (int i = 0; i < 4; ++i) out.parent.push_back(k);
  }
  for (const auto& f : mesh.bfacets) {
    int m = emid[eid.at(edge_key(f.v[0], f.v[1]))];
    out.bfacets.push_back({{f.v[0], m}, f.tag});
    out.bfacets.push_back({{m, f.v[1]}, f.tag});
  }
  return out;
}

Mesh refine_marked(const Mesh& mesh, const std::vector<int>& marked) {
  RefinementPlan plan;
  plan.marked_cells = marked;
  return refine_marked(mesh, plan);
}

Mesh refine_marked(const Mesh& mesh, RefinementPlan& plan) {
  if (plan.marked_cells.empty()) throw MeshError("EmptyMarkSet: no cells marked");
  for (int k : plan.marked_cells)
    if (k < 0 || k >= mesh.n_cells()) throw MeshError("marked cell index out of range");
  plan.closure_cells.clear();

  Mesh out;
  out.dim = mesh.dim;
  out.box = mesh.box;
  out.vertices = mesh.vertices;

  if (mesh.dim == 1) {
    std::vector<char> mk(mesh.cells.size(), 0);
    for (int k : plan.marked_cells) mk[k] = 1;
    for (int k = 0; k < mesh.n_cells(); ++k) {
      const auto& c = mesh.cells[k];
      if (!mk[k]) {
        out.cells.push_back(c);
        out.parent.push_back(k);
        continue;
      }
      int m = out.n_vertices();
      out.vertices.push_back(mid(mesh.vertices[c[0]], mesh.vertices[c[1]]));
      out.cells.push_back({c[0], m, -1});
      out.cells.push_back({m, c[1], -1});
      out.parent.push_back(k);
      out.parent.push_back(k);
    }
    out.bfacets = mesh.bfacets;
    return out;
  }

  EdgeTable t = build_edges(mesh);
  std::unordered_map<std::uint64_t, int> eid;
  eid.reserve(t.edges.size() * 2);
  for (std::size_t e = 0; e < t.edges.size(); ++e)
    eid[edge_key(t.edges[e][0], t.edges[e][1])] = static_cast<int>(e);

  std::vector<char> emark(t.edges.size(), 0);
  std::vector<char> cmark(mesh.cells.size(), 0);
  for (int k : plan.marked_cells) {
    cmark[k] = 1;
    emark[t.cell_edges[k][2]] = 1;
  }
  // closure: a cell with any marked edge must bisect its refinement edge
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k < mesh.n_cells(); ++k) {
      const auto& ce = t.cell_edges[k];
      if (emark[ce[2]]) continue;
      if (emark[ce[0]] || emark[ce[1]]) {
        emark[ce[2]] = 1;
        changed = true;
      }
    }
  }
  for (int k = 0; k < mesh.n_cells(); ++k)
    if (!cmark[k] && emark[t.cell_edges[k][2]]) plan.closure_cells.push_back(k);

  std::vector<int> emid(t.edges.size(), -1);
  for (std::size_t e = 0; e < t.edges.size(); ++e)
    if (emark[e]) {
      emid[e] = out.n_vertices();
      out.vertices.push_back(mid(mesh.vertices[t.edges[e][0]], mesh.vertices[t.edges[e][1]]));
    }
  auto marked_mid = [&](int a, int b) -> int {
    auto it = eid.find(edge_key(a, b));
    if (it == eid.end()) return -1;
    return emid[it->second];
  };
  // recursive bisection, children (c,a,m) and (b,c,m)
  auto split = [&](auto&& self, int a, int b, int c, int par) -> void {
    int m = marked_mid(a, b);
    if (m < 0) {
      out.cells.push_back({a, b, c});
      out.parent.push_back(par);
      return;
    }
    self(self, c, a, m, par);
    self(self, b, c, m, par);
  };
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const auto& c = mesh.cells[k];
    split(split, c[0], c[1], c[2], k);
  }
  for (const auto& f : mesh.bfacets) {
    int m = marked_mid(f.v[0], f.v[1]);
    if (m < 0) {
      out.bfacets.push_back(f);
    } else {
      out.bfacets.push_back({{f.v[0], m}, f.tag});
      out.bfacets.push_back({{m, f.v[1]}, f.tag});
    }
  }
  return out;
}

double min_cell_diameter(const Mesh& mesh) {
  double h = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mesh.n_cells(); ++k) h = std::min(h, mesh.cell_diameter(k));
  return h;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << mesh.dim << ' ' << mesh.n_vertices() << ' ' << mesh.n_cells() << ' ' << mesh.bfacets.size()
     << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& v : mesh.vertices) {
    os << v[0];
    if (mesh.dim == 2) os << ' ' << v[1];
    os << '\n';
  }
  for (const auto& c : mesh.cells) {
    os << c[0] << ' ' << c[1];
    if (mesh.dim == 2) os << ' ' << c[2];
    os << '\n';
  }
  for (const auto& f : mesh.bfacets) {
    os << f.v[0];
    if (mesh.dim == 2) os << ' ' << f.v[1];
    os << ' ' << to_string(f.tag) << '\n';
  }
}

Mesh read_mesh(std::istream& is) {
  Mesh m;
  int nv = 0, nc = 0, nb = 0;
  if (!(is >> m.dim >> nv >> nc >> nb)) throw MeshError("bad mesh header");
  if (m.dim != 1 && m.dim != 2) throw MeshError("bad mesh dimension");
  m.vertices.resize(nv, {0.0, 0.0});
  for (auto& v : m.vertices) {
    is >> v[0];
    if (m.dim == 2) is >> v[1];
  }
  m.cells.resize(nc, {-1, -1, -1});
  for (auto& c : m.cells) {
    is >> c[0] >> c[1];
    if (m.dim == 2) is >> c[2];
  }
  m.bfacets.resize(nb);
  for (auto& f : m.bfacets) {
    std::string tag;
    is >> f.v[0];
    if (m.dim == 2) is >> f.v[1];
    is >> tag;
    f.tag = parse_bc_tag(tag);
  }
  if (!is) throw MeshError("truncated mesh file");
  m.box.dim = m.dim;
  m.box.lo = {std::numeric_limits<double>::infinity(), m.dim == 1 ? 0.0 : std::numeric_limits<double>::infinity()};
  m.box.hi = {-std::numeric_limits<double>::infinity(), m.dim == 1 ? 0.0 : -std::numeric_limits<double>::infinity()};
  for (const auto& v : m.vertices)
    for (int d = 0; d < m.dim; ++d) {
      m.box.lo[d] = std::min(m.box.lo[d], v[d]);
      m.box.hi[d] = std::max(m.box.hi[d], v[d]);
    }
  m.parent.assign(nc, -1);
  return m;
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream f(path);
  if (!f) throw MeshError("cannot write " + path);
  write_mesh(f, mesh);
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MeshError("cannot read " + path);
  return read_mesh(f);
}

}  // namespace fpe
