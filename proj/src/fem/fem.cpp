#include "fpe/fem.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace fpe {

// ---------------------------------------------------------------- geometry

Point CellGeometry::map(const Point& xi) const {
  if (dim == 1) return {x0[0] + J[0][0] * xi[0], 0.0};
  return {x0[0] + J[0][0] * xi[0] + J[0][1] * xi[1], x0[1] + J[1][0] * xi[0] + J[1][1] * xi[1]};
}

Point CellGeometry::pull_grad(const double* g) const {
  if (dim == 1) return {K[0][0] * g[0], 0.0};
  return {K[0][0] * g[0] + K[1][0] * g[1], K[0][1] * g[0] + K[1][1] * g[1]};
}

CellGeometry cell_geometry(const Mesh& mesh, int cell) {
  CellGeometry g;
  g.dim = mesh.dim;
  const auto& c = mesh.cells[cell];
  const Point& a = mesh.vertices[c[0]];
  const Point& b = mesh.vertices[c[1]];
  g.x0 = a;
  if (mesh.dim == 1) {
    g.J[0][0] = b[0] - a[0];
    g.K[0][0] = 1.0 / g.J[0][0];
    g.det = std::abs(g.J[0][0]);
    return g;
  }
  const Point& p = mesh.vertices[c[2]];
  g.J[0][0] = b[0] - a[0];
  g.J[0][1] = p[0] - a[0];
  g.J[1][0] = b[1] - a[1];
  g.J[1][1] = p[1] - a[1];
  double d = g.J[0][0] * g.J[1][1] - g.J[0][1] * g.J[1][0];
  g.K[0][0] = g.J[1][1] / d;
  g.K[0][1] = -g.J[0][1] / d;
  g.K[1][0] = -g.J[1][0] / d;
  g.K[1][1] = g.J[0][0] / d;
  g.det = std::abs(d);
  return g;
}

// ---------------------------------------------------------------- reference element

LagrangeRef::LagrangeRef(int dim, int degree) : dim_(dim), degree_(degree) {
  if (degree < 1 || degree > 3) throw FemError("Lagrange degree must be 1..3");
  const int k = degree;
  if (dim == 1) {
    nodes_.push_back({0.0, 0.0});
    nodes_.push_back({1.0, 0.0});
    for (int j = 1; j < k; ++j) nodes_.push_back({static_cast<double>(j) / k, 0.0});
    for (int a = 0; a <= k; ++a) mono_.push_back({a, 0});
  } else {
    const Point v[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    for (int i = 0; i < 3; ++i) nodes_.push_back(v[i]);
    for (int i = 0; i < 3; ++i) {
      const Point& A = v[(i + 1) % 3];
      const Point& B = v[(i + 2) % 3];
      for (int j = 1; j < k; ++j) {
        double s = static_cast<double>(j) / k;
        nodes_.push_back({A[0] + s * (B[0] - A[0]), A[1] + s * (B[1] - A[1])});
      }
    }
    if (k == 3) nodes_.push_back({1.0 / 3.0, 1.0 / 3.0});
    for (int t = 0; t <= k; ++t)
      for (int a = t; a >= 0; --a) mono_.push_back({a, t - a});
  }
  const int n = static_cast<int>(nodes_.size());
  Eigen::MatrixXd V(n, n);
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < n; ++m)
      V(i, m) = std::pow(nodes_[i][0], mono_[m][0]) * std::pow(nodes_[i][1], mono_[m][1]);
  Eigen::MatrixXd C = V.inverse();
  coef_.resize(static_cast<std::size_t>(n) * n);
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i) coef_[m * n + i] = C(m, i);
}

void LagrangeRef::eval(const Point& xi, double* val, double* grad, double* hess) const {
  const int n = size();
  double px[5], py[5];
  px[0] = py[0] = 1.0;
  for (int a = 1; a < 5; ++a) {
    px[a] = px[a - 1] * xi[0];
    py[a] = py[a - 1] * xi[1];
  }
  if (val) std::fill(val, val + n, 0.0);
  if (grad) std::fill(grad, grad + 2 * n, 0.0);
  if (hess) std::fill(hess, hess + 3 * n, 0.0);
  for (int m = 0; m < n; ++m) {
    const int a = mono_[m][0], b = mono_[m][1];
    const double mv = px[a] * py[b];
    const double mx = a > 0 ? a * px[a - 1] * py[b] : 0.0;
    const double my = b > 0 ? b * px[a] * py[b - 1] : 0.0;
    const double mxx = a > 1 ? a * (a - 1) * px[a - 2] * py[b] : 0.0;
    const double mxy = (a > 0 && b > 0) ? a * b * px[a - 1] * py[b - 1] : 0.0;
    const double myy = b > 1 ? b * (b - 1) * px[a] * py[b - 2] : 0.0;
    const double* c = &coef_[m * n];
    for (int i = 0; i < n; ++i) {
      if (c[i] == 0.0) continue;
      if (val) val[i] += c[i] * mv;
      if (grad) {
        grad[2 * i] += c[i] * mx;
        grad[2 * i + 1] += c[i] * my;
      }
      if (hess) {
        hess[3 * i] += c[i] * mxx;
        hess[3 * i + 1] += c[i] * mxy;
        hess[3 * i + 2] += c[i] * myy;
      }
    }
  }
}

const LagrangeRef& lagrange_ref(int dim, int degree) {
  static std::mutex mtx;
  static std::map<std::pair<int, int>, std::unique_ptr<LagrangeRef>> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto& p = cache[{dim, degree}];
  if (!p) p = std::make_unique<LagrangeRef>(dim, degree);
  return *p;
}

// ---------------------------------------------------------------- facets

namespace {

std::uint64_t ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

std::vector<FacetInfo> boundary_facet_info(const Mesh& mesh) {
  std::vector<FacetInfo> out;
  if (mesh.dim == 1) {
    for (const auto& f : mesh.bfacets) {
      for (int k = 0; k < mesh.n_cells(); ++k) {
        const auto& c = mesh.cells[k];
        int loc = -1;
        if (c[1] == f.v[0]) loc = 0;
        if (c[0] == f.v[0]) loc = 1;
        if (loc < 0) continue;
        FacetInfo fi;
        fi.cell = k;
        fi.local = loc;
        fi.tag = f.tag;
        const double x0 = mesh.vertices[c[0]][0], x1 = mesh.vertices[c[1]][0];
        double s = loc == 0 ? (x1 > x0 ? 1.0 : -1.0) : (x0 > x1 ? 1.0 : -1.0);
        fi.normal = {s, 0.0};
        fi.measure = 1.0;
        out.push_back(fi);
        break;
      }
    }
    return out;
  }
  std::unordered_map<std::uint64_t, std::pair<int, int>> owner;
  owner.reserve(mesh.cells.size() * 3);
  std::unordered_map<std::uint64_t, int> count;
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const auto& c = mesh.cells[k];
    for (int i = 0; i < 3; ++i) {
      auto key = ekey(c[(i + 1) % 3], c[(i + 2) % 3]);
      owner[key] = {k, i};
      count[key]++;
    }
  }
  for (const auto& f : mesh.bfacets) {
    auto key = ekey(f.v[0], f.v[1]);
    auto it = owner.find(key);
    if (it == owner.end() || count[key] != 1) throw FemError("boundary facet is not a mesh boundary edge");
    FacetInfo fi;
    fi.cell = it->second.first;
    fi.local = it->second.second;
    fi.tag = f.tag;
    const auto& c = mesh.cells[fi.cell];
    const Point& p = mesh.vertices[c[(fi.local + 1) % 3]];
    const Point& q = mesh.vertices[c[(fi.local + 2) % 3]];
    const Point& o = mesh.vertices[c[fi.local]];
    double tx = q[0] - p[0], ty = q[1] - p[1];
    double len = std::hypot(tx, ty);
    Point n{ty / len, -tx / len};
    if (n[0] * (o[0] - p[0]) + n[1] * (o[1] - p[1]) > 0) n = {-n[0], -n[1]};
    fi.normal = n;
    fi.measure = len;
    out.push_back(fi);
  }
  return out;
}

void facet_rule(int dim, int local, int degree, std::vector<Point>& pts, std::vector<double>& w) {
  pts.clear();
  w.clear();
  if (dim == 1) {
    pts.push_back({local == 0 ? 1.0 : 0.0, 0.0});
    w.push_back(1.0);
    return;
  }
  const Point v[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  const Point& A = v[(local + 1) % 3];
  const Point& B = v[(local + 2) % 3];
  QuadratureRule g = interval_rule(degree);
  for (int i = 0; i < g.size(); ++i) {
    double s = g.points[i][0];
    pts.push_back({A[0] + s * (B[0] - A[0]), A[1] + s * (B[1] - A[1])});
    w.push_back(g.weights[i]);
  }
}

// ---------------------------------------------------------------- spaces

int FeSpace::value_dim() const { return family_ == Family::Lagrange ? 1 : mesh_->dim; }

void FeSpace::build_lagrange_nodes(int k) {
  const Mesh& m = *mesh_;
  const LagrangeRef& ref = lagrange_ref(m.dim, k);
  const int nl = ref.size();
  cell_nodes_.assign(static_cast<std::size_t>(m.n_cells()) * nl, -1);
  const int nv = m.n_vertices();
  int n_nodes = 0;
  if (m.dim == 1) {
    n_nodes = nv + m.n_cells() * (k - 1);
    for (int c = 0; c < m.n_cells(); ++c) {
      int* cn = &cell_nodes_[static_cast<std::size_t>(c) * nl];
      cn[0] = m.cells[c][0];
      cn[1] = m.cells[c][1];
      for (int j = 1; j < k; ++j) cn[1 + j] = nv + c * (k - 1) + (j - 1);
    }
  } else {
    edges_ = build_edges(m);
    const int ne = static_cast<int>(edges_.edges.size());
    const int nint = k == 3 ? 1 : 0;
    n_nodes = nv + ne * (k - 1) + m.n_cells() * nint;
    for (int c = 0; c < m.n_cells(); ++c) {
      int* cn = &cell_nodes_[static_cast<std::size_t>(c) * nl];
      const auto& cv = m.cells[c];
      for (int i = 0; i < 3; ++i) cn[i] = cv[i];
      int pos = 3;
      for (int i = 0; i < 3; ++i) {
        int e = edges_.cell_edges[c][i];
        int A = cv[(i + 1) % 3], B = cv[(i + 2) % 3];
        for (int j = 1; j < k; ++j) {
          int idx = A < B ? j - 1 : (k - 1) - j;
          cn[pos++] = nv + e * (k - 1) + idx;
        }
      }
      if (nint) cn[pos++] = nv + ne * (k - 1) + c;
    }
  }
  node_points_.assign(n_nodes, {0.0, 0.0});
  for (int c = 0; c < m.n_cells(); ++c) {
    CellGeometry g = cell_geometry(m, c);
    const int* cn = &cell_nodes_[static_cast<std::size_t>(c) * nl];
    for (int i = 0; i < nl; ++i) node_points_[cn[i]] = g.map(ref.nodes()[i]);
  }
  // boundary nodes
  std::vector<int> btag(n_nodes, -1);
  for (const auto& f : boundary_facet_info(m)) {
    const int* cn = &cell_nodes_[static_cast<std::size_t>(f.cell) * nl];
    std::vector<int> loc;
    if (m.dim == 1) {
      loc.push_back(f.local == 0 ? 1 : 0);
    } else {
      loc.push_back((f.local + 1) % 3);
      loc.push_back((f.local + 2) % 3);
      for (int j = 1; j < k; ++j) loc.push_back(3 + f.local * (k - 1) + (j - 1));
    }
    for (int l : loc) {
      int nd = cn[l];
      if (f.tag == BcTag::Dirichlet) btag[nd] = 0;
      else if (btag[nd] < 0) btag[nd] = 1;
    }
  }
  dirichlet_nodes_.clear();
  boundary_nodes_.clear();
  for (int i = 0; i < n_nodes; ++i) {
    if (btag[i] >= 0) boundary_nodes_.push_back(i);
    if (btag[i] == 0) dirichlet_nodes_.push_back(i);
  }
}

std::shared_ptr<FeSpace> FeSpace::lagrange(std::shared_ptr<const Mesh> mesh, int degree, Constraint c) {
  std::shared_ptr<FeSpace> s(new FeSpace());
  s->family_ = Family::Lagrange;
  s->degree_ = degree;
  s->constraint_ = c;
  s->mesh_ = std::move(mesh);
  s->build_lagrange_nodes(degree);
  s->n_local_ = lagrange_ref(s->mesh_->dim, degree).size();
  s->cell_dofs_ = s->cell_nodes_;
  s->n_dofs_ = s->n_nodes();
  return s;
}

std::shared_ptr<FeSpace> FeSpace::vector_lagrange(std::shared_ptr<const Mesh> mesh, int degree) {
  std::shared_ptr<FeSpace> s(new FeSpace());
  s->family_ = Family::VectorLagrange;
  s->degree_ = degree;
  s->mesh_ = std::move(mesh);
  s->build_lagrange_nodes(degree);
  const int vd = s->mesh_->dim;
  const int nl = lagrange_ref(vd, degree).size();
  s->n_local_ = nl * vd;
  s->cell_dofs_.resize(static_cast<std::size_t>(s->mesh_->n_cells()) * s->n_local_);
  for (int c = 0; c < s->mesh_->n_cells(); ++c)
    for (int i = 0; i < nl; ++i)
      for (int d = 0; d < vd; ++d)
        s->cell_dofs_[static_cast<std::size_t>(c) * s->n_local_ + i * vd + d] =
            s->cell_nodes_[static_cast<std::size_t>(c) * nl + i] * vd + d;
  s->n_dofs_ = s->n_nodes() * vd;
  return s;
}

std::shared_ptr<FeSpace> FeSpace::raviart_thomas(std::shared_ptr<const Mesh> mesh) {
  std::shared_ptr<FeSpace> s(new FeSpace());
  s->family_ = Family::RaviartThomas;
  s->degree_ = 1;
  s->mesh_ = std::move(mesh);
  if (s->mesh_->dim == 1) {
    // H(div) in 1D is H^1; the RT1 local space is P2
    s->build_lagrange_nodes(2);
    s->n_local_ = 3;
    s->cell_dofs_ = s->cell_nodes_;
    s->n_dofs_ = s->n_nodes();
    return s;
  }
  s->edges_ = build_edges(*s->mesh_);
  const int ne = static_cast<int>(s->edges_.edges.size());
  s->n_local_ = 8;
  s->cell_dofs_.resize(static_cast<std::size_t>(s->mesh_->n_cells()) * 8);
  for (int c = 0; c < s->mesh_->n_cells(); ++c) {
    int* cd = &s->cell_dofs_[static_cast<std::size_t>(c) * 8];
    for (int i = 0; i < 3; ++i) {
      int e = s->edges_.cell_edges[c][i];
      cd[2 * i] = 2 * e;
      cd[2 * i + 1] = 2 * e + 1;
    }
    cd[6] = 2 * ne + 2 * c;
    cd[7] = 2 * ne + 2 * c + 1;
  }
  s->n_dofs_ = 2 * ne + 2 * s->mesh_->n_cells();
  return s;
}

std::string FeSpace::describe() const {
  std::ostringstream os;
  switch (family_) {
    case Family::Lagrange: os << "LAGRANGE"; break;
    case Family::VectorLagrange: os << "VECTOR_LAGRANGE"; break;
    case Family::RaviartThomas: os << "RAVIART_THOMAS"; break;
  }
  os << ' ' << degree_;
  return os.str();
}

// ---------------------------------------------------------------- tabulation

namespace {

struct RefTab {
  std::vector<double> val, grad, hess;
};

const RefTab& ref_tab(int dim, int degree, const QuadratureRule& q) {
  static std::mutex mtx;
  static std::map<std::tuple<int, int, int, int>, RefTab> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_tuple(dim, degree, q.degree, q.size());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const LagrangeRef& ref = lagrange_ref(dim, degree);
  const int n = ref.size();
  RefTab t;
  t.val.resize(static_cast<std::size_t>(q.size()) * n);
  t.grad.resize(static_cast<std::size_t>(q.size()) * n * 2);
  t.hess.resize(static_cast<std::size_t>(q.size()) * n * 3);
  for (int i = 0; i < q.size(); ++i)
    ref.eval(q.points[i], &t.val[i * n], &t.grad[i * n * 2], &t.hess[i * n * 3]);
  return cache.emplace(key, std::move(t)).first->second;
}

void push_forward(const CellGeometry& g, int nq, int n, const double* rv, const double* rg,
                  const double* rh, ScalarTab& tab, bool hessians) {
  tab.phi.assign(rv, rv + static_cast<std::size_t>(nq) * n);
  tab.dphi.resize(static_cast<std::size_t>(nq) * n * 2);
  for (int i = 0; i < nq * n; ++i) {
    Point gp = g.pull_grad(&rg[2 * i]);
    tab.dphi[2 * i] = gp[0];
    tab.dphi[2 * i + 1] = gp[1];
  }
  if (!hessians) return;
  tab.hphi.resize(static_cast<std::size_t>(nq) * n * 3);
  for (int i = 0; i < nq * n; ++i) {
    const double* h = &rh[3 * i];
    if (g.dim == 1) {
      tab.hphi[3 * i] = h[0] * g.K[0][0] * g.K[0][0];
      tab.hphi[3 * i + 1] = 0.0;
      tab.hphi[3 * i + 2] = 0.0;
      continue;
    }
    const double H[2][2] = {{h[0], h[1]}, {h[1], h[2]}};
    double R[2][2];
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) s += g.K[c][a] * H[c][d] * g.K[d][b];
        R[a][b] = s;
      }
    tab.hphi[3 * i] = R[0][0];
    tab.hphi[3 * i + 1] = R[0][1];
    tab.hphi[3 * i + 2] = R[1][1];
  }
}

int scalar_degree(const FeSpace& s) { return s.family() == Family::RaviartThomas ? 2 : s.degree(); }

}  // namespace

void tabulate_scalar(const FeSpace& space, int cell, const QuadratureRule& q, ScalarTab& tab,
                     bool hessians) {
  const Mesh& m = space.mesh();
  const int k = scalar_degree(space);
  const RefTab& rt = ref_tab(m.dim, k, q);
  const int n = lagrange_ref(m.dim, k).size();
  CellGeometry g = cell_geometry(m, cell);
  tab.nq = q.size();
  tab.nloc = n;
  tab.x.resize(tab.nq);
  tab.w.resize(tab.nq);
  for (int i = 0; i < tab.nq; ++i) {
    tab.x[i] = g.map(q.points[i]);
    tab.w[i] = q.weights[i] * g.det;
  }
  push_forward(g, tab.nq, n, rt.val.data(), rt.grad.data(), rt.hess.data(), tab, hessians);
}

void tabulate_scalar_at(const FeSpace& space, int cell, const std::vector<Point>& xi,
                        const std::vector<double>& wref, ScalarTab& tab, bool hessians) {
  const Mesh& m = space.mesh();
  const int k = scalar_degree(space);
  const LagrangeRef& ref = lagrange_ref(m.dim, k);
  const int n = ref.size();
  const int nq = static_cast<int>(xi.size());
  std::vector<double> v(static_cast<std::size_t>(nq) * n), gr(static_cast<std::size_t>(nq) * n * 2),
      h(static_cast<std::size_t>(nq) * n * 3);
  for (int i = 0; i < nq; ++i) ref.eval(xi[i], &v[i * n], &gr[i * n * 2], &h[i * n * 3]);
  CellGeometry g = cell_geometry(m, cell);
  tab.nq = nq;
  tab.nloc = n;
  tab.x.resize(nq);
  tab.w.resize(nq);
  for (int i = 0; i < nq; ++i) {
    tab.x[i] = g.map(xi[i]);
    tab.w[i] = wref.empty() ? 0.0 : wref[i] * g.det;
  }
  push_forward(g, nq, n, v.data(), gr.data(), h.data(), tab, hessians);
}

namespace {

// RT1 basis on one triangle, in scaled local coordinates X = (x - xc) / h
struct RtCell {
  Point xc;
  double h;
  Eigen::Matrix<double, 8, 8> C;  // C(m, j): coefficient of polynomial m in basis j

  static void poly(const Point& X, double v[8][2]) {
    const double x = X[0], y = X[1];
    const double P[8][2] = {{1, 0}, {x, 0}, {y, 0}, {0, 1}, {0, x}, {0, y}, {x * x, x * y}, {x * y, y * y}};
    for (int m = 0; m < 8; ++m) {
      v[m][0] = P[m][0];
      v[m][1] = P[m][1];
    }
  }
  static void poly_div(const Point& X, double h, double d[8]) {
    const double D[8] = {0, 1, 0, 0, 0, 1, 3 * X[0], 3 * X[1]};
    for (int m = 0; m < 8; ++m) d[m] = D[m] / h;
  }
};

RtCell rt_cell(const FeSpace& space, int cell) {
  const Mesh& m = space.mesh();
  RtCell r;
  r.xc = m.centroid(cell);
  r.h = m.cell_diameter(cell);
  const auto& cv = m.cells[cell];
  Eigen::Matrix<double, 8, 8> D;
  D.setZero();
  QuadratureRule g = interval_rule(4);
  for (int i = 0; i < 3; ++i) {
    int A = cv[(i + 1) % 3], B = cv[(i + 2) % 3];
    int lo = std::min(A, B), hi = std::max(A, B);
    const Point& p = m.vertices[lo];
    const Point& q = m.vertices[hi];
    double tx = q[0] - p[0], ty = q[1] - p[1];
    double len = std::hypot(tx, ty);
    Point n{ty / len, -tx / len};
    for (int k = 0; k < g.size(); ++k) {
      double s = g.points[k][0];
      Point x{p[0] + s * tx, p[1] + s * ty};
      Point X{(x[0] - r.xc[0]) / r.h, (x[1] - r.xc[1]) / r.h};
      double P[8][2];
      RtCell::poly(X, P);
      for (int mm = 0; mm < 8; ++mm) {
        double pn = P[mm][0] * n[0] + P[mm][1] * n[1];
        D(2 * i, mm) += g.weights[k] * len * pn * (1.0 - s);
        D(2 * i + 1, mm) += g.weights[k] * len * pn * s;
      }
    }
  }
  QuadratureRule tq = triangle_rule(2);
  CellGeometry geo = cell_geometry(m, cell);
  for (int k = 0; k < tq.size(); ++k) {
    Point x = geo.map(tq.points[k]);
    Point X{(x[0] - r.xc[0]) / r.h, (x[1] - r.xc[1]) / r.h};
    double P[8][2];
    RtCell::poly(X, P);
    double w = tq.weights[k] * geo.det;
    for (int mm = 0; mm < 8; ++mm) {
      D(6, mm) += w * P[mm][0];
      D(7, mm) += w * P[mm][1];
    }
  }
  r.C = D.inverse();
  return r;
}

}  // namespace

void tabulate_vector_at(const FeSpace& space, int cell, const std::vector<Point>& xi,
                        const std::vector<double>& wref, VectorTab& tab) {
  const Mesh& m = space.mesh();
  const int nq = static_cast<int>(xi.size());
  CellGeometry g = cell_geometry(m, cell);
  tab.nq = nq;
  tab.nloc = space.n_local();
  tab.x.resize(nq);
  tab.w.resize(nq);
  for (int i = 0; i < nq; ++i) {
    tab.x[i] = g.map(xi[i]);
    tab.w[i] = wref.empty() ? 0.0 : wref[i] * g.det;
  }
  tab.val.assign(static_cast<std::size_t>(nq) * tab.nloc * 2, 0.0);
  tab.div.assign(static_cast<std::size_t>(nq) * tab.nloc, 0.0);
  if (space.family() == Family::RaviartThomas && m.dim == 2) {
    RtCell r = rt_cell(space, cell);
    for (int q = 0; q < nq; ++q) {
      Point X{(tab.x[q][0] - r.xc[0]) / r.h, (tab.x[q][1] - r.xc[1]) / r.h};
      double P[8][2], D[8];
      RtCell::poly(X, P);
      RtCell::poly_div(X, r.h, D);
      for (int j = 0; j < 8; ++j) {
        double vx = 0, vy = 0, dv = 0;
        for (int mm = 0; mm < 8; ++mm) {
          vx += r.C(mm, j) * P[mm][0];
          vy += r.C(mm, j) * P[mm][1];
          dv += r.C(mm, j) * D[mm];
        }
        tab.val[(q * 8 + j) * 2] = vx;
        tab.val[(q * 8 + j) * 2 + 1] = vy;
        tab.div[q * 8 + j] = dv;
      }
    }
    return;
  }
  // Lagrange-based vector spaces
  ScalarTab st;
  tabulate_scalar_at(space, cell, xi, wref, st, false);
  const int vd = m.dim;
  const int n = st.nloc;
  for (int q = 0; q < nq; ++q)
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < vd; ++d) {
        int j = i * vd + d;
        tab.val[(q * tab.nloc + j) * 2 + d] = st.phi[q * n + i];
        tab.div[q * tab.nloc + j] = st.dphi[(q * n + i) * 2 + d];
      }
}

void tabulate_vector(const FeSpace& space, int cell, const QuadratureRule& q, VectorTab& tab) {
  tabulate_vector_at(space, cell, q.points, q.weights, tab);
}

// ---------------------------------------------------------------- fields

double evaluate_scalar(const DiscreteField& f, int cell, const Point& xi) {
  ScalarTab t;
  tabulate_scalar_at(*f.space, cell, {xi}, {}, t);
  const int* cd = f.space->cell_dofs(cell);
  double s = 0.0;
  for (int i = 0; i < t.nloc; ++i) s += f.coeffs[cd[i]] * t.phi[i];
  return s;
}

Point evaluate_gradient(const DiscreteField& f, int cell, const Point& xi) {
  ScalarTab t;
  tabulate_scalar_at(*f.space, cell, {xi}, {}, t);
  const int* cd = f.space->cell_dofs(cell);
  Point s{0.0, 0.0};
  for (int i = 0; i < t.nloc; ++i) {
    s[0] += f.coeffs[cd[i]] * t.dphi[2 * i];
    s[1] += f.coeffs[cd[i]] * t.dphi[2 * i + 1];
  }
  return s;
}

Point evaluate_vector(const DiscreteField& f, int cell, const Point& xi) {
  VectorTab t;
  tabulate_vector_at(*f.space, cell, {xi}, {}, t);
  const int* cd = f.space->cell_dofs(cell);
  Point s{0.0, 0.0};
  for (int i = 0; i < t.nloc; ++i) {
    s[0] += f.coeffs[cd[i]] * t.val[2 * i];
    s[1] += f.coeffs[cd[i]] * t.val[2 * i + 1];
  }
  return s;
}

Point evaluate(const DiscreteField& f, int cell, const std::array<double, 3>& bary) {
  Point xi{bary[1], bary[2]};
  if (f.space->family() == Family::Lagrange) return {evaluate_scalar(f, cell, xi), 0.0};
  return evaluate_vector(f, cell, xi);
}

DiscreteField interpolate(SpacePtr space, const ScalarFunction& fn) {
  DiscreteField f(space);
  if (space->family() != Family::Lagrange && space->value_dim() != 1)
    throw FemError("scalar interpolation needs a scalar space");
  for (int i = 0; i < space->n_nodes(); ++i) f.coeffs[i] = fn(space->node_points()[i]);
  return f;
}

DiscreteField interpolate_vector(SpacePtr space, const VectorFunction& fn) {
  DiscreteField f(space);
  const Mesh& m = space->mesh();
  if (space->family() == Family::Lagrange) throw FemError("vector interpolation needs a vector space");
  if (m.dim == 1) {
    for (int i = 0; i < space->n_nodes(); ++i) f.coeffs[i] = fn(space->node_points()[i])[0];
    return f;
  }
  if (space->family() == Family::VectorLagrange) {
    for (int i = 0; i < space->n_nodes(); ++i) {
      Point v = fn(space->node_points()[i]);
      f.coeffs[2 * i] = v[0];
      f.coeffs[2 * i + 1] = v[1];
    }
    return f;
  }
  const EdgeTable& et = space->edges();
  QuadratureRule g = interval_rule(8);
  const int ne = static_cast<int>(et.edges.size());
  for (int e = 0; e < ne; ++e) {
    const Point& p = m.vertices[et.edges[e][0]];
    const Point& q = m.vertices[et.edges[e][1]];
    double tx = q[0] - p[0], ty = q[1] - p[1];
    double len = std::hypot(tx, ty);
    Point n{ty / len, -tx / len};
    double a = 0, b = 0;
    for (int k = 0; k < g.size(); ++k) {
      double s = g.points[k][0];
      Point v = fn({p[0] + s * tx, p[1] + s * ty});
      double vn = v[0] * n[0] + v[1] * n[1];
      a += g.weights[k] * len * vn * (1.0 - s);
      b += g.weights[k] * len * vn * s;
    }
    f.coeffs[2 * e] = a;
    f.coeffs[2 * e + 1] = b;
  }
  QuadratureRule tq = triangle_rule(8);
  for (int c = 0; c < m.n_cells(); ++c) {
    CellGeometry geo = cell_geometry(m, c);
    double a = 0, b = 0;
    for (int k = 0; k < tq.size(); ++k) {
      Point v = fn(geo.map(tq.points[k]));
      a += tq.weights[k] * geo.det * v[0];
      b += tq.weights[k] * geo.det * v[1];
    }
    f.coeffs[2 * ne + 2 * c] = a;
    f.coeffs[2 * ne + 2 * c + 1] = b;
  }
  return f;
}

double integrate(const Mesh& mesh, const std::function<double(int, const Point&)>& fn, int degree) {
  QuadratureRule q = cell_rule(mesh.dim, degree);
  double s = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellGeometry g = cell_geometry(mesh, c);
    double sc = 0.0;
    for (int i = 0; i < q.size(); ++i) sc += q.weights[i] * fn(c, g.map(q.points[i]));
    s += sc * g.det;
  }
  return s;
}

double integrate_boundary(const Mesh& mesh, const std::function<double(const FacetInfo&, const Point&)>& fn,
                          int degree, const std::function<bool(const FacetInfo&)>& filter) {
  double s = 0.0;
  std::vector<Point> pts;
  std::vector<double> w;
  for (const auto& f : boundary_facet_info(mesh)) {
    if (filter && !filter(f)) continue;
    facet_rule(mesh.dim, f.local, degree, pts, w);
    CellGeometry g = cell_geometry(mesh, f.cell);
    for (std::size_t i = 0; i < pts.size(); ++i) s += w[i] * f.measure * fn(f, g.map(pts[i]));
  }
  return s;
}

double field_mean(const DiscreteField& f) {
  const FeSpace& sp = *f.space;
  QuadratureRule q = cell_rule(sp.mesh().dim, sp.degree() + 1);
  ScalarTab t;
  double s = 0.0, vol = 0.0;
  for (int c = 0; c < sp.mesh().n_cells(); ++c) {
    tabulate_scalar(sp, c, q, t);
    const int* cd = sp.cell_dofs(c);
    for (int i = 0; i < t.nq; ++i) {
      double v = 0.0;
      for (int j = 0; j < t.nloc; ++j) v += f.coeffs[cd[j]] * t.phi[i * t.nloc + j];
      s += t.w[i] * v;
      vol += t.w[i];
    }
  }
  return s / vol;
}

// ---------------------------------------------------------------- constants

namespace {

// smallest Laplace eigenvalue in one direction of length L given the side tags
double dir_eig(double L, bool d0, bool d1) {
  const double pi = std::numbers::pi;
  if (d0 && d1) return (pi / L) * (pi / L);
  if (d0 || d1) return (pi / (2 * L)) * (pi / (2 * L));
  return 0.0;
}

}  // namespace

double discrete_trace_constant(const Box& box, const SideTags& tags, int n) {
  auto mesh = std::make_shared<Mesh>(rectangle_mesh(box, n, n, tags));
  auto sp = FeSpace::lagrange(mesh, 2);
  const int N = sp->n_dofs();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N, N), MG = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(N);
  QuadratureRule q = cell_rule(2, 4);
  ScalarTab t;
  for (int c = 0; c < mesh->n_cells(); ++c) {
    tabulate_scalar(*sp, c, q, t);
    const int* cd = sp->cell_dofs(c);
    for (int k = 0; k < t.nq; ++k)
      for (int i = 0; i < t.nloc; ++i) {
        mass[cd[i]] += t.w[k] * t.phi[k * t.nloc + i];
        for (int j = 0; j < t.nloc; ++j)
          K(cd[i], cd[j]) += t.w[k] * (t.dphi[(k * t.nloc + i) * 2] * t.dphi[(k * t.nloc + j) * 2] +
                                       t.dphi[(k * t.nloc + i) * 2 + 1] * t.dphi[(k * t.nloc + j) * 2 + 1]);
      }
  }
  bool has_dirichlet = false;
  std::vector<Point> pts;
  std::vector<double> w;
  for (const auto& f : boundary_facet_info(*mesh)) {
    if (f.tag == BcTag::Dirichlet) {
      has_dirichlet = true;
      continue;
    }
    facet_rule(2, f.local, 4, pts, w);
    tabulate_scalar_at(*sp, f.cell, pts, w, t);
    const int* cd = sp->cell_dofs(f.cell);
    for (int k = 0; k < t.nq; ++k)
      for (int i = 0; i < t.nloc; ++i)
        for (int j = 0; j < t.nloc; ++j)
          MG(cd[i], cd[j]) += w[k] * f.measure * t.phi[k * t.nloc + i] * t.phi[k * t.nloc + j];
  }
  Eigen::MatrixXd A, B;
  if (has_dirichlet) {
    std::vector<char> dir(N, 0);
    for (int i : sp->dirichlet_nodes()) dir[i] = 1;
    std::vector<int> free;
    for (int i = 0; i < N; ++i)
      if (!dir[i]) free.push_back(i);
    const int nf = static_cast<int>(free.size());
    A.resize(nf, nf);
    B.resize(nf, nf);
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < nf; ++j) {
        A(i, j) = MG(free[i], free[j]);
        B(i, j) = K(free[i], free[j]);
      }
  } else {
    const double vol = box.measure();
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(N, N) - Eigen::VectorXd::Ones(N) * mass.transpose() / vol;
    A = P.transpose() * MG * P;
    double s = K.diagonal().mean() / mass.squaredNorm();
    B = K + s * mass * mass.transpose();
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw FemError("trace eigenproblem failed");
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

EmbeddingConstants embedding_constants(const Box& box, const SideTags& tags) {
  EmbeddingConstants c;
  const double pi = std::numbers::pi;
  const bool dl = tags.left == BcTag::Dirichlet, dr = tags.right == BcTag::Dirichlet;
  if (box.dim == 1) {
    const double L = box.hi[0] - box.lo[0];
    double lam = dir_eig(L, dl, dr);
    c.c_poincare = L / pi;
    c.c_friedrichs = lam > 0 ? 1.0 / std::sqrt(lam) : c.c_poincare;
    const int n_neu = (dl ? 0 : 1) + (dr ? 0 : 1);
    if (dl || dr) {
      // u(end)^2 <= L ||u'||^2 with equality for linear u
      c.c_trace = n_neu > 0 ? std::sqrt(L) : 0.0;
    } else {
      // zero mean, both end points: extremal u = x - L/2
      c.c_trace = std::sqrt(L / 2.0);
    }
    return c;
  }
  if (box.dim != 2) throw FemError("UnsupportedDomain: only interval and rectangle boxes");
  const double Lx = box.hi[0] - box.lo[0], Ly = box.hi[1] - box.lo[1];
  const bool db = tags.bottom == BcTag::Dirichlet, dt = tags.top == BcTag::Dirichlet;
  double lam = dir_eig(Lx, dl, dr) + dir_eig(Ly, db, dt);
  const bool any_d = dl || dr || db || dt;
  c.c_poincare = std::max(Lx, Ly) / pi;
  if (any_d) {
    if (dir_eig(Lx, dl, dr) == 0.0 || dir_eig(Ly, db, dt) == 0.0) {
      // Dirichlet only in one direction: the other direction contributes 0
    }
    c.c_friedrichs = 1.0 / std::sqrt(lam);
  } else {
    c.c_friedrichs = c.c_poincare;
  }
  const bool all_d = dl && dr && db && dt;
  if (all_d) {
    c.c_trace = 0.0;
  } else {
    static std::mutex mtx;
    static std::map<std::tuple<double, double, double, double, int, int, int, int>, double> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_tuple(box.lo[0], box.lo[1], box.hi[0], box.hi[1], int(tags.left), int(tags.right),
                               int(tags.bottom), int(tags.top));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, 1.05 * discrete_trace_constant(box, tags, 12)).first;
    c.c_trace = it->second;
  }
  return c;
}

}  // namespace fpe
