#include "fpe/estimate_static.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fpe {

namespace {

Point to_ref(const CellGeometry& g, const Point& x) {
  const double dx = x[0] - g.x0[0], dy = x[1] - g.x0[1];
  if (g.dim == 1) return {g.K[0][0] * dx, 0.0};
  return {g.K[0][0] * dx + g.K[0][1] * dy, g.K[1][0] * dx + g.K[1][1] * dy};
}

// value and gradient of a scalar Lagrange field at a physical point of a cell
struct PointEval {
  const DiscreteField& f;
  const LagrangeRef& ref;
  std::vector<double> val, grad;

  explicit PointEval(const DiscreteField& field)
      : f(field), ref(lagrange_ref(field.space->mesh().dim, field.space->degree())) {
    val.resize(ref.size());
    grad.resize(2 * ref.size());
  }

  void operator()(int cell, const CellGeometry& g, const Point& x, double& v, Point& dv) {
    Point xi = to_ref(g, x);
    ref.eval(xi, val.data(), grad.data(), nullptr);
    const int* d = f.space->cell_dofs(cell);
    double gr[2] = {0.0, 0.0};
    v = 0.0;
    for (int i = 0; i < ref.size(); ++i) {
      const double c = f.coeffs[d[i]];
      v += c * val[i];
      gr[0] += c * grad[2 * i];
      gr[1] += c * grad[2 * i + 1];
    }
    dv = g.pull_grad(gr);
  }
};

double grad_a(const ProblemSpec& s, int dim, const Point& g) {
  return s.diff(0) * g[0] * g[0] + (dim == 2 ? s.diff(1) * g[1] * g[1] : 0.0);
}

double drift_ainv(const ProblemSpec& s, int dim, const Point& F) {
  return F[0] * F[0] / s.diff(0) + (dim == 2 ? F[1] * F[1] / s.diff(1) : 0.0);
}

constexpr int kErrParts = 5;  // A-energy, delta^2 e^2, minorant weight e^2, e^2, |grad e|^2
using Parts = std::array<double, kErrParts>;

// recursive quadrature on a sub-simplex given by reference vertices
void adaptive_cell(const CellGeometry& g, const std::array<Point, 3>& sv, double jac, const QuadratureRule& q,
                   const std::function<Parts(const Point&)>& fn, const Parts& coarse, int depth, int max_depth,
                   Parts& out) {
  const int dim = g.dim;
  auto rule_on = [&](const std::array<Point, 3>& s, double jj) {
    Parts acc{};
    for (int k = 0; k < q.size(); ++k) {
      const Point& r = q.points[k];
      Point xi;
      if (dim == 1) {
        xi = {s[0][0] + (s[1][0] - s[0][0]) * r[0], 0.0};
      } else {
        xi = {s[0][0] + (s[1][0] - s[0][0]) * r[0] + (s[2][0] - s[0][0]) * r[1],
              s[0][1] + (s[1][1] - s[0][1]) * r[0] + (s[2][1] - s[0][1]) * r[1]};
      }
      Parts p = fn(g.map(xi));
      for (int i = 0; i < kErrParts; ++i) acc[i] += q.weights[k] * jj * p[i];
    }
    return acc;
  };
  std::vector<std::array<Point, 3>> kids;
  double kj;
  if (dim == 1) {
    Point m{0.5 * (sv[0][0] + sv[1][0]), 0.0};
    kids = {{sv[0], m, m}, {m, sv[1], m}};
    kj = 0.5 * jac;
  } else {
    auto mid = [](const Point& a, const Point& b) { return Point{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])}; };
    Point m01 = mid(sv[0], sv[1]), m12 = mid(sv[1], sv[2]), m02 = mid(sv[0], sv[2]);
    kids = {{sv[0], m01, m02}, {m01, sv[1], m12}, {m02, m12, sv[2]}, {m12, m02, m01}};
    kj = 0.25 * jac;
  }
  std::vector<Parts> kp;
  Parts fine{};
  for (const auto& k : kids) {
    kp.push_back(rule_on(k, kj));
    for (int i = 0; i < kErrParts; ++i) fine[i] += kp.back()[i];
  }
  bool ok = depth >= max_depth;
  if (!ok) {
    ok = true;
    for (int i = 0; i < kErrParts; ++i)
      if (std::abs(fine[i] - coarse[i]) > 1e-9 * std::abs(fine[i]) + 1e-16 * jac) ok = false;
  }
  if (ok) {
    for (int i = 0; i < kErrParts; ++i) out[i] += fine[i];
    return;
  }
  for (std::size_t k = 0; k < kids.size(); ++k) adaptive_cell(g, kids[k], kj, q, fn, kp[k], depth + 1, max_depth, out);
}

Parts integrate_adaptive(const CellGeometry& g, const QuadratureRule& q, const std::function<Parts(const Point&)>& fn) {
  std::array<Point, 3> sv = {Point{0.0, 0.0}, Point{1.0, 0.0}, Point{0.0, 1.0}};
  Parts coarse{};
  for (int k = 0; k < q.size(); ++k) {
    Parts p = fn(g.map(q.points[k]));
    for (int i = 0; i < kErrParts; ++i) coarse[i] += q.weights[k] * g.det * p[i];
  }
  Parts out{};
  adaptive_cell(g, sv, g.det, q, fn, coarse, 0, g.dim == 1 ? 16 : 9, out);
  return out;
}

Parts pointwise_parts(const ProblemSpec& spec, int dim, const Point& x, double e, const Point& ge) {
  const Point F = spec.drift_at(x);
  const double wmin = 0.5 * (drift_ainv(spec, dim, F) + spec.div_drift(x) + std::abs(spec.lambda_c(x)));
  return {grad_a(spec, dim, ge), spec.delta2(x) * e * e, wmin * e * e, e * e,
          ge[0] * ge[0] + ge[1] * ge[1]};
}

}  // namespace

std::vector<int> ancestor_map(const std::vector<std::shared_ptr<const Mesh>>& hierarchy, int coarse, int fine) {
  if (coarse < 0 || fine >= static_cast<int>(hierarchy.size()) || coarse > fine)
    throw EstimateError("ancestor_map: bad level range");
  const Mesh& mf = *hierarchy[fine];
  std::vector<int> map(mf.n_cells());
  for (int c = 0; c < mf.n_cells(); ++c) map[c] = c;
  for (int l = fine; l > coarse; --l) {
    const Mesh& m = *hierarchy[l];
    if (m.parent.size() != static_cast<std::size_t>(m.n_cells()))
      throw EstimateError("ancestor_map: mesh without parent information");
    for (int& c : map) c = m.parent[c];
  }
  return map;
}

ErrorMeasures error_norms(const DiscreteField& v, const ProblemSpec& spec, const ReferenceSolution* ref) {
  if (!ref && !(spec.exact && spec.exact_grad)) throw EstimateError("NoReference: no exact solution available");
  const Mesh& vm = v.space->mesh();
  const int dim = vm.dim;
  PointEval pv(v);
  Parts tot{};
  double bnd = 0.0;
  if (!ref) {
    QuadratureRule q = cell_rule(dim, kDefaultQuadDegree);
    for (int c = 0; c < vm.n_cells(); ++c) {
      CellGeometry g = cell_geometry(vm, c);
      auto fn = [&](const Point& x) {
        double vv;
        Point gv;
        pv(c, g, x, vv, gv);
        Point gu = spec.exact_grad(x, 0.0);
        return pointwise_parts(spec, dim, x, spec.exact(x, 0.0) - vv, {gu[0] - gv[0], gu[1] - gv[1]});
      };
      Parts p = integrate_adaptive(g, q, fn);
      for (int i = 0; i < kErrParts; ++i) tot[i] += p[i];
    }
    bnd = integrate_boundary(
        vm,
        [&](const FacetInfo& f, const Point& x) {
          CellGeometry g = cell_geometry(vm, f.cell);
          double vv;
          Point gv;
          pv(f.cell, g, x, vv, gv);
          const Point F = spec.drift_at(x);
          const double e = spec.exact(x, 0.0) - vv;
          return -0.5 * (F[0] * f.normal[0] + F[1] * f.normal[1]) * e * e;
        },
        16, [&](const FacetInfo& f) { return f.tag != BcTag::Dirichlet && spec.layout != BcLayout::FullDirichlet; });
  } else {
    const Mesh& fm = ref->u.space->mesh();
    if (ref->to_coarse.size() != static_cast<std::size_t>(fm.n_cells()))
      throw EstimateError("reference cell map has the wrong size");
    PointEval pu(ref->u);
    QuadratureRule q = cell_rule(dim, std::max(kDefaultQuadDegree, 2 * ref->u.space->degree() + 2));
    for (int c = 0; c < fm.n_cells(); ++c) {
      CellGeometry gf = cell_geometry(fm, c);
      const int cc = ref->to_coarse[c];
      CellGeometry gc = cell_geometry(vm, cc);
      for (int k = 0; k < q.size(); ++k) {
        Point x = gf.map(q.points[k]);
        double uu, vv;
        Point gu, gv;
        pu(c, gf, x, uu, gu);
        pv(cc, gc, x, vv, gv);
        Parts p = pointwise_parts(spec, dim, x, uu - vv, {gu[0] - gv[0], gu[1] - gv[1]});
        for (int i = 0; i < kErrParts; ++i) tot[i] += q.weights[k] * gf.det * p[i];
      }
    }
    bnd = integrate_boundary(
        fm,
        [&](const FacetInfo& f, const Point& x) {
          CellGeometry gf = cell_geometry(fm, f.cell);
          const int cc = ref->to_coarse[f.cell];
          CellGeometry gc = cell_geometry(vm, cc);
          double uu, vv;
          Point gu, gv;
          pu(f.cell, gf, x, uu, gu);
          pv(cc, gc, x, vv, gv);
          const Point F = spec.drift_at(x);
          return -0.5 * (F[0] * f.normal[0] + F[1] * f.normal[1]) * (uu - vv) * (uu - vv);
        },
        kDefaultQuadDegree,
        [&](const FacetInfo& f) { return f.tag != BcTag::Dirichlet && spec.layout != BcLayout::FullDirichlet; });
  }
  ErrorMeasures m;
  m.upper = std::sqrt(std::max(0.0, tot[0] + tot[1] + bnd));
  m.lower = std::sqrt(std::max(0.0, 0.5 * tot[0] + tot[2] + bnd));
  m.l2 = std::sqrt(tot[3]);
  m.h1 = std::sqrt(tot[4]);
  return m;
}

void update_weight_fields(const DiscreteField& v, const ProblemSpec& spec, MajorantWeights& w) {
  const Mesh& mesh = v.space->mesh();
  const int dim = mesh.dim;
  const double eps = spec.eps_min(dim);
  const double kf = (1.0 + 1.0 / w.beta) * (1.0 + w.zeta) * w.c_f * w.c_f / eps;
  const double kn = (1.0 + 1.0 / w.beta) * (1.0 + 1.0 / w.zeta) * w.c_tr * w.c_tr / eps;
  QuadratureRule q = cell_rule(dim, w.quad_degree);
  w.mu.assign(static_cast<std::size_t>(mesh.n_cells()) * q.size(), 0.0);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellGeometry g = cell_geometry(mesh, c);
    for (int k = 0; k < q.size(); ++k) {
      const double d2 = spec.delta2(g.map(q.points[k]));
      w.mu[static_cast<std::size_t>(c) * q.size() + k] = d2 > 1e-12 ? kf * d2 / (kf * d2 + 1.0) : 0.0;
    }
  }
  w.theta.clear();
  std::vector<Point> pts;
  std::vector<double> fw;
  for (const auto& f : flux_facets(spec, mesh)) {
    facet_rule(dim, f.local, w.quad_degree, pts, fw);
    CellGeometry g = cell_geometry(mesh, f.cell);
    for (const auto& xi : pts) {
      const Point F = spec.drift_at(g.map(xi));
      const double chi2 = -0.5 * (F[0] * f.normal[0] + F[1] * f.normal[1]);
      w.theta.push_back(chi2 > 1e-12 ? kn * chi2 / (kn * chi2 + 1.0) : 0.0);
    }
  }
}

MajorantParts evaluate_majorant(const DiscreteField& v, const ProblemSpec& spec, const DiscreteField& y,
                                const MajorantWeights& w) {
  const Mesh& mesh = v.space->mesh();
  const int dim = mesh.dim;
  const FeSpace& vs = *v.space;
  const FeSpace& fs = *y.space;
  const double eps = spec.eps_min(dim);
  const double cf2 = w.c_f * w.c_f / eps, ct2 = w.c_tr * w.c_tr / eps;
  QuadratureRule q = cell_rule(dim, w.quad_degree);
  if (w.mu.size() != static_cast<std::size_t>(mesh.n_cells()) * q.size())
    throw EstimateError("mu weights do not match the quadrature layout");
  MajorantParts out;
  out.indicators.assign(mesh.n_cells(), 0.0);
  std::vector<double> ind_rd(mesh.n_cells(), 0.0), ind_req(mesh.n_cells(), 0.0), ind_mu(mesh.n_cells(), 0.0);
  std::vector<double> ind_rn(mesh.n_cells(), 0.0), ind_th(mesh.n_cells(), 0.0);
  ScalarTab st;
  VectorTab vt;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    tabulate_scalar(vs, c, q, st);
    tabulate_vector(fs, c, q, vt);
    const int* vd = vs.cell_dofs(c);
    const int* fd = fs.cell_dofs(c);
    for (int k = 0; k < q.size(); ++k) {
      const Point& x = st.x[k];
      double vv = 0, gx = 0, gy = 0;
      for (int i = 0; i < st.nloc; ++i) {
        const double cf = v.coeffs[vd[i]];
        vv += cf * st.phi[k * st.nloc + i];
        gx += cf * st.dphi[(k * st.nloc + i) * 2];
        gy += cf * st.dphi[(k * st.nloc + i) * 2 + 1];
      }
      double y0 = 0, y1 = 0, dy = 0;
      for (int i = 0; i < vt.nloc; ++i) {
        const double cf = y.coeffs[fd[i]];
        y0 += cf * vt.val[(k * vt.nloc + i) * 2];
        y1 += cf * vt.val[(k * vt.nloc + i) * 2 + 1];
        dy += cf * vt.div[k * vt.nloc + i];
      }
      const Point F = spec.drift_at(x);
      const double req = spec.f(x) - spec.div_drift(x) * vv - F[0] * gx - (dim == 2 ? F[1] * gy : 0.0) -
                         spec.lambda_c(x) * vv + dy;
      const double r0 = y0 - spec.diff(0) * gx;
      const double r1 = dim == 2 ? y1 - spec.diff(1) * gy : 0.0;
      const double mu = w.mu[static_cast<std::size_t>(c) * q.size() + k];
      const double d2 = spec.delta2(x);
      const double wt = st.w[k];
      ind_rd[c] += wt * (r0 * r0 / spec.diff(0) + (dim == 2 ? r1 * r1 / spec.diff(1) : 0.0));
      ind_req[c] += wt * cf2 * (1 - mu) * (1 - mu) * req * req;
      if (d2 > 1e-12) ind_mu[c] += wt * mu * mu * req * req / d2;
    }
  }
  std::vector<Point> pts;
  std::vector<double> fw;
  std::size_t pos = 0;
  for (const auto& f : flux_facets(spec, mesh)) {
    facet_rule(dim, f.local, w.quad_degree, pts, fw);
    tabulate_scalar_at(vs, f.cell, pts, {}, st);
    tabulate_vector_at(fs, f.cell, pts, {}, vt);
    const int* vd = vs.cell_dofs(f.cell);
    const int* fd = fs.cell_dofs(f.cell);
    for (std::size_t k = 0; k < pts.size(); ++k, ++pos) {
      if (pos >= w.theta.size()) throw EstimateError("theta weights do not match the facet layout");
      const Point& x = st.x[k];
      double vv = 0, yn = 0;
      for (int i = 0; i < st.nloc; ++i) vv += v.coeffs[vd[i]] * st.phi[k * st.nloc + i];
      for (int i = 0; i < vt.nloc; ++i)
        yn += y.coeffs[fd[i]] *
              (vt.val[(k * vt.nloc + i) * 2] * f.normal[0] + vt.val[(k * vt.nloc + i) * 2 + 1] * f.normal[1]);
      const Point F = spec.drift_at(x);
      const double fn = F[0] * f.normal[0] + F[1] * f.normal[1];
      const double rn = fn * vv - yn;
      const double chi2 = -0.5 * fn;
      const double th = w.theta[pos];
      const double wt = fw[k] * f.measure;
      ind_rn[f.cell] += wt * ct2 * (1 - th) * (1 - th) * rn * rn;
      if (chi2 > 1e-12) ind_th[f.cell] += wt * th * th * rn * rn / chi2;
    }
  }
  const double kb = 1.0 + 1.0 / w.beta;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    out.rd += ind_rd[c];
    out.req += ind_req[c];
    out.req_mu += ind_mu[c];
    out.rn += ind_rn[c];
    out.rn_th += ind_th[c];
    out.indicators[c] = (1 + w.beta) * ind_rd[c] + kb * (1 + w.zeta) * ind_req[c] + ind_mu[c] +
                        kb * (1 + 1.0 / w.zeta) * ind_rn[c] + ind_th[c];
  }
  out.total = (1 + w.beta) * out.rd + kb * ((1 + w.zeta) * out.req + (1 + 1.0 / w.zeta) * out.rn) + out.req_mu +
              out.rn_th;
  return out;
}

namespace {

ErrorCertificate run_majorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr fs,
                              const MajorantOptions& opt) {
  if (fs->family() != Family::RaviartThomas && fs->family() != Family::VectorLagrange)
    throw EstimateError("flux space must be vector valued");
  if (fs->mesh_ptr() != v.space->mesh_ptr()) throw EstimateError("flux and approximation meshes differ");
  if (opt.sweeps < 1) throw EstimateError("at least one sweep is required");
  EmbeddingConstants ec = embedding_constants(spec.box, spec.tags);
  ErrorCertificate cert;
  MajorantWeights& w = cert.weights;
  w.quad_degree = opt.quad_degree;
  w.c_f = ec.c_friedrichs;
  w.c_tr = flux_facets(spec, v.space->mesh()).empty() ? 0.0 : ec.c_trace;
  w.beta = 1.0;
  w.zeta = 1.0;
  update_weight_fields(v, spec, w);
  // any positive beta, zeta give a valid bound; the clamps keep the flux system usable
  auto clamp_beta = [](double s) { return std::clamp(s, 1e-7, 1e7); };
  auto clamp_zeta = [](double s) { return std::clamp(s, 1e-8, 1e8); };
  for (int s = 0; s < opt.sweeps; ++s) {
    const MajorantWeights w_prev = w;
    FluxQuadratic fq = assemble_majorant_flux_system(v, spec, *fs, w);
    // the system degrades as beta -> 0; a few refinement steps recover accuracy
    SparseFactor fac = factor_spd(fq.system.matrix);
    Eigen::VectorXd y = fac.solve(fq.system.rhs);
    for (int it = 0; it < 3; ++it) y += fac.solve(fq.system.rhs - fq.system.matrix * y);
    DiscreteField flux(fs, y);
    MajorantParts p = evaluate_majorant(v, spec, flux, w);
    const double a = std::sqrt(p.rd), b = std::sqrt(p.req), c = std::sqrt(p.rn);
    if (b > 0.0 && c > 0.0)
      w.zeta = clamp_zeta(c / b);
    else
      w.zeta = c == 0.0 ? 1e-8 : 1e8;
    const double B = std::sqrt((1 + w.zeta) * p.req + (1 + 1.0 / w.zeta) * p.rn);
    w.beta = a > 0.0 ? clamp_beta(B / a) : 1e7;
    update_weight_fields(v, spec, w);
    MajorantParts next = evaluate_majorant(v, spec, flux, w);
    // every block step is an exact minimization; an increase can only be round-off
    if (!cert.history.empty() && !(next.total <= cert.history.back())) {
      w = w_prev;
      break;
    }
    cert.flux = std::move(flux);
    cert.parts = std::move(next);
    cert.history.push_back(cert.parts.total);
  }
  cert.majorant = std::sqrt(std::max(0.0, cert.parts.total));
  cert.indicators = cert.parts.indicators;
  return cert;
}

}  // namespace

ErrorCertificate majorant_mixed(const DiscreteField& v, const ProblemSpec& spec, SpacePtr flux_space,
                                const MajorantOptions& opt) {
  if (spec.layout == BcLayout::Robin) throw EstimateError("use majorant_robin for the Robin layout");
  return run_majorant(v, spec, std::move(flux_space), opt);
}

ErrorCertificate majorant_robin(const DiscreteField& v, const ProblemSpec& spec, SpacePtr flux_space,
                                const MajorantOptions& opt) {
  if (spec.layout != BcLayout::Robin) throw EstimateError("majorant_robin requires the Robin layout");
  const double mean = field_mean(v);
  const double scale = std::max(1.0, v.coeffs.cwiseAbs().maxCoeff());
  if (std::abs(mean) > 1e-10 * scale) throw EstimateError("ZeroMeanViolated: approximation has nonzero mean");
  return run_majorant(v, spec, std::move(flux_space), opt);
}

namespace {

struct MinorantSystem {
  SparseMatrix b;
  Eigen::VectorXd l;
};

MinorantSystem assemble_minorant(const DiscreteField& v, const ProblemSpec& spec, const FeSpace& ws) {
  const Mesh& mesh = ws.mesh();
  const int dim = mesh.dim;
  const FeSpace& vs = *v.space;
  QuadratureRule q = cell_rule(dim, kDefaultQuadDegree);
  ScalarTab tw, tv;
  const int nl = ws.n_local();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.n_cells()) * nl * nl);
  MinorantSystem out;
  out.l = Eigen::VectorXd::Zero(ws.n_dofs());
  std::vector<double> ke(static_cast<std::size_t>(nl) * nl);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    std::fill(ke.begin(), ke.end(), 0.0);
    tabulate_scalar(ws, c, q, tw);
    tabulate_scalar(vs, c, q, tv);
    const int* wd = ws.cell_dofs(c);
    const int* vd = vs.cell_dofs(c);
    for (int k = 0; k < q.size(); ++k) {
      const Point& x = tw.x[k];
      double vv = 0, gx = 0, gy = 0;
      for (int i = 0; i < tv.nloc; ++i) {
        const double cf = v.coeffs[vd[i]];
        vv += cf * tv.phi[k * tv.nloc + i];
        gx += cf * tv.dphi[(k * tv.nloc + i) * 2];
        gy += cf * tv.dphi[(k * tv.nloc + i) * 2 + 1];
      }
      const Point F = spec.drift_at(x);
      const double lc = spec.lambda_c(x);
      const double ax = spec.diff(0), ay = dim == 2 ? spec.diff(1) : 0.0;
      const double wt = tw.w[k];
      const double fx = spec.f(x) - lc * vv;
      const double px = -ax * gx + F[0] * vv, py = -ay * gy + F[1] * vv;
      for (int i = 0; i < nl; ++i) {
        const double pi = tw.phi[k * nl + i];
        const double* di = &tw.dphi[(k * nl + i) * 2];
        out.l[wd[i]] += wt * (fx * pi + px * di[0] + py * di[1]);
        for (int j = 0; j < nl; ++j) {
          const double* dj = &tw.dphi[(k * nl + j) * 2];
          ke[i * nl + j] += wt * (ax * di[0] * dj[0] + ay * di[1] * dj[1] + std::abs(lc) * pi * tw.phi[k * nl + j]);
        }
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) trip.emplace_back(wd[i], wd[j], ke[i * nl + j]);
  }
  out.b.resize(ws.n_dofs(), ws.n_dofs());
  out.b.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void check_minorant_space(const DiscreteField& v, const FeSpace& ws) {
  if (ws.family() != Family::Lagrange) throw EstimateError("minorant space must be scalar Lagrange");
  if (ws.mesh_ptr() != v.space->mesh_ptr()) throw EstimateError("minorant space must live on the same mesh");
  if (ws.degree() <= v.space->degree())
    throw EstimateError("SpaceNotRicher: minorant space degree must exceed the approximation degree");
}

}  // namespace

double minorant_functional(const DiscreteField& v, const ProblemSpec& spec, const DiscreteField& w) {
  if (w.space->family() != Family::Lagrange || w.space->mesh_ptr() != v.space->mesh_ptr())
    throw EstimateError("minorant test field must be scalar Lagrange on the same mesh");
  MinorantSystem s = assemble_minorant(v, spec, *w.space);
  return s.l.dot(w.coeffs) - 0.5 * w.coeffs.dot(s.b * w.coeffs);
}

double minorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr ws, DiscreteField* w_out) {
  check_minorant_space(v, *ws);
  MinorantSystem s = assemble_minorant(v, spec, *ws);
  SparseMatrix a = s.b;
  Eigen::VectorXd rhs = s.l;
  const auto& dn = ws->dirichlet_nodes();
  if (spec.layout != BcLayout::Robin) apply_dirichlet(a, rhs, dn, std::vector<double>(dn.size(), 0.0));
  Eigen::VectorXd w = factor_spd(a).solve(rhs);
  const double val = s.l.dot(w) - 0.5 * w.dot(s.b * w);
  if (w_out) *w_out = DiscreteField(ws, w);
  return std::max(0.0, val);
}

void attach_errors(ErrorCertificate& c, const ErrorMeasures& e) {
  c.err_upper = e.upper;
  c.err_lower = e.lower;
  c.ieff_maj = e.upper > 0 ? c.majorant / e.upper : std::numeric_limits<double>::quiet_NaN();
  c.ieff_min = e.lower > 0 ? c.minorant / e.lower : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace fpe
