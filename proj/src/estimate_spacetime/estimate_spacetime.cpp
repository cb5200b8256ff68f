#include "fpe/estimate_spacetime.hpp"

#include <algorithm>
#include <cmath>

namespace fpe {

namespace {

Point to_ref(const CellGeometry& g, const Point& x) {
  const double dx = x[0] - g.x0[0], dy = x[1] - g.x0[1];
  return {g.K[0][0] * dx + g.K[0][1] * dy, g.K[1][0] * dx + g.K[1][1] * dy};
}

double eval_at(const DiscreteField& f, int cell, const CellGeometry& g, const Point& x, std::vector<double>& buf) {
  const LagrangeRef& ref = lagrange_ref(2, f.space->degree());
  buf.resize(ref.size());
  ref.eval(to_ref(g, x), buf.data(), nullptr, nullptr);
  const int* d = f.space->cell_dofs(cell);
  double s = 0.0;
  for (int i = 0; i < ref.size(); ++i) s += f.coeffs[d[i]] * buf[i];
  return s;
}

enum class Side { Bottom, Top, Lateral };

Side side_of(const FacetInfo& f) {
  if (f.normal[1] < -0.5) return Side::Bottom;
  if (f.normal[1] > 0.5) return Side::Top;
  return Side::Lateral;
}

void check_spacetime(const DiscreteField& v, const ProblemSpec& spec) {
  if (!spec.parabolic) throw EstimateError("space-time estimate needs a parabolic problem");
  if (v.space->family() != Family::Lagrange || v.space->mesh().dim != 2)
    throw EstimateError("space-time estimate needs a scalar field on an (x, t) mesh");
}

bool lateral_dirichlet(const ProblemSpec& spec) {
  return spec.tags.left == BcTag::Dirichlet || spec.tags.right == BcTag::Dirichlet;
}

EmbeddingConstants spatial_constants(const ProblemSpec& spec) {
  Box b{1, {spec.box.lo[0], 0.0}, {spec.box.hi[0], 0.0}};
  SideTags t;
  t.left = spec.tags.left;
  t.right = spec.tags.right;
  return embedding_constants(b, t);
}

// values of v, m(t) and derivatives at the quadrature points of a cell
struct StPoint {
  Point x;
  double w, v, vx, vt, m, dm;
};

void cell_points(const DiscreteField& v, const MeanProfile* mp, int c, const QuadratureRule& q, ScalarTab& tab,
                 std::vector<StPoint>& out) {
  tabulate_scalar(*v.space, c, q, tab);
  const int* d = v.space->cell_dofs(c);
  out.resize(tab.nq);
  for (int k = 0; k < tab.nq; ++k) {
    StPoint& p = out[k];
    p.x = tab.x[k];
    p.w = tab.w[k];
    p.v = p.vx = p.vt = 0.0;
    for (int i = 0; i < tab.nloc; ++i) {
      const double cf = v.coeffs[d[i]];
      p.v += cf * tab.phi[k * tab.nloc + i];
      p.vx += cf * tab.dphi[(k * tab.nloc + i) * 2];
      p.vt += cf * tab.dphi[(k * tab.nloc + i) * 2 + 1];
    }
    p.m = mp ? mp->value(p.x[1]) : 0.0;
    p.dm = mp ? mp->derivative(p.x[1]) : 0.0;
  }
}

}  // namespace

// ---------------------------------------------------------------- mean profile

MeanProfile::MeanProfile(const DiscreteField& v) {
  const Mesh& mesh = v.space->mesh();
  if (mesh.dim != 2) throw EstimateError("mean profile needs an (x, t) mesh");
  for (const auto& p : mesh.vertices) breaks_.push_back(p[1]);
  std::sort(breaks_.begin(), breaks_.end());
  breaks_.erase(std::unique(breaks_.begin(), breaks_.end(),
                            [](double a, double b) { return std::abs(a - b) <= 1e-14 * (1.0 + std::abs(a)); }),
                breaks_.end());
  const int ns = static_cast<int>(breaks_.size()) - 1;
  npts_ = v.space->degree() + 2;
  samples_.assign(static_cast<std::size_t>(ns) * npts_, 0.0);
  QuadratureRule gl = gauss_legendre(v.space->degree() + 1);
  std::vector<double> buf;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cv = mesh.cells[c];
    Point P[3] = {mesh.vertices[cv[0]], mesh.vertices[cv[1]], mesh.vertices[cv[2]]};
    const double tmin = std::min({P[0][1], P[1][1], P[2][1]});
    const double tmax = std::max({P[0][1], P[1][1], P[2][1]});
    CellGeometry g = cell_geometry(mesh, c);
    int s0 = static_cast<int>(std::lower_bound(breaks_.begin(), breaks_.end(), tmin - 1e-14) - breaks_.begin());
    for (int s = s0; s < ns && breaks_[s] < tmax - 1e-14; ++s) {
      for (int j = 0; j < npts_; ++j) {
        const double t = breaks_[s] + (j + 0.5) / npts_ * (breaks_[s + 1] - breaks_[s]);
        // horizontal slice of the triangle
        double xa = 1e300, xb = -1e300;
        for (int e = 0; e < 3; ++e) {
          const Point& A = P[e];
          const Point& B = P[(e + 1) % 3];
          if ((A[1] - t) * (B[1] - t) > 0.0 || A[1] == B[1]) continue;
          const double x = A[0] + (t - A[1]) / (B[1] - A[1]) * (B[0] - A[0]);
          xa = std::min(xa, x);
          xb = std::max(xb, x);
        }
        if (!(xb > xa)) continue;
        double s_int = 0.0;
        for (int k = 0; k < gl.size(); ++k) {
          Point x{xa + gl.points[k][0] * (xb - xa), t};
          s_int += gl.weights[k] * eval_at(v, c, g, x, buf);
        }
        samples_[static_cast<std::size_t>(s) * npts_ + j] += s_int * (xb - xa);
      }
    }
  }
  const double len = mesh.box.hi[0] - mesh.box.lo[0];
  for (double& x : samples_) x /= len;
}

void MeanProfile::eval(double t, double& m, double& dm) const {
  m = dm = 0.0;
  if (breaks_.size() < 2) return;
  int s = static_cast<int>(std::upper_bound(breaks_.begin(), breaks_.end(), t) - breaks_.begin()) - 1;
  s = std::clamp(s, 0, static_cast<int>(breaks_.size()) - 2);
  const double a = breaks_[s], h = breaks_[s + 1] - a;
  const double r = (t - a) / h;
  const double* y = &samples_[static_cast<std::size_t>(s) * npts_];
  // Lagrange interpolation through r_j = (j + 1/2) / n
  for (int j = 0; j < npts_; ++j) {
    const double rj = (j + 0.5) / npts_;
    double l = 1.0, dl = 0.0;
    for (int k = 0; k < npts_; ++k) {
      if (k == j) continue;
      const double rk = (k + 0.5) / npts_;
      const double f = (r - rk) / (rj - rk);
      dl = dl * f + l / (rj - rk);
      l *= f;
    }
    m += y[j] * l;
    dm += y[j] * dl / h;
  }
}

double MeanProfile::value(double t) const {
  double m, dm;
  eval(t, m, dm);
  return m;
}

double MeanProfile::derivative(double t) const {
  double m, dm;
  eval(t, m, dm);
  return dm;
}

// ---------------------------------------------------------------- majorant

double mu_opt(double beta, double gamma, double c_f, double eps, double lambda) {
  if (lambda <= 1e-12) return 0.0;
  const double k = (1.0 + beta) * c_f * c_f * lambda;
  return k / (k + beta * gamma * eps);
}

namespace {

struct StContext {
  const DiscreteField& v;
  const ProblemSpec& spec;
  const SpaceTimeOptions& opt;
  std::unique_ptr<MeanProfile> mp;
  double cf = 0.0, ctr = 0.0, eps = 1.0;
  QuadratureRule q;

  StContext(const DiscreteField& vv, const ProblemSpec& s, const SpaceTimeOptions& o)
      : v(vv), spec(s), opt(o), q(cell_rule(2, kDefaultQuadDegree)) {
    check_spacetime(v, spec);
    if (opt.mean_correction && !lateral_dirichlet(spec)) mp = std::make_unique<MeanProfile>(v);
    EmbeddingConstants ec = spatial_constants(spec);
    cf = ec.c_friedrichs;
    ctr = lateral_dirichlet(spec) && spec.tags.left == spec.tags.right ? 0.0 : ec.c_trace;
    eps = spec.epsilon;
  }

  double g0(const StPoint& p) const {
    const double vh = p.v - p.m;
    return spec.f(p.x, p.x[1]) - (p.vt - p.dm) - spec.F(p.x, 0, p.x[1]) * p.vx - spec.lambda(p.x, p.x[1]) * vh;
  }
};

void fill_mu(const StContext& ctx, double beta, MuMode mode, std::vector<double>& mu, bool& zero_flag) {
  const Mesh& mesh = ctx.v.space->mesh();
  mu.assign(static_cast<std::size_t>(mesh.n_cells()) * ctx.q.size(), 0.0);
  zero_flag = false;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellGeometry g = cell_geometry(mesh, c);
    for (int k = 0; k < ctx.q.size(); ++k) {
      Point x = g.map(ctx.q.points[k]);
      const double lam = ctx.spec.lambda(x, x[1]);
      double m;
      if (mode == MuMode::Opt) {
        m = mu_opt(beta, ctx.opt.gamma, ctx.cf, ctx.eps, lam);
      } else if (lam > 1e-12) {
        m = 1.0;
      } else {
        m = 0.0;
        zero_flag = true;
      }
      mu[static_cast<std::size_t>(c) * ctx.q.size() + k] = m;
    }
  }
}

SpaceTimeCertificate evaluate(const StContext& ctx, const DiscreteField& y, double beta,
                              const std::vector<double>& mu) {
  const Mesh& mesh = ctx.v.space->mesh();
  const FeSpace& ys = *y.space;
  if (ys.family() != Family::Lagrange || ys.mesh_ptr() != ctx.v.space->mesh_ptr())
    throw EstimateError("space-time flux must be scalar Lagrange on the same mesh");
  if (mu.size() != static_cast<std::size_t>(mesh.n_cells()) * ctx.q.size())
    throw EstimateError("mu field does not match the quadrature layout");
  SpaceTimeCertificate out;
  out.beta = beta;
  out.gamma = ctx.opt.gamma;
  out.mu = mu;
  out.alpha[0] = 1.0 + 1.0 / beta;  // equilibrium residual
  out.alpha[1] = 1.0 + beta;        // flux residual
  out.alpha[2] = 2.0;               // boundary
  out.indicators.assign(mesh.n_cells(), 0.0);
  const double kf = ctx.cf * ctx.cf / ctx.eps;
  std::vector<double> ireq(mesh.n_cells(), 0.0), ird(mesh.n_cells(), 0.0);
  ScalarTab tv, ty;
  std::vector<StPoint> pts;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    cell_points(ctx.v, ctx.mp.get(), c, ctx.q, tv, pts);
    tabulate_scalar(ys, c, ctx.q, ty);
    const int* yd = ys.cell_dofs(c);
    double cm = 0.0;
    for (int k = 0; k < ctx.q.size(); ++k) {
      const StPoint& p = pts[k];
      double yy = 0.0, yx = 0.0;
      for (int i = 0; i < ty.nloc; ++i) {
        yy += y.coeffs[yd[i]] * ty.phi[k * ty.nloc + i];
        yx += y.coeffs[yd[i]] * ty.dphi[(k * ty.nloc + i) * 2];
      }
      const double r = ctx.g0(p) + yx;
      const double rd = yy - ctx.eps * p.vx;
      const double m = mu[static_cast<std::size_t>(c) * ctx.q.size() + k];
      const double lam = ctx.spec.lambda(p.x, p.x[1]);
      if (m > 0.0) cm += p.w * ctx.opt.gamma * m * m * r * r / lam;
      ireq[c] += p.w * kf * (1 - m) * (1 - m) * r * r;
      ird[c] += p.w * rd * rd / ctx.eps;
    }
    out.mu_term += cm;
    out.indicators[c] += cm;
  }
  // initial error and lateral flux
  std::vector<Point> fp;
  std::vector<double> fw, buf;
  const double kb = 2.0 * ctx.ctr * ctx.ctr / ctx.eps;
  for (const auto& f : boundary_facet_info(mesh)) {
    const Side sd = side_of(f);
    if (sd == Side::Top) continue;
    if (sd == Side::Lateral && (f.tag == BcTag::Dirichlet || kb == 0.0)) continue;
    facet_rule(2, f.local, kDefaultQuadDegree, fp, fw);
    CellGeometry g = cell_geometry(mesh, f.cell);
    double s = 0.0;
    for (std::size_t k = 0; k < fp.size(); ++k) {
      Point x = g.map(fp[k]);
      const double w = fw[k] * f.measure;
      if (sd == Side::Bottom) {
        const double m = ctx.mp ? ctx.mp->value(x[1]) : 0.0;
        const double e0 = ctx.spec.initial(x, 0.0) - (eval_at(ctx.v, f.cell, g, x, buf) - m);
        s += w * e0 * e0;
      } else {
        const double yy = eval_at(y, f.cell, g, x, buf);
        s += w * kb * yy * yy;
      }
    }
    if (sd == Side::Bottom)
      out.e0 += s;
    else
      out.bnd += s;
    out.indicators[f.cell] += s;
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    out.req += ireq[c];
    out.rd += ird[c];
    out.indicators[c] += out.alpha[0] * ireq[c] + out.alpha[1] * ird[c];
  }
  const double total = out.e0 + out.mu_term + out.alpha[0] * out.req + out.alpha[1] * out.rd + out.bnd;
  out.majorant = std::sqrt(std::max(0.0, total));
  out.flux = y;
  return out;
}

}  // namespace

SpaceTimeCertificate evaluate_parabolic_majorant(const DiscreteField& v, const ProblemSpec& spec,
                                                 const DiscreteField& y, double beta, const std::vector<double>& mu,
                                                 const SpaceTimeOptions& opt) {
  if (!(beta > 0.0)) throw EstimateError("beta must be positive");
  StContext ctx(v, spec, opt);
  return evaluate(ctx, y, beta, mu);
}

SpaceTimeCertificate parabolic_majorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr ys,
                                        const SpaceTimeOptions& opt) {
  StContext ctx(v, spec, opt);
  if (ys->family() != Family::Lagrange || ys->mesh_ptr() != v.space->mesh_ptr())
    throw EstimateError("space-time flux must be scalar Lagrange on the same mesh");
  const Mesh& mesh = v.space->mesh();
  const int n = ys->n_dofs(), nl = ys->n_local();
  double beta = 1.0;
  bool zero_flag = false;
  std::vector<double> mu;
  fill_mu(ctx, beta, opt.mu_mode, mu, zero_flag);
  const double kf = ctx.cf * ctx.cf / ctx.eps;
  const double kb = 2.0 * ctx.ctr * ctx.ctr / ctx.eps;
  auto facets = boundary_facet_info(mesh);
  SpaceTimeCertificate best;
  bool have = false;
  ScalarTab tv, ty;
  std::vector<StPoint> pts;
  std::vector<double> ke(static_cast<std::size_t>(nl) * nl);
  for (int sweep = 0; sweep < std::max(1, opt.sweeps); ++sweep) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.n_cells()) * nl * nl);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      cell_points(v, ctx.mp.get(), c, ctx.q, tv, pts);
      tabulate_scalar(*ys, c, ctx.q, ty);
      const int* yd = ys->cell_dofs(c);
      std::fill(ke.begin(), ke.end(), 0.0);
      for (int k = 0; k < ctx.q.size(); ++k) {
        const StPoint& p = pts[k];
        const double m = mu[static_cast<std::size_t>(c) * ctx.q.size() + k];
        const double lam = spec.lambda(p.x, p.x[1]);
        const double ceq = (1.0 + 1.0 / beta) * kf * (1 - m) * (1 - m) + (m > 0.0 ? opt.gamma * m * m / lam : 0.0);
        const double cd = (1.0 + beta) / ctx.eps;
        const double g = ctx.g0(p);
        for (int i = 0; i < nl; ++i) {
          const double pi = ty.phi[k * nl + i], pix = ty.dphi[(k * nl + i) * 2];
          b[yd[i]] += p.w * (-ceq * g * pix + cd * ctx.eps * p.vx * pi);
          for (int j = 0; j < nl; ++j)
            ke[i * nl + j] += p.w * (ceq * pix * ty.dphi[(k * nl + j) * 2] + cd * pi * ty.phi[k * nl + j]);
        }
      }
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) trip.emplace_back(yd[i], yd[j], ke[i * nl + j]);
    }
    if (kb > 0.0) {
      std::vector<Point> fp;
      std::vector<double> fw;
      for (const auto& f : facets) {
        if (side_of(f) != Side::Lateral || f.tag == BcTag::Dirichlet) continue;
        facet_rule(2, f.local, kDefaultQuadDegree, fp, fw);
        tabulate_scalar_at(*ys, f.cell, fp, {}, ty);
        const int* yd = ys->cell_dofs(f.cell);
        for (std::size_t k = 0; k < fp.size(); ++k)
          for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
              trip.emplace_back(yd[i], yd[j], fw[k] * f.measure * kb * ty.phi[k * nl + i] * ty.phi[k * nl + j]);
      }
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    SparseFactor fac = factor_spd(a);
    Eigen::VectorXd yv = fac.solve(b);
    for (int it = 0; it < 2; ++it) yv += fac.solve(b - a * yv);
    DiscreteField y(ys, yv);
    SpaceTimeCertificate cur = evaluate(ctx, y, beta, mu);
    // closed-form beta, then the weight field
    const double A = ctx.cf * ctx.cf / ctx.eps > 0.0 ? cur.req : 0.0;
    double nb = cur.rd > 0.0 ? std::sqrt(A / cur.rd) : 1e7;
    beta = std::clamp(nb, 1e-7, 1e7);
    fill_mu(ctx, beta, opt.mu_mode, mu, zero_flag);
    SpaceTimeCertificate next = evaluate(ctx, y, beta, mu);
    if (have && !(next.majorant <= best.majorant)) break;
    next.history = best.history;
    next.history.push_back(next.majorant * next.majorant);
    best = std::move(next);
    have = true;
  }
  best.lambda_zero_with_mu_one = opt.mu_mode == MuMode::One && zero_flag;
  return best;
}

// ---------------------------------------------------------------- minorant

namespace {

struct StMinorantSystem {
  SparseMatrix b;
  Eigen::VectorXd l;
};

StMinorantSystem assemble_st_minorant(const DiscreteField& v, const ProblemSpec& spec, const FeSpace& es) {
  const Mesh& mesh = es.mesh();
  const int n = es.n_dofs(), nl = es.n_local();
  const double eps = spec.epsilon;
  QuadratureRule q = cell_rule(2, kDefaultQuadDegree);
  ScalarTab te, tv;
  std::vector<StPoint> pts;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.n_cells()) * nl * nl);
  StMinorantSystem out;
  out.l = Eigen::VectorXd::Zero(n);
  std::vector<double> ke(static_cast<std::size_t>(nl) * nl);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    cell_points(v, nullptr, c, q, tv, pts);
    tabulate_scalar(es, c, q, te);
    const int* ed = es.cell_dofs(c);
    std::fill(ke.begin(), ke.end(), 0.0);
    for (int k = 0; k < q.size(); ++k) {
      const StPoint& p = pts[k];
      const double t = p.x[1];
      const double a = spec.F(p.x, 0, t);
      const double lam = spec.lambda(p.x, t);
      const double rho = std::abs(lam - spec.div_drift(p.x, t));
      const double src = spec.f(p.x, t) - a * p.vx - lam * p.v;
      for (int i = 0; i < nl; ++i) {
        const double pi = te.phi[k * nl + i];
        const double* di = &te.dphi[(k * nl + i) * 2];
        out.l[ed[i]] += p.w * (src * pi + p.v * di[1] - eps * p.vx * di[0]);
        for (int j = 0; j < nl; ++j) {
          const double* dj = &te.dphi[(k * nl + j) * 2];
          ke[i * nl + j] += p.w * (eps * di[0] * dj[0] + di[1] * dj[1] + rho * pi * te.phi[k * nl + j]);
        }
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) trip.emplace_back(ed[i], ed[j], ke[i * nl + j]);
  }
  std::vector<Point> fp;
  std::vector<double> fw, buf;
  for (const auto& f : boundary_facet_info(mesh)) {
    const Side sd = side_of(f);
    facet_rule(2, f.local, kDefaultQuadDegree, fp, fw);
    tabulate_scalar_at(es, f.cell, fp, {}, te);
    CellGeometry g = cell_geometry(mesh, f.cell);
    const int* ed = es.cell_dofs(f.cell);
    for (std::size_t k = 0; k < fp.size(); ++k) {
      const Point& x = te.x[k];
      const double w = fw[k] * f.measure;
      double lin = 0.0, quad = 0.0;
      if (sd == Side::Bottom) {
        lin = spec.initial(x, 0.0);
      } else if (sd == Side::Top) {
        lin = -eval_at(v, f.cell, g, x, buf);
        quad = 1.0;
      } else {
        quad = std::abs(spec.F(x, 0, x[1]) * f.normal[0]);
      }
      for (int i = 0; i < nl; ++i) {
        const double pi = te.phi[k * nl + i];
        out.l[ed[i]] += w * lin * pi;
        if (quad != 0.0)
          for (int j = 0; j < nl; ++j) trip.emplace_back(ed[i], ed[j], w * quad * pi * te.phi[k * nl + j]);
      }
    }
  }
  out.b.resize(n, n);
  out.b.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace

double parabolic_minorant_functional(const DiscreteField& v, const ProblemSpec& spec, const DiscreteField& eta) {
  check_spacetime(v, spec);
  if (eta.space->family() != Family::Lagrange || eta.space->mesh_ptr() != v.space->mesh_ptr())
    throw EstimateError("minorant test field must be scalar Lagrange on the same mesh");
  StMinorantSystem s = assemble_st_minorant(v, spec, *eta.space);
  return s.l.dot(eta.coeffs) - 0.5 * eta.coeffs.dot(s.b * eta.coeffs);
}

double parabolic_minorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr es, DiscreteField* eta_out) {
  check_spacetime(v, spec);
  if (es->family() != Family::Lagrange || es->mesh_ptr() != v.space->mesh_ptr())
    throw EstimateError("minorant space must be scalar Lagrange on the same mesh");
  if (es->degree() <= v.space->degree())
    throw EstimateError("SpaceNotRicher: minorant space degree must exceed the approximation degree");
  StMinorantSystem s = assemble_st_minorant(v, spec, *es);
  Eigen::VectorXd eta = factor_spd(s.b).solve(s.l);
  const double val = s.l.dot(eta) - 0.5 * eta.dot(s.b * eta);
  if (eta_out) *eta_out = DiscreteField(es, eta);
  return std::max(0.0, val);
}

// ---------------------------------------------------------------- error measures

SpaceTimeMeasures parabolic_error_norm(const DiscreteField& v, const ProblemSpec& spec, const SpaceTimeOptions& opt) {
  check_spacetime(v, spec);
  if (!(spec.exact && spec.exact_grad)) throw EstimateError("NoReference: no exact solution available");
  const Mesh& mesh = v.space->mesh();
  std::unique_ptr<MeanProfile> mp;
  if (opt.mean_correction && !lateral_dirichlet(spec)) mp = std::make_unique<MeanProfile>(v);
  const double eps = spec.epsilon;
  QuadratureRule q = cell_rule(2, kDefaultQuadDegree);
  ScalarTab tv;
  std::vector<StPoint> pts;
  double up = 0.0, lo = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    cell_points(v, mp.get(), c, q, tv, pts);
    for (const StPoint& p : pts) {
      const double t = p.x[1];
      const double u = spec.exact(p.x, t);
      const Point gu = spec.exact_grad(p.x, t);
      const double a = spec.F(p.x, 0, t), ax = spec.div_drift(p.x, t), lam = spec.lambda(p.x, t);
      const double eh = u - (p.v - p.m), e = u - p.v, ex = gu[0] - p.vx;
      up += p.w * (0.5 * eps * ex * ex + (2.0 - 1.0 / opt.gamma) * lam * eh * eh - ax * eh * eh);
      const double rho = std::abs(lam - ax);
      lo += p.w * (0.5 * eps * ex * ex + 0.5 * (1.0 + a * a / eps + ax + rho) * e * e);
    }
  }
  std::vector<Point> fp;
  std::vector<double> fw, buf;
  for (const auto& f : boundary_facet_info(mesh)) {
    const Side sd = side_of(f);
    if (sd == Side::Bottom) continue;
    facet_rule(2, f.local, kDefaultQuadDegree, fp, fw);
    CellGeometry g = cell_geometry(mesh, f.cell);
    for (std::size_t k = 0; k < fp.size(); ++k) {
      Point x = g.map(fp[k]);
      const double w = fw[k] * f.measure;
      const double vv = eval_at(v, f.cell, g, x, buf);
      const double u = spec.exact(x, x[1]);
      const double m = mp ? mp->value(x[1]) : 0.0;
      const double e = u - vv, eh = u - (vv - m);
      if (sd == Side::Top) {
        up += w * eh * eh;
        lo += w * 0.5 * e * e;
      } else {
        const double an = spec.F(x, 0, x[1]) * f.normal[0];
        up += w * an * eh * eh;
        lo += w * std::max(0.0, -an) * e * e;
      }
    }
  }
  SpaceTimeMeasures m;
  m.upper_raw = up;
  m.upper = std::sqrt(std::max(0.0, up));
  m.lower = std::sqrt(std::max(0.0, lo));
  return m;
}

ErrorIdentity error_identity(const DiscreteField& v, const ProblemSpec& spec) {
  check_spacetime(v, spec);
  if (!(spec.exact && spec.exact_grad)) throw EstimateError("NoReference: no exact solution available");
  const Mesh& mesh = v.space->mesh();
  const double eps = spec.epsilon;
  ErrorIdentity out;
  out.certified = v.space->degree() >= 2;
  QuadratureRule q = cell_rule(2, kDefaultQuadDegree);
  ScalarTab tab;
  double eid = 0.0, strong = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    tabulate_scalar(*v.space, c, q, tab, true);
    const int* d = v.space->cell_dofs(c);
    for (int k = 0; k < tab.nq; ++k) {
      const Point& x = tab.x[k];
      const double t = x[1];
      double vt = 0.0, vxx = 0.0;
      for (int i = 0; i < tab.nloc; ++i) {
        vt += v.coeffs[d[i]] * tab.dphi[(k * tab.nloc + i) * 2 + 1];
        vxx += v.coeffs[d[i]] * tab.hphi[(k * tab.nloc + i) * 3];
      }
      const double f = spec.f(x, t);
      const double ut = spec.exact_grad(x, t)[1];
      const double res = f + eps * vxx - vt;
      // eps u_xx = u_t - f for the diffusion-only equation
      const double lap_e = (ut - f) - eps * vxx;
      const double et = ut - vt;
      eid += tab.w[k] * res * res;
      strong += tab.w[k] * (lap_e * lap_e + et * et);
    }
  }
  std::vector<Point> fp;
  std::vector<double> fw;
  for (const auto& f : boundary_facet_info(mesh)) {
    const Side sd = side_of(f);
    if (sd == Side::Lateral) continue;
    facet_rule(2, f.local, kDefaultQuadDegree, fp, fw);
    tabulate_scalar_at(*v.space, f.cell, fp, {}, tab);
    const int* d = v.space->cell_dofs(f.cell);
    for (std::size_t k = 0; k < fp.size(); ++k) {
      const Point& x = tab.x[k];
      double vx = 0.0;
      for (int i = 0; i < tab.nloc; ++i) vx += v.coeffs[d[i]] * tab.dphi[(k * tab.nloc + i) * 2];
      const double ex = spec.exact_grad(x, x[1])[0] - vx;
      const double w = fw[k] * f.measure * eps * ex * ex;
      if (sd == Side::Bottom)
        eid += w;
      else
        strong += w;
    }
  }
  out.eid = std::sqrt(eid);
  out.strong = std::sqrt(strong);
  return out;
}

void attach_errors(SpaceTimeCertificate& c, const SpaceTimeMeasures& m) {
  c.err_upper = m.upper;
  c.err_lower = m.lower;
  c.ieff_maj = m.upper > 0 ? c.majorant / m.upper : std::numeric_limits<double>::quiet_NaN();
  c.ieff_min = m.lower > 0 ? c.minorant / m.lower : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace fpe
