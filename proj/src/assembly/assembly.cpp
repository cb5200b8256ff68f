#include "fpe/assembly.hpp"

#include <algorithm>
#include <cmath>

namespace fpe {

using Triplet = Eigen::Triplet<double>;

double supg_delta(const ProblemSpec& spec, const Mesh& mesh, int cell, const SupgParams& p) {
  if (!spec.drift) return 0.0;
  const double h = mesh.cell_diameter(cell);
  const double eps = spec.eps_min(mesh.dim);
  CellGeometry g = cell_geometry(mesh, cell);
  QuadratureRule q = cell_rule(mesh.dim, 4);
  double fmax = 0.0;
  auto probe = [&](const Point& x) {
    Point F = spec.drift_at(x);
    fmax = std::max(fmax, std::hypot(F[0], mesh.dim == 2 ? F[1] : 0.0));
  };
  for (int i = 0; i <= mesh.dim; ++i) probe(mesh.vertices[mesh.cells[cell][i]]);
  for (int i = 0; i < q.size(); ++i) probe(g.map(q.points[i]));
  if (fmax == 0.0) return 0.0;
  const double peclet = fmax * h / (2.0 * eps);
  if (peclet > 1.0) return p.delta0 * h / fmax;
  return p.delta1 * h * h / eps;
}

std::vector<FacetInfo> flux_facets(const ProblemSpec& spec, const Mesh& mesh) {
  std::vector<FacetInfo> out;
  for (const auto& f : boundary_facet_info(mesh)) {
    if (f.tag == BcTag::Dirichlet) continue;
    if (spec.layout == BcLayout::FullDirichlet) continue;
    out.push_back(f);
  }
  return out;
}

void check_incoming_flux(const ProblemSpec& spec, const Mesh& mesh) {
  if (spec.layout == BcLayout::FullDirichlet) return;
  std::vector<Point> pts;
  std::vector<double> w;
  for (const auto& f : flux_facets(spec, mesh)) {
    facet_rule(mesh.dim, f.local, 4, pts, w);
    CellGeometry g = cell_geometry(mesh, f.cell);
    for (const auto& xi : pts) {
      Point x = g.map(xi);
      Point F = spec.drift_at(x);
      double fn = F[0] * f.normal[0] + F[1] * f.normal[1];
      if (fn > 1e-12) throw AssemblyError("IncomingFluxViolated: F.n > 0 on the flux boundary");
    }
  }
}

void apply_dirichlet(SparseMatrix& a, Eigen::VectorXd& b, const std::vector<int>& dofs,
                     const std::vector<double>& values) {
  if (dofs.empty()) return;
  const int n = static_cast<int>(a.rows());
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    fixed[dofs[i]] = 1;
    g[dofs[i]] = values[i];
  }
  b -= a * g;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      if (fixed[it.row()] || fixed[it.col()]) it.valueRef() = it.row() == it.col() ? 1.0 : 0.0;
  for (int i : dofs) b[i] = g[i];
  a.prune(0.0);
  // keep the diagonal entry of fixed rows even if it was structurally absent
  std::vector<Triplet> t;
  for (int i : dofs)
    if (a.coeff(i, i) != 1.0) t.emplace_back(i, i, 1.0 - a.coeff(i, i));
  if (!t.empty()) {
    SparseMatrix d(n, n);
    d.setFromTriplets(t.begin(), t.end());
    a += d;
  }
}

LinearSystem assemble_static(const ProblemSpec& spec, const FeSpace& space, Stabilization stab,
                             const SupgParams& p) {
  if (space.family() != Family::Lagrange) throw AssemblyError("static problems need a Lagrange space");
  const Mesh& mesh = space.mesh();
  if (spec.layout != BcLayout::FullDirichlet) check_incoming_flux(spec, mesh);
  const bool zero_mean = space.constraint() == Constraint::ZeroMean;
  if (spec.layout == BcLayout::Robin && !zero_mean)
    throw AssemblyError("Robin problems need a zero-mean space");
  const int n = space.n_dofs();
  const int N = zero_mean ? n + 1 : n;
  const int dim = mesh.dim;
  const bool second = stab == Stabilization::Supg && space.degree() > 1;
  QuadratureRule q = cell_rule(dim, kDefaultQuadDegree);
  ScalarTab t;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.n_cells()) * space.n_local() * space.n_local() +
               (zero_mean ? 2 * n : 0));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
  const int nl = space.n_local();
  std::vector<double> ke(nl * nl), be(nl);
  std::vector<double> conv(nl), res(nl);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    tabulate_scalar(space, c, q, t, second);
    const int* cd = space.cell_dofs(c);
    const double delta = stab == Stabilization::Supg ? supg_delta(spec, mesh, c, p) : 0.0;
    std::fill(ke.begin(), ke.end(), 0.0);
    std::fill(be.begin(), be.end(), 0.0);
    for (int k = 0; k < t.nq; ++k) {
      const Point& x = t.x[k];
      const double w = t.w[k];
      const Point F = spec.drift_at(x);
      const double lc = spec.lambda_c(x);
      const double lnc = spec.lambda_nc(x);
      const double fx = spec.f(x);
      if (spec.lambda(x) < 0.0) throw AssemblyError("SingularReaction: negative reaction coefficient");
      const double* phi = &t.phi[k * nl];
      const double* dphi = &t.dphi[k * nl * 2];
      for (int i = 0; i < nl; ++i) {
        conv[i] = F[0] * dphi[2 * i] + (dim == 2 ? F[1] * dphi[2 * i + 1] : 0.0);
        double r = conv[i] + lnc * phi[i];
        if (second) {
          const double* h = &t.hphi[(k * nl + i) * 3];
          r -= spec.diff(0) * h[0] + (dim == 2 ? spec.diff(1) * h[2] : 0.0);
        }
        res[i] = r;
        mass[cd[i]] += w * phi[i];
      }
      for (int i = 0; i < nl; ++i) {
        be[i] += w * fx * (phi[i] + delta * conv[i]);
        for (int j = 0; j < nl; ++j) {
          double a = spec.diff(0) * dphi[2 * j] * dphi[2 * i];
          if (dim == 2) a += spec.diff(1) * dphi[2 * j + 1] * dphi[2 * i + 1];
          a += -phi[j] * conv[i] + lc * phi[j] * phi[i];
          a += delta * res[j] * conv[i];
          ke[i * nl + j] += w * a;
        }
      }
    }
    for (int i = 0; i < nl; ++i) {
      b[cd[i]] += be[i];
      for (int j = 0; j < nl; ++j) trip.emplace_back(cd[i], cd[j], ke[i * nl + j]);
    }
  }
  if (zero_mean) {
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(n, i, mass[i]);
      trip.emplace_back(i, n, mass[i]);
    }
  }
  LinearSystem sys;
  sys.matrix.resize(N, N);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.rhs = b;
  if (!zero_mean) {
    std::vector<double> vals;
    for (int i : space.dirichlet_nodes()) vals.push_back(spec.g(space.node_points()[i]));
    apply_dirichlet(sys.matrix, sys.rhs, space.dirichlet_nodes(), vals);
  }
  return sys;
}

DiscreteField solve_static(const ProblemSpec& spec, SpacePtr space, Stabilization stab, const SupgParams& p) {
  LinearSystem sys = assemble_static(spec, *space, stab, p);
  Eigen::VectorXd x = solve(sys);
  return DiscreteField(space, x.head(space->n_dofs()));
}

LinearSystem assemble_spacetime(const ProblemSpec& spec, const FeSpace& trial, const FeSpace& test) {
  if (!spec.parabolic) throw AssemblyError("space-time assembly needs a parabolic problem");
  if (spec.conservative) throw AssemblyError("space-time assembly supports the convective form only");
  if (trial.family() != Family::Lagrange || test.family() != Family::Lagrange)
    throw AssemblyError("NonMatchingSpaces: Lagrange spaces expected");
  const bool same_mesh = trial.mesh_ptr() == test.mesh_ptr() ||
                         (trial.mesh().vertices == test.mesh().vertices && trial.mesh().cells == test.mesh().cells);
  if (!same_mesh || trial.degree() > test.degree())
    throw AssemblyError("NonMatchingSpaces: trial space is not contained in the test space");
  if (trial.degree() != test.degree()) throw AssemblyError("NonMatchingSpaces: only square systems are supported");
  const Mesh& mesh = trial.mesh();
  if (mesh.dim != 2) throw AssemblyError("space-time mesh must be two-dimensional (x, t)");
  const int n = trial.n_dofs();
  const int nl = trial.n_local();
  QuadratureRule q = cell_rule(2, kDefaultQuadDegree);
  ScalarTab t;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.n_cells()) * nl * nl);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  std::vector<double> ke(nl * nl);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    tabulate_scalar(trial, c, q, t);
    const int* cd = trial.cell_dofs(c);
    std::fill(ke.begin(), ke.end(), 0.0);
    for (int k = 0; k < t.nq; ++k) {
      const Point& x = t.x[k];
      const double tt = x[1];
      const double w = t.w[k];
      const double a = spec.F(x, 0, tt);
      const double lam = spec.lambda(x, tt);
      const double fx = spec.f(x, tt);
      const double* phi = &t.phi[k * nl];
      const double* dphi = &t.dphi[k * nl * 2];
      for (int i = 0; i < nl; ++i) {
        b[cd[i]] += w * fx * phi[i];
        for (int j = 0; j < nl; ++j)
          ke[i * nl + j] += w * (spec.epsilon * dphi[2 * j] * dphi[2 * i] +
                                 (a * dphi[2 * j] + dphi[2 * j + 1] + lam * phi[j]) * phi[i]);
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) trip.emplace_back(cd[i], cd[j], ke[i * nl + j]);
  }
  LinearSystem sys;
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.rhs = b;
  std::vector<double> vals;
  for (int i : trial.dirichlet_nodes()) {
    const Point& x = trial.node_points()[i];
    vals.push_back(spec.initial ? spec.initial(x, x[1]) : 0.0);
  }
  apply_dirichlet(sys.matrix, sys.rhs, trial.dirichlet_nodes(), vals);
  return sys;
}

DiscreteField solve_spacetime(const ProblemSpec& spec, SpacePtr space) {
  LinearSystem sys = assemble_spacetime(spec, *space, *space);
  return DiscreteField(space, solve(sys));
}

FluxQuadratic assemble_majorant_flux_system(const DiscreteField& v, const ProblemSpec& spec,
                                            const FeSpace& fs, const MajorantWeights& wt) {
  const Mesh& mesh = fs.mesh();
  const int dim = mesh.dim;
  const FeSpace& vs = *v.space;
  const int n = fs.n_dofs();
  const int nl = fs.n_local();
  const double eps = spec.eps_min(dim);
  const double kf = (1.0 + 1.0 / wt.beta) * (1.0 + wt.zeta) * wt.c_f * wt.c_f / eps;
  const double kn = (1.0 + 1.0 / wt.beta) * (1.0 + 1.0 / wt.zeta) * wt.c_tr * wt.c_tr / eps;
  QuadratureRule q = cell_rule(dim, wt.quad_degree);
  if (wt.mu.size() != static_cast<std::size_t>(mesh.n_cells()) * q.size())
    throw AssemblyError("mu weights do not match the quadrature layout");
  VectorTab vt;
  ScalarTab st;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.n_cells()) * nl * nl);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  double cst = 0.0;
  std::vector<double> ke(nl * nl);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    tabulate_vector(fs, c, q, vt);
    tabulate_scalar(vs, c, q, st);
    const int* fd = fs.cell_dofs(c);
    const int* vd = vs.cell_dofs(c);
    std::fill(ke.begin(), ke.end(), 0.0);
    for (int k = 0; k < q.size(); ++k) {
      const Point& x = vt.x[k];
      const double w = vt.w[k];
      double vv = 0, gx = 0, gy = 0;
      for (int i = 0; i < st.nloc; ++i) {
        double cf = v.coeffs[vd[i]];
        vv += cf * st.phi[k * st.nloc + i];
        gx += cf * st.dphi[(k * st.nloc + i) * 2];
        gy += cf * st.dphi[(k * st.nloc + i) * 2 + 1];
      }
      const Point F = spec.drift_at(x);
      const double g0 = spec.f(x) - spec.div_drift(x) * vv - (F[0] * gx + (dim == 2 ? F[1] * gy : 0.0)) -
                        spec.lambda_c(x) * vv;
      const double mu = wt.mu[static_cast<std::size_t>(c) * q.size() + k];
      const double d2 = spec.delta2(x);
      const double ceq = kf * (1 - mu) * (1 - mu) + (d2 > 1e-12 ? mu * mu / d2 : 0.0);
      const double ax = 1.0 / spec.diff(0), ay = dim == 2 ? 1.0 / spec.diff(1) : 0.0;
      cst += w * ((1 + wt.beta) * (spec.diff(0) * gx * gx + (dim == 2 ? spec.diff(1) * gy * gy : 0.0)) +
                  ceq * g0 * g0);
      for (int i = 0; i < nl; ++i) {
        const double* pi = &vt.val[(k * nl + i) * 2];
        const double di = vt.div[k * nl + i];
        b[fd[i]] += w * ((1 + wt.beta) * (pi[0] * gx + pi[1] * gy) - ceq * g0 * di);
        for (int j = 0; j < nl; ++j) {
          const double* pj = &vt.val[(k * nl + j) * 2];
          ke[i * nl + j] +=
              w * ((1 + wt.beta) * (ax * pi[0] * pj[0] + ay * pi[1] * pj[1]) + ceq * di * vt.div[k * nl + j]);
        }
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) trip.emplace_back(fd[i], fd[j], ke[i * nl + j]);
  }
  // boundary residual (F v - y) . n on the flux boundary
  std::vector<Point> pts;
  std::vector<double> fw;
  auto facets = flux_facets(spec, mesh);
  std::size_t pos = 0;
  for (const auto& f : facets) {
    facet_rule(dim, f.local, wt.quad_degree, pts, fw);
    tabulate_vector_at(fs, f.cell, pts, {}, vt);
    tabulate_scalar_at(vs, f.cell, pts, {}, st);
    const int* fd = fs.cell_dofs(f.cell);
    const int* vd = vs.cell_dofs(f.cell);
    for (std::size_t k = 0; k < pts.size(); ++k, ++pos) {
      if (pos >= wt.theta.size()) throw AssemblyError("theta weights do not match the facet layout");
      const Point& x = vt.x[k];
      const double w = fw[k] * f.measure;
      double vv = 0;
      for (int i = 0; i < st.nloc; ++i) vv += v.coeffs[vd[i]] * st.phi[k * st.nloc + i];
      const Point F = spec.drift_at(x);
      const double fn = F[0] * f.normal[0] + F[1] * f.normal[1];
      const double chi2 = -0.5 * fn;
      const double th = wt.theta[pos];
      const double cn = kn * (1 - th) * (1 - th) + (chi2 > 1e-12 ? th * th / chi2 : 0.0);
      const double s = fn * vv;
      cst += w * cn * s * s;
      for (int i = 0; i < nl; ++i) {
        const double* pi = &vt.val[(k * nl + i) * 2];
        const double pin = pi[0] * f.normal[0] + pi[1] * f.normal[1];
        b[fd[i]] += w * cn * s * pin;
        for (int j = 0; j < nl; ++j) {
          const double* pj = &vt.val[(k * nl + j) * 2];
          trip.emplace_back(fd[i], fd[j], w * cn * pin * (pj[0] * f.normal[0] + pj[1] * f.normal[1]));
        }
      }
    }
  }
  FluxQuadratic out;
  out.system.matrix.resize(n, n);
  out.system.matrix.setFromTriplets(trip.begin(), trip.end());
  out.system.rhs = b;
  out.constant = cst;
  return out;
}

}  // namespace fpe
