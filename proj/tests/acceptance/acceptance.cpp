// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fpe/homotopy.hpp"
#include "fpe/presets.hpp"

using namespace fpe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::shared_ptr<const Mesh> shared(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, static_cast<double>(args)...);
  return buf;
}

std::vector<StudyRecord> uniform_static(const Preset& p, int steps, int deg_v) {
  StaticStudyOptions o;
  o.deg_v = deg_v;
  o.stab = p.stab;
  LoopOptions lo;
  lo.steps = steps;
  lo.uniform = true;
  auto recs = adaptive_loop(
      shared(p.mesh), [&](std::shared_ptr<const Mesh> m, int k) { return static_step(p.spec, m, k, o); }, lo);
  compute_eoc(recs, p.mesh.dim);
  return recs;
}

// ---------------------------------------------------------------- 1, 2

std::vector<StudyRecord> g_ex1_p1;

Outcome criterion1() {
  Outcome out;
  Preset p = make_preset("example1");
  auto t0 = Clock::now();
  g_ex1_p1 = uniform_static(p, 12, 1);
  const double t1 = seconds_since(t0);
  t0 = Clock::now();
  auto p2 = uniform_static(p, 12, 2);
  const double t2 = seconds_since(t0);
  auto band = [&](const std::vector<StudyRecord>& r, double lo, double hi, const char* tag) {
    double mn = INFINITY, mx = -INFINITY;
    for (int k = 9; k <= 11; ++k)
      for (double e : {r[k].eoc_err, r[k].eoc_maj, r[k].eoc_min}) {
        mn = std::min(mn, e);
        mx = std::max(mx, e);
      }
    out.require(mn >= lo && mx <= hi, std::string(tag) + fmt(" rates refs 9-11 in [%.3f, %.3f]", mn, mx));
  };
  band(g_ex1_p1, 0.95, 1.05, "P1");
  band(p2, 1.95, 2.05, "P2");
  out.require(t1 < 10.0, fmt("P1 run %.1f s (P2 %.1f s)", t1, t2));
  return out;
}

Outcome criterion2() {
  Outcome out;
  const auto& r = g_ex1_p1;
  out.require(r[12].ieff_maj <= 1.05, fmt("I_eff(M_up) ref 12 = %.3f", r[12].ieff_maj));
  out.require(std::abs(r[12].majorant / 6.44e-4 - 1) <= 0.10, fmt("M_up ref 12 = %.3e", r[12].majorant));
  double mn = INFINITY, mx = -INFINITY;
  for (std::size_t k = 2; k < r.size(); ++k) {
    mn = std::min(mn, r[k].ieff_min);
    mx = std::max(mx, r[k].ieff_min);
  }
  out.require(mn >= 0.99 && mx <= 1.01, fmt("I_eff(M_low) refs >= 2 in [%.4f, %.4f]", mn, mx));
  return out;
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  Outcome out;
  auto t0 = Clock::now();
  Preset p = make_preset("example2");
  const int top = 6;
  std::vector<std::shared_ptr<const Mesh>> h{shared(p.mesh)};
  for (int k = 0; k < top; ++k) h.push_back(shared(refine_uniform(*h.back())));
  // reference: P2 on the finest mesh of the hierarchy
  DiscreteField u = solve_static(p.spec, FeSpace::lagrange(h[top], 2), p.stab);
  StaticStudyOptions o;
  o.stab = p.stab;
  std::vector<StudyRecord> r;
  for (int k = 0; k <= top; ++k) {
    ReferenceSolution ref{u, ancestor_map(h, k, top)};
    r.push_back(static_step(p.spec, h[k], k, o, &ref).record);
  }
  const double t = seconds_since(t0);
  bool dec = true, inc = true;
  for (int k = 1; k <= top; ++k) {
    dec = dec && r[k].ieff_maj < r[k - 1].ieff_maj;
    inc = inc && r[k].ieff_min > r[k - 1].ieff_min;
  }
  out.require(r[0].ieff_maj > 10, fmt("I_eff(M_up) ref 0 = %.2f ([e] %.3e, M_up %.3e, [e]_low %.3e, M_low %.3e)",
                                      r[0].ieff_maj, r[0].err_upper, r[0].majorant, r[0].err_lower, r[0].minorant));
  out.require(r[top].ieff_maj <= 1.05, fmt("ref 6 = %.3f", r[top].ieff_maj));
  out.require(dec, "I_eff(M_up) decreasing");
  out.require(inc, fmt("I_eff(M_low) increasing %.3f -> %.3f", r[0].ieff_min, r[top].ieff_min));
  out.require(r[top].ieff_min >= 0.85, fmt("I_eff(M_low) ref 6 = %.3f", r[top].ieff_min));
  out.require(t < 120, fmt("%.1f s with P2 reference on ref 6", t));
  return out;
}

// ---------------------------------------------------------------- 4

struct BoundCount {
  int checks = 0, violations = 0;
  double worst_up = INFINITY, worst_low = INFINITY;  // margins M^2 - e^2 and e^2 - m^2
  void add_up(double margin) {
    ++checks;
    worst_up = std::min(worst_up, margin);
    if (margin < -1e-8) ++violations;
  }
  void add_low(double margin) {
    ++checks;
    worst_low = std::min(worst_low, margin);
    if (margin < -1e-8) ++violations;
  }
};

void static_bounds(const ProblemSpec& spec, const DiscreteField& v, std::mt19937& rng, BoundCount& bc) {
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N(0, 1);
  const auto mesh = v.space->mesh_ptr();
  auto fs = FeSpace::raviart_thomas(mesh);
  auto ws = FeSpace::lagrange(mesh, v.space->degree() + 1);
  const ErrorMeasures e = error_norms(v, spec);
  const double e_up = e.upper * e.upper, e_low = e.lower * e.lower;
  ErrorCertificate c = majorant_mixed(v, spec, fs);
  bc.add_up(c.majorant * c.majorant - e_up);
  DiscreteField w;
  bc.add_low(e_low - minorant(v, spec, ws, &w));
  for (int trial = 0; trial < 50; ++trial) {
    MajorantWeights mw = c.weights;
    mw.beta = std::exp(8 * U(rng) - 4);
    mw.zeta = std::exp(8 * U(rng) - 4);
    update_weight_fields(v, spec, mw);
    if (trial % 2) {
      for (double& x : mw.mu) x = U(rng);
      for (double& x : mw.theta) x = U(rng);
    }
    const double scale = std::pow(10.0, -4 + 5 * U(rng));
    DiscreteField y = c.flux;
    for (int i = 0; i < y.coeffs.size(); ++i) y.coeffs[i] += scale * N(rng);
    bc.add_up(evaluate_majorant(v, spec, y, mw).total - e_up);
    DiscreteField wt = w;
    for (int i = 0; i < wt.coeffs.size(); ++i) wt.coeffs[i] += scale * N(rng);
    for (int i : ws->dirichlet_nodes()) wt.coeffs[i] = 0.0;
    bc.add_low(e_low - minorant_functional(v, spec, wt));
  }
}

// random mu only where it is admissible, i.e. for a positive reaction field
void spacetime_bounds(const ProblemSpec& spec, const DiscreteField& v, bool random_mu, std::mt19937& rng,
                      BoundCount& bc) {
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N(0, 1);
  const auto mesh = v.space->mesh_ptr();
  auto ys = FeSpace::lagrange(mesh, v.space->degree() + 1);
  SpaceTimeOptions opt;
  const SpaceTimeMeasures e = parabolic_error_norm(v, spec, opt);
  const double e_low = e.lower * e.lower;
  SpaceTimeCertificate c = parabolic_majorant(v, spec, ys, opt);
  bc.add_up(c.majorant * c.majorant - e.upper_raw);
  DiscreteField eta;
  bc.add_low(e_low - parabolic_minorant(v, spec, ys, &eta));
  for (int trial = 0; trial < 50; ++trial) {
    const double beta = std::exp(8 * U(rng) - 4);
    std::vector<double> mu = c.mu;
    if (random_mu && trial % 2)
      for (double& x : mu) x = U(rng);
    const double scale = std::pow(10.0, -4 + 5 * U(rng));
    DiscreteField y = c.flux;
    for (int i = 0; i < y.coeffs.size(); ++i) y.coeffs[i] += scale * N(rng);
    auto cur = evaluate_parabolic_majorant(v, spec, y, beta, mu, opt);
    bc.add_up(cur.majorant * cur.majorant - e.upper_raw);
    DiscreteField et = eta;
    for (int i = 0; i < et.coeffs.size(); ++i) et.coeffs[i] += scale * N(rng);
    bc.add_low(e_low - parabolic_minorant_functional(v, spec, et));
  }
}

Outcome criterion4() {
  Outcome out;
  std::mt19937 rng(2024);
  auto run_static = [&](const char* name, bool uniform, int steps) {
    Preset p = make_preset(name);
    BoundCount bc;
    auto mesh = shared(p.mesh);
    for (int k = 0; k <= steps; ++k) {
      DiscreteField v = solve_static(p.spec, FeSpace::lagrange(mesh, 1), p.stab);
      static_bounds(p.spec, v, rng, bc);
      if (k == steps) break;
      if (uniform) {
        mesh = shared(refine_uniform(*mesh));
      } else {
        auto c = majorant_mixed(v, p.spec, FeSpace::raviart_thomas(mesh));
        mesh = shared(refine_marked(*mesh, bulk_mark(c.indicators, 0.3).marked_cells));
      }
    }
    out.require(bc.violations == 0, std::string(name) + fmt(": %g violations in %g checks (min margins %.1e, %.1e)",
                                                             bc.violations, bc.checks, bc.worst_up, bc.worst_low));
  };
  run_static("example1", true, 6);
  run_static("example5", false, 3);
  run_static("example6", false, 3);
  for (const char* name : {"example7a", "example7b", "example7c", "example7d"}) {
    Preset p = make_preset(name);
    BoundCount bc;
    auto mesh = shared(p.mesh);
    for (int k = 0; k <= 2; ++k) {
      DiscreteField v = solve_spacetime(p.spec, FeSpace::lagrange(mesh, 1));
      spacetime_bounds(p.spec, v, name[8] != 'd', rng, bc);
      auto c = parabolic_majorant(v, p.spec, FeSpace::lagrange(mesh, 2));
      mesh = shared(refine_marked(*mesh, bulk_mark(c.indicators, 0.6).marked_cells));
    }
    out.require(bc.violations == 0,
                std::string(name) + fmt(": %g violations in %g checks (min margins %.1e, %.1e)", bc.violations,
                                        bc.checks, bc.worst_up, bc.worst_low));
  }
  return out;
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  Outcome out;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> U(0, 1);
  std::uniform_int_distribution<int> size(1, 12);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> e(size(rng));
    for (double& x : e) x = trial % 4 == 0 ? std::floor(4 * U(rng)) : 0.01 + U(rng) * U(rng);
    if (std::all_of(e.begin(), e.end(), [](double x) { return x == 0.0; })) e[0] = 1.0;
    const double theta = trial % 10 == 0 ? 1.0 : 0.05 + 0.95 * U(rng);
    const double total = std::accumulate(e.begin(), e.end(), 0.0);
    const double goal = theta * total * (1 - 1e-13);
    // brute force: minimal cardinality, and among those the largest sum
    const int n = static_cast<int>(e.size());
    int best = n + 1;
    for (unsigned s = 1; s < (1u << n); ++s) {
      double sum = 0;
      for (int i = 0; i < n; ++i)
        if (s >> i & 1) sum += e[i];
      if (sum >= goal) best = std::min(best, __builtin_popcount(s));
    }
    auto marked = bulk_mark(e, theta).marked_cells;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return e[a] > e[b]; });
    std::vector<int> expect(order.begin(), order.begin() + std::min(best, n));
    std::vector<int> got = marked;
    std::sort(expect.begin(), expect.end());
    std::sort(got.begin(), got.end());
    if (got != expect) ++mismatches;
  }
  out.require(mismatches == 0, fmt("%g of 1000 marked sets differ from the brute-force minimum", mismatches));
  return out;
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  Outcome out;
  auto t0 = Clock::now();
  HomotopySchedule s;
  s.eps_start = 1.0;
  s.eps_target = 1e-3;
  s.strategy = SwitchStrategy::Hmin;
  s.step_cap = 40;
  HomotopyResult res = run_homotopy(example4_spec, shared(make_preset("example4", 1e-3).mesh), s, 0.1);
  const double t = seconds_since(t0);
  const StudyRecord& last = res.levels.back().records.back();
  int steps = 0;
  for (const auto& l : res.levels) steps += static_cast<int>(l.records.size());
  out.require(res.levels.back().eps == 1e-3, fmt("%g levels, %g solves", res.levels.size(), steps));
  out.require(last.err_upper <= 6e-2, fmt("final [e] = %.3e", last.err_upper));
  out.require(last.dofs <= 4000, fmt("%g dofs", last.dofs));
  out.require(t < 180, fmt("%.1f s", t));
  out.detail += fmt(" (I_eff(M_up) %.2f, I_eff(M_low) %.2f)", last.ieff_maj, last.ieff_min);
  return out;
}

// ---------------------------------------------------------------- 7, 8

std::vector<StudyRecord> spacetime_adaptive(const char* name, int deg, MuMode mode, int steps, bool identity) {
  Preset p = make_preset(name);
  SpaceTimeStudyOptions o;
  o.deg_v = deg;
  o.identity = identity;
  o.majorant.mu_mode = mode;
  LoopOptions lo;
  lo.theta = 0.6;
  lo.steps = steps;
  return adaptive_loop(
      shared(p.mesh), [&](std::shared_ptr<const Mesh> m, int k) { return spacetime_step(p.spec, m, k, o); }, lo);
}

Outcome criterion7() {
  Outcome out;
  for (const char* name : {"example7a", "example7b", "example7c"}) {
    auto opt = spacetime_adaptive(name, 1, MuMode::Opt, 6, false);
    auto one = spacetime_adaptive(name, 1, MuMode::One, 6, false);
    double mx = 0;
    for (const auto& r : opt) mx = std::max(mx, r.ieff_maj);
    const std::string c(1, name[8]);
    out.require(mx <= 2.0, c + fmt(": max I_eff(mu_opt) = %.2f", mx));
    const double at5 = one[5].ieff_maj;
    if (c == "b") out.require(at5 > 10, c + fmt(": I_eff(mu=1) step 5 = %.3g", at5));
    else if (c == "c") out.require(at5 > 50, c + fmt(": I_eff(mu=1) step 5 = %.3g", at5));
    else out.detail += "; " + c + fmt(": I_eff(mu=1) step 5 = %.3g", at5);
  }
  return out;
}

Outcome criterion8() {
  Outcome out;
  Preset p = make_preset("example7d");
  double worst = 0;
  {
    auto mesh = shared(p.mesh);
    for (int k = 0; k <= 6; ++k) {
      DiscreteField v = solve_spacetime(p.spec, FeSpace::lagrange(mesh, 2));
      ErrorIdentity id = error_identity(v, p.spec);
      worst = std::max(worst, std::abs(id.eid / id.strong - 1));
      auto c = parabolic_majorant(v, p.spec, FeSpace::lagrange(mesh, 3));
      mesh = shared(refine_marked(*mesh, bulk_mark(c.indicators, 0.6).marked_cells));
    }
  }
  out.require(worst <= 1e-6, fmt("P2 max |EId/strong - 1| = %.2e over 7 steps", worst));
  auto p1 = spacetime_adaptive("example7d", 1, MuMode::Opt, 9, true);
  double mn = INFINITY, mx = 0;
  for (int k = 5; k <= 9; ++k) {
    mn = std::min(mn, p1[k].eid);
    mx = std::max(mx, p1[k].eid);
  }
  out.require(mx / mn - 1 < 0.01, fmt("P1 EId refs 5-9 in [%.4f, %.4f]", mn, mx));
  return out;
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  Outcome out;
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N(0, 1);
  {  // majorant gradient against finite differences
    Preset p = make_preset("example5");
    auto m = shared(p.mesh);
    auto v = solve_static(p.spec, FeSpace::lagrange(m, 1), p.stab);
    auto fs = FeSpace::raviart_thomas(m);
    MajorantWeights w;
    w.beta = 0.7;
    w.c_f = embedding_constants(p.spec.box, p.spec.tags).c_friedrichs;
    update_weight_fields(v, p.spec, w);
    FluxQuadratic q = assemble_majorant_flux_system(v, p.spec, *fs, w);
    Eigen::VectorXd y(fs->n_dofs());
    for (int i = 0; i < y.size(); ++i) y[i] = N(rng);
    Eigen::VectorXd grad = 2 * (q.system.matrix * y - q.system.rhs);
    auto value = [&](const Eigen::VectorXd& c) { return evaluate_majorant(v, p.spec, DiscreteField(fs, c), w).total; };
    double worst = 0;
    for (int i = 0; i < y.size(); i += 7) {
      Eigen::VectorXd yp = y, ym = y;
      yp[i] += 1e-4;
      ym[i] -= 1e-4;
      worst = std::max(worst, std::abs((value(yp) - value(ym)) / 2e-4 - grad[i]) / std::max(1.0, std::abs(grad[i])));
    }
    out.require(worst < 1e-6, fmt("gradient vs FD %.1e", worst));
  }
  {  // norm relation on random discrete errors
    ProblemSpec s;
    s.box = Box{2, {0, 0}, {1, 1}};
    s.epsilon = 0.05;
    s.conservative = true;
    s.drift = [](const Point& x, double) { return Point{x[0], 2 * x[1]}; };
    s.drift_div = [](const Point&, double) { return 3.0; };
    auto m = shared(refine_marked(unit_square_mesh(3), std::vector<int>{1, 4}));
    auto sp = FeSpace::lagrange(m, 2);
    double worst = 0;
    for (int trial = 0; trial < 5; ++trial) {
      ReferenceSolution ref{DiscreteField(sp), {}};
      for (int i = 0; i < sp->n_dofs(); ++i) ref.u.coeffs[i] = N(rng);
      ref.to_coarse.resize(m->n_cells());
      std::iota(ref.to_coarse.begin(), ref.to_coarse.end(), 0);
      ErrorMeasures e = error_norms(DiscreteField(FeSpace::lagrange(m, 1)), s, &ref);
      const double fe = integrate(
          *m,
          [&](int c, const Point& x) {
            const CellGeometry g = cell_geometry(*m, c);
            const double dx = x[0] - g.x0[0], dy = x[1] - g.x0[1];
            const double u = evaluate_scalar(ref.u, c, {g.K[0][0] * dx + g.K[0][1] * dy, g.K[1][0] * dx + g.K[1][1] * dy});
            const Point F = s.drift_at(x);
            return (F[0] * F[0] + F[1] * F[1]) * u * u;
          },
          8);
      const double rhs = e.upper * e.upper + fe / (2 * s.epsilon) - 0.5 * s.epsilon * e.h1 * e.h1;
      worst = std::max(worst, std::abs(e.lower * e.lower - rhs) / std::max(1.0, rhs));
    }
    out.require(worst < 1e-10, fmt("norm relation %.1e", worst));
  }
  {  // sum of 1/alpha
    Preset p = make_preset("example7b");
    auto m = shared(p.mesh);
    auto v = solve_spacetime(p.spec, FeSpace::lagrange(m, 1));
    auto c = parabolic_majorant(v, p.spec, FeSpace::lagrange(m, 2));
    const double s = 1 / c.alpha[0] + 1 / c.alpha[1] + 1 / c.alpha[2];
    out.require(std::abs(s - 1.5) < 1e-14, fmt("sum 1/alpha_i = %.15f", s));
  }
  {  // patch tests
    double worst = 0;
    for (int dim = 1; dim <= 2; ++dim)
      for (int k = 1; k <= 3; ++k) {
        auto mesh = dim == 1 ? shared(interval_mesh(0, 1, 5)) : shared(refine_marked(unit_square_mesh(3), std::vector<int>{2, 7}));
        auto sp = FeSpace::lagrange(mesh, k);
        for (int a = 0; a <= k; ++a)
          for (int b = 0; a + b <= k; ++b) {
            if (dim == 1 && b > 0) continue;
            auto poly = [a, b](const Point& x) { return std::pow(x[0] + 0.3, a) * std::pow(x[1] - 0.2, b); };
            DiscreteField f = interpolate(sp, poly);
            for (int s = 0; s < 20; ++s) {
              const int cell = static_cast<int>(U(rng) * mesh->n_cells()) % mesh->n_cells();
              double l1 = U(rng), l2 = dim == 1 ? 0.0 : U(rng);
              if (l1 + l2 > 1) {
                l1 = 1 - l1;
                l2 = 1 - l2;
              }
              const Point x = cell_geometry(*mesh, cell).map({l1, l2});
              worst = std::max(worst, std::abs(evaluate_scalar(f, cell, {l1, l2}) - poly(x)));
            }
          }
      }
    out.require(worst < 1e-12, fmt("patch tests %.1e", worst));
  }
  {  // conformity of randomly refined meshes
    int bad = 0;
    Mesh m = unit_square_mesh(2);
    for (int round = 0; round < 25; ++round) {
      std::vector<int> marked;
      for (int c = 0; c < m.n_cells(); ++c)
        if (U(rng) < 0.15) marked.push_back(c);
      if (marked.empty()) marked.push_back(0);
      m = refine_marked(m, marked);
      if (!check_conformity(m).ok) ++bad;
    }
    out.require(bad == 0, fmt("%g nonconforming meshes in 25 random refinements (%g cells)", bad, m.n_cells()));
  }
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Example 1 uniform rates", criterion1},
      {"Example 1 efficiency", criterion2},
      {"Example 2 uniform efficiency", criterion3},
      {"guaranteed bounds", criterion4},
      {"bulk marking oracle", criterion5},
      {"Example 4 homotopy", criterion6},
      {"mu robustness", criterion7},
      {"error identity", criterion8},
      {"numerical micro-suite", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu %s: %s: %s (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
