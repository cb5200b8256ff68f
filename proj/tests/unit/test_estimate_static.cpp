#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fpe/estimate_static.hpp"
#include "fpe/presets.hpp"

using namespace fpe;
using std::numbers::pi;

namespace {

std::shared_ptr<const Mesh> shared(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

// 1D, Neumann at x = 0 (inflow), Dirichlet at x = 1; u = (1 - x)(1 + 11x)
// satisfies the zero total flux condition eps u' - F u = 0 at x = 0.
ProblemSpec mixed_1d() {
  ProblemSpec s;
  s.tags = SideTags{BcTag::Neumann, BcTag::Dirichlet};
  s.layout = BcLayout::Mixed;
  s.epsilon = 0.1;
  s.drift = [](const Point&, double) { return Point{1.0, 0.0}; };
  s.drift_div = [](const Point&, double) { return 0.0; };
  s.reaction = [](const Point&, double) { return 1.0; };
  s.exact = [](const Point& x, double) { return (1 - x[0]) * (1 + 11 * x[0]); };
  s.exact_grad = [](const Point& x, double) { return Point{10 - 22 * x[0], 0.0}; };
  s.rhs = [](const Point& x, double) { return 13.2 - 12 * x[0] - 11 * x[0] * x[0]; };
  return s;
}

// 1D Robin problem, conservative form, F = 1 - 2x, lambda = 2, zero-mean
// u = sin^2(pi x)(x - 1/2) with vanishing total flux at both ends
ProblemSpec robin_1d() {
  ProblemSpec s;
  s.tags = SideTags::all(BcTag::Robin);
  s.layout = BcLayout::Robin;
  s.epsilon = 0.1;
  s.conservative = true;
  s.drift = [](const Point& x, double) { return Point{1 - 2 * x[0], 0.0}; };
  s.drift_div = [](const Point&, double) { return -2.0; };
  s.reaction = [](const Point&, double) { return 2.0; };
  auto du = [](double x) { return pi * std::sin(2 * pi * x) * (x - 0.5) + std::pow(std::sin(pi * x), 2); };
  auto ddu = [](double x) {
    return 2 * pi * pi * std::cos(2 * pi * x) * (x - 0.5) + 2 * pi * std::sin(2 * pi * x);
  };
  s.exact = [](const Point& x, double) { return std::pow(std::sin(pi * x[0]), 2) * (x[0] - 0.5); };
  s.exact_grad = [du](const Point& x, double) { return Point{du(x[0]), 0.0}; };
  // -eps u'' + (F u)' + 2 u = -eps u'' + F u'
  s.rhs = [du, ddu](const Point& x, double) { return -0.1 * ddu(x[0]) + (1 - 2 * x[0]) * du(x[0]); };
  return s;
}

MajorantWeights base_weights(const ProblemSpec& s) {
  MajorantWeights w;
  auto ec = embedding_constants(s.box, s.tags);
  w.c_f = s.layout == BcLayout::Robin ? ec.c_poincare : ec.c_friedrichs;
  w.c_tr = ec.c_trace;
  return w;
}

void check_random_bound(const ProblemSpec& s, std::shared_ptr<const Mesh> m, SpacePtr fs, Stabilization stab) {
  auto v = solve_static(s, FeSpace::lagrange(m, 1), stab);
  const double e2 = std::pow(error_norms(v, s).upper, 2);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N(0, 1);
  double worst = INFINITY;
  for (int trial = 0; trial < 50; ++trial) {
    MajorantWeights w = base_weights(s);
    w.beta = std::exp(6 * U(rng) - 3);
    w.zeta = std::exp(6 * U(rng) - 3);
    update_weight_fields(v, s, w);
    for (double& x : w.mu) x = U(rng);
    for (double& x : w.theta) x = U(rng);
    Eigen::VectorXd y(fs->n_dofs());
    const double scale = std::exp(4 * U(rng) - 2);
    for (int i = 0; i < y.size(); ++i) y[i] = scale * N(rng);
    if (trial % 5 == 0) y = majorant_mixed(v, s, fs).flux.coeffs + 1e-3 * y;
    worst = std::min(worst, evaluate_majorant(v, s, DiscreteField(fs, y), w).total - e2);
  }
  CHECK(worst >= -1e-8);
}

}  // namespace

TEST_CASE("majorant bounds the error for random fluxes and parameters") {
  Preset p = make_preset("example5");
  auto m = shared(p.mesh);
  check_random_bound(p.spec, m, FeSpace::raviart_thomas(m), p.stab);
  ProblemSpec s = mixed_1d();
  auto m1 = shared(interval_mesh(0, 1, 6, BcTag::Neumann, BcTag::Dirichlet));
  check_random_bound(s, m1, FeSpace::raviart_thomas(m1), Stabilization::None);
  check_random_bound(s, m1, FeSpace::vector_lagrange(m1, 2), Stabilization::Supg);
}

TEST_CASE("sweeps decrease the majorant and keep the weights in [0, 1]") {
  for (const char* name : {"example1", "example5", "example6"}) {
    Preset p = make_preset(name);
    auto m = shared(refine_uniform(p.mesh));
    auto v = solve_static(p.spec, FeSpace::lagrange(m, 1), p.stab);
    auto c = majorant_mixed(v, p.spec, FeSpace::raviart_thomas(m), MajorantOptions{6});
    REQUIRE(c.history.size() >= 2);
    for (std::size_t i = 1; i < c.history.size(); ++i) CHECK(c.history[i] <= c.history[i - 1]);
    for (double x : c.weights.mu) CHECK((x >= 0.0 && x <= 1.0));
    double sum = 0;
    for (double x : c.indicators) sum += x;
    CHECK(std::abs(sum - c.majorant * c.majorant) <= 1e-10 * c.majorant * c.majorant);
    CHECK(c.majorant >= error_norms(v, p.spec).upper);
  }
  ProblemSpec s = mixed_1d();
  auto m = shared(interval_mesh(0, 1, 5, BcTag::Neumann, BcTag::Dirichlet));
  auto v = solve_static(s, FeSpace::lagrange(m, 1), Stabilization::None);
  auto c = majorant_mixed(v, s, FeSpace::raviart_thomas(m));
  REQUIRE(!c.weights.theta.empty());
  for (double x : c.weights.theta) CHECK((x >= 0.0 && x <= 1.0));
  CHECK(c.majorant >= error_norms(v, s).upper);
}

TEST_CASE("flux refinement never increases the majorant") {
  Preset p = make_preset("example5");
  auto m = shared(p.mesh);
  auto v = solve_static(p.spec, FeSpace::lagrange(m, 1), p.stab);
  auto fine = shared(refine_uniform(*m));
  // v transferred to the refined mesh is the same function
  auto vf = interpolate(FeSpace::lagrange(fine, 1), [&](const Point&) { return 0.0; });
  std::vector<int> map = ancestor_map({m, fine}, 0, 1);
  for (int c = 0; c < fine->n_cells(); ++c) {
    CellGeometry g = cell_geometry(*fine, c);
    CellGeometry gc = cell_geometry(*m, map[c]);
    for (int i = 0; i < 3; ++i) {
      Point x = g.map(lagrange_ref(2, 1).nodes()[i]);
      // reference coordinates of x in the parent
      const double dx = x[0] - gc.x0[0], dy = x[1] - gc.x0[1];
      Point xi{gc.K[0][0] * dx + gc.K[0][1] * dy, gc.K[1][0] * dx + gc.K[1][1] * dy};
      vf.coeffs[vf.space->cell_dofs(c)[i]] = evaluate_scalar(v, map[c], xi);
    }
  }
  const double coarse = majorant_mixed(v, p.spec, FeSpace::raviart_thomas(m)).majorant;
  const double refined = majorant_mixed(vf, p.spec, FeSpace::raviart_thomas(fine)).majorant;
  CHECK(refined <= coarse * (1 + 1e-10));
}

TEST_CASE("norm relation") {
  // conservative form, lambda = 0: the two measures differ by (1/2eps)|F e|^2 - (eps/2)|grad e|^2
  ProblemSpec s;
  s.box = Box{2, {0, 0}, {1, 1}};
  s.epsilon = 0.05;
  s.conservative = true;
  s.drift = [](const Point& x, double) { return Point{x[0], 2 * x[1]}; };
  s.drift_div = [](const Point&, double) { return 3.0; };
  auto m = shared(unit_square_mesh(3));
  auto sp = FeSpace::lagrange(m, 2);
  std::mt19937 rng(9);
  std::normal_distribution<double> N(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    ReferenceSolution ref{DiscreteField(sp), {}};
    for (int i = 0; i < sp->n_dofs(); ++i) ref.u.coeffs[i] = N(rng);
    for (int c = 0; c < m->n_cells(); ++c) ref.to_coarse.push_back(c);
    DiscreteField v(FeSpace::lagrange(m, 1));
    ErrorMeasures e = error_norms(v, s, &ref);
    const double fe = integrate(*m, [&](int c, const Point& x) {
      const double dx = x[0] - cell_geometry(*m, c).x0[0], dy = x[1] - cell_geometry(*m, c).x0[1];
      const CellGeometry g = cell_geometry(*m, c);
      Point xi{g.K[0][0] * dx + g.K[0][1] * dy, g.K[1][0] * dx + g.K[1][1] * dy};
      const double u = evaluate_scalar(ref.u, c, xi);
      const Point F = s.drift_at(x);
      return (F[0] * F[0] + F[1] * F[1]) * u * u;
    }, 8);
    const double rhs = e.upper * e.upper + fe / (2 * s.epsilon) - 0.5 * s.epsilon * e.h1 * e.h1;
    CHECK(std::abs(e.lower * e.lower - rhs) <= 1e-10 * std::max(1.0, rhs));
  }
}

TEST_CASE("minorant") {
  Preset p = make_preset("example1");
  auto m = shared(refine_uniform(refine_uniform(p.mesh)));
  auto sv = FeSpace::lagrange(m, 1);
  auto v = solve_static(p.spec, sv, p.stab);
  CHECK_THROWS_WITH_AS(minorant(v, p.spec, sv), doctest::Contains("SpaceNotRicher"), EstimateError);
  auto sw = FeSpace::lagrange(m, 2);
  const ErrorMeasures e = error_norms(v, p.spec);
  const double mm = minorant(v, p.spec, sw);
  CHECK(mm >= 0.0);
  CHECK(mm <= e.lower * e.lower + 1e-8);
  std::mt19937 rng(2);
  std::normal_distribution<double> N(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteField w(sw);
    for (int i = 0; i < sw->n_dofs(); ++i) w.coeffs[i] = N(rng);
    for (int i : sw->dirichlet_nodes()) w.coeffs[i] = 0.0;
    CHECK(minorant_functional(v, p.spec, w) <= e.lower * e.lower + 1e-8);
  }
  // exact solution in the space: nothing left to bound
  ProblemSpec s = mixed_1d();
  auto m1 = shared(interval_mesh(0, 1, 3, BcTag::Neumann, BcTag::Dirichlet));
  auto u = interpolate(FeSpace::lagrange(m1, 2), [&](const Point& x) { return s.exact(x, 0); });
  CHECK(minorant(u, s, FeSpace::lagrange(m1, 3)) <= 1e-20);
  CHECK(error_norms(u, s).upper < 1e-12);
}

TEST_CASE("Robin majorant on a manufactured zero-mean solution") {
  ProblemSpec s = robin_1d();
  auto m = shared(interval_mesh(0, 1, 8, BcTag::Robin, BcTag::Robin));
  for (int level = 0; level < 5; ++level) {
    auto v = solve_static(s, FeSpace::lagrange(m, 1, Constraint::ZeroMean), Stabilization::None);
    auto c = majorant_robin(v, s, FeSpace::raviart_thomas(m));
    const double e = error_norms(v, s).upper;
    CHECK(c.majorant >= e);
    CHECK(c.majorant / e < 3.0);
    m = shared(refine_uniform(*m));
  }
  auto v = DiscreteField(FeSpace::lagrange(m, 1, Constraint::ZeroMean));
  v.coeffs.setConstant(1.0);
  CHECK_THROWS_WITH_AS(majorant_robin(v, s, FeSpace::raviart_thomas(m)), doctest::Contains("ZeroMeanViolated"),
                       EstimateError);
}
