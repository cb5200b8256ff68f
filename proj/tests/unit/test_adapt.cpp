#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fpe/homotopy.hpp"
#include "fpe/presets.hpp"

using namespace fpe;

namespace {

std::shared_ptr<const Mesh> shared(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

// smallest subset size whose sum reaches goal, by exhaustive search
int brute_force_min(const std::vector<double>& e, double goal) {
  const int n = static_cast<int>(e.size());
  int best = n + 1;
  for (unsigned s = 1; s < (1u << n); ++s) {
    double sum = 0;
    for (int i = 0; i < n; ++i)
      if (s >> i & 1) sum += e[i];
    if (sum >= goal) best = std::min(best, __builtin_popcount(s));
  }
  return best;
}

}  // namespace

TEST_CASE("bulk marking") {
  CHECK(bulk_mark({4, 3, 2, 1}, 0.3).marked_cells == std::vector<int>{0});
  CHECK(bulk_mark({1, 2, 3, 4}, 0.3).marked_cells == std::vector<int>{3});
  CHECK(bulk_mark({1, 2, 2, 1}, 0.5).marked_cells == std::vector<int>{1, 2});
  auto all = bulk_mark({0.5, 0.0, 2.0, 1.0}, 1.0).marked_cells;
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 2, 3});
  CHECK_THROWS_WITH_AS(bulk_mark({0, 0, 0}, 0.5), doctest::Contains("AllZeroIndicators"), AdaptError);
  CHECK_THROWS_AS(bulk_mark({1, 2}, 0.0), AdaptError);
  CHECK_THROWS_AS(bulk_mark({1, 2}, 1.5), AdaptError);
}

TEST_CASE("bulk marking is minimal") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> U(0, 1);
  std::uniform_int_distribution<int> size(1, 12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> e(size(rng));
    // integers sum exactly; otherwise keep positive entries well above rounding
    for (double& x : e) x = trial % 4 == 0 ? std::floor(4 * U(rng)) : 0.01 + U(rng) * U(rng);
    if (std::all_of(e.begin(), e.end(), [](double x) { return x == 0.0; })) e[0] = 1.0;
    const double theta = trial % 10 == 0 ? 1.0 : 0.05 + 0.95 * U(rng);
    double total = 0;
    for (double x : e) total += x;
    auto marked = bulk_mark(e, theta).marked_cells;
    double sum = 0;
    for (int k : marked) sum += e[k];
    const double goal = theta * total * (1 - 1e-13);  // summation order differs
    CHECK(sum >= goal);
    CHECK(static_cast<int>(marked.size()) == brute_force_min(e, goal));
    // marked cells dominate the unmarked ones
    std::vector<char> in(e.size(), 0);
    for (int k : marked) in[k] = 1;
    double lo = INFINITY, hi = 0;
    for (std::size_t i = 0; i < e.size(); ++i) (in[i] ? lo : hi) = in[i] ? std::min(lo, e[i]) : std::max(hi, e[i]);
    CHECK(lo >= hi);
  }
}

TEST_CASE("convergence rates") {
  auto r = compute_eoc({1e-1, 5e-2}, {100, 400}, 2);
  CHECK(std::isnan(r[0]));
  CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-14));
  r = compute_eoc({1.0, 0.25, 0.0625}, {10, 20, 40}, 1);
  CHECK(r[1] == doctest::Approx(2.0));
  CHECK(r[2] == doctest::Approx(2.0));
}

TEST_CASE("adaptive loop") {
  Preset p = make_preset("example5");
  StaticStudyOptions opt;
  opt.stab = p.stab;
  auto step = [&](std::shared_ptr<const Mesh> m, int ref) { return static_step(p.spec, m, ref, opt); };
  LoopOptions lo;
  lo.theta = 0.3;
  lo.steps = 4;
  auto recs = adaptive_loop(shared(p.mesh), step, lo);
  REQUIRE(recs.size() == 5);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].ref == static_cast<int>(i));
    CHECK(recs[i].majorant >= recs[i].err_upper);
    CHECK(recs[i].minorant <= recs[i].err_lower * (1 + 1e-8));
    if (i > 0) CHECK(recs[i].dofs > recs[i - 1].dofs);
  }
  // theta = 1 bisects every cell once; two such steps halve h like one uniform step
  LoopOptions full = lo, uni = lo;
  full.theta = 1.0;
  full.steps = 4;
  uni.steps = 2;
  uni.uniform = true;
  auto a = adaptive_loop(shared(p.mesh), step, full), b = adaptive_loop(shared(p.mesh), step, uni);
  for (int i = 0; i <= 2; ++i) {
    CHECK(a[2 * i].dofs == b[i].dofs);
    CHECK(a[2 * i].cells == b[i].cells);
  }
}

TEST_CASE("study CSV") {
  StudyRecord r;
  r.ref = 2;
  r.dofs = 33;
  r.err_upper = 0.5;
  r.majorant = 0.6;
  r.ieff_maj = 1.2;
  r.err_lower = 0.4;
  r.minorant = 0.4;
  r.ieff_min = 1.0;
  std::ostringstream os;
  write_study_csv(os, {r});
  CHECK(os.str() == "ref,dof,err_up,majorant,ieff_maj,err_low,minorant,ieff_min\n2,33,0.5,0.6,1.2,0.4,0.4,1\n");
}

TEST_CASE("homotopy levels") {
  HomotopySchedule s;
  s.eps_start = 1.0;
  s.eps_target = 1e-4;
  auto l = homotopy_levels(s);
  REQUIRE(l.size() == 5);
  const double expect[] = {1, 1e-1, 1e-2, 1e-3, 1e-4};
  for (int i = 0; i < 5; ++i) CHECK(l[i] == doctest::Approx(expect[i]).epsilon(1e-14));
  CHECK(l.back() == 1e-4);
  s.eps_target = 3e-3;
  l = homotopy_levels(s);
  CHECK(l == std::vector<double>{1.0, 0.1, 0.01, 3e-3});
  s.eps_start = s.eps_target;
  CHECK(homotopy_levels(s).size() == 1);
  CHECK(homotopy_csv_name(1e-3) == "homotopy_eps_0.001.csv");
}

TEST_CASE("homotopy driver") {
  HomotopySchedule s;
  s.eps_start = 1.0;
  s.eps_target = 1e-2;
  s.strategy = SwitchStrategy::FixedSteps;
  s.fixed_steps = 2;
  auto init = shared(unit_square_mesh(4));
  auto res = run_homotopy(example4_spec, init, s, 0.3);
  REQUIRE(res.levels.size() == 3);
  int prev = 0;
  for (const auto& lv : res.levels) {
    CHECK(lv.records.size() == 2);
    for (const auto& r : lv.records) {
      CHECK(r.dofs >= prev);
      CHECK(r.majorant >= r.err_upper);
      prev = r.dofs;
    }
  }
  // a single level reproduces the adaptive loop
  s.eps_start = s.eps_target;
  auto one = run_homotopy(example4_spec, init, s, 0.3);
  StaticStudyOptions opt;
  ProblemSpec spec = example4_spec(1e-2);
  LoopOptions lo;
  lo.theta = 0.3;
  lo.steps = 1;
  auto ref = adaptive_loop(init, [&](std::shared_ptr<const Mesh> m, int k) { return static_step(spec, m, k, opt); }, lo);
  REQUIRE(one.levels.size() == 1);
  for (int i = 0; i < 2; ++i) {
    CHECK(one.levels[0].records[i].dofs == ref[i].dofs);
    CHECK(one.levels[0].records[i].majorant == ref[i].majorant);
  }
  // unresolved layer within the cap
  s.strategy = SwitchStrategy::Hmin;
  s.eps_start = 1.0;
  s.eps_target = 1e-3;
  s.step_cap = 2;
  try {
    run_homotopy(example4_spec, init, s, 0.1);
    FAIL("expected StepCapExceeded");
  } catch (const StepCapExceeded& e) {
    CHECK(std::string(e.what()).find("StepCapExceeded") != std::string::npos);
    REQUIRE(!e.partial().levels.empty());
    CHECK(e.partial().levels.back().records.size() == 2);
  }
}
