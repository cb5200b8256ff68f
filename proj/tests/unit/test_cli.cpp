#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fpe/cli.hpp"
#include "fpe/expr.hpp"

using namespace fpe;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fpe_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("coefficient expressions") {
  CHECK(parse_coefficient("x + 0.001")(0.0) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(parse_coefficient("1000*(x+0.001)*(t*sin(t)+1)")(1.0, 0.0, 0.0) == doctest::Approx(1001.0).epsilon(1e-15));
  CHECK(parse_coefficient("2^3^2")(0) == 512.0);
  CHECK(parse_coefficient("-x^2")(3.0) == -9.0);
  CHECK(parse_coefficient("exp(-(x-1)/eps)")({1.0, 0.0, 0.0, 0.5}) == doctest::Approx(1.0));
  CHECK(parse_coefficient("sqrt(abs(y)) + cos(pi*x) + 1e-3")(1.0, -4.0) == doctest::Approx(1.001));
  try {
    parse_coefficient("sin(");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 4);
    CHECK(std::string(e.what()).find("offset 4") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_coefficient("x +* 2"), SyntaxError);
  CHECK_THROWS_AS(parse_coefficient("foo(x)"), SyntaxError);
  CHECK_THROWS_AS(parse_coefficient("(x"), SyntaxError);
  CHECK_THROWS_AS(parse_coefficient(""), SyntaxError);
}

TEST_CASE("config parsing") {
  RunConfig cfg;
  std::istringstream is(
      "# study\n"
      "preset = example5\n"
      "mode = adaptive   # trailing comment\n"
      "theta = 0.3\n"
      "deg-v = 2\n"
      "mu = one\n"
      "switch = fixed\n"
      "stabilization = none\n");
  read_config(is, cfg);
  CHECK(cfg.preset == "example5");
  CHECK(cfg.mode == RunMode::Adaptive);
  CHECK(cfg.theta == 0.3);
  CHECK(cfg.deg_v == 2);
  CHECK(cfg.mu == MuMode::One);
  CHECK(cfg.strategy == SwitchStrategy::FixedSteps);
  CHECK(cfg.stab == Stabilization::None);

  RunConfig bad;
  CHECK_THROWS_AS(apply_setting(bad, "theta", "0"), ConfigError);
  CHECK_THROWS_AS(apply_setting(bad, "theta", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_setting(bad, "mode", "sideways"), ConfigError);
  CHECK_THROWS_AS(apply_setting(bad, "colour", "red"), ConfigError);
  CHECK_THROWS_AS(apply_setting(bad, "problem.colour", "red"), ConfigError);
  std::istringstream noeq("preset example1\n");
  CHECK_THROWS_WITH_AS(read_config(noeq, bad), doctest::Contains("line 1"), ConfigError);

  RunConfig inl;
  apply_setting(inl, "problem.dim", "1");
  apply_setting(inl, "problem.eps", "0.01");
  apply_setting(inl, "problem.drift_x", "1");
  apply_setting(inl, "problem.exact", "exp((x-1)/eps) - exp(-1/eps)");
  Preset p = build_problem(inl);
  CHECK(p.spec.box.dim == 1);
  CHECK(p.spec.layout == BcLayout::FullDirichlet);
  CHECK(p.spec.exact({0.99, 0.0}, 0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(p.spec.exact_grad({1.0, 0.0}, 0.0)[0] == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(p.spec.div_drift({0.3, 0.0}) == doctest::Approx(0.0).scale(1.0));
  RunConfig both = inl;
  both.preset = "example1";
  CHECK_THROWS_AS(build_problem(both), ConfigError);
  CHECK_THROWS_AS(build_problem(RunConfig{}), ConfigError);
}

TEST_CASE("run writes the study files") {
  RunConfig cfg;
  cfg.preset = "example1";
  cfg.mode = RunMode::Uniform;
  cfg.steps = 0;
  cfg.out = scratch("single").string();
  std::ostringstream log;
  REQUIRE(run(cfg, log) == 0);
  std::istringstream csv(slurp(fs::path(cfg.out) / "study.csv"));
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line == "ref,dof,err_up,majorant,ieff_maj,err_low,minorant,ieff_min");
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1);
  CHECK(fs::exists(fs::path(cfg.out) / "mesh_ref0.txt"));
  CHECK(fs::exists(fs::path(cfg.out) / "plot.dat"));

  RunConfig bad = cfg;
  bad.preset = "example9";
  CHECK(run(bad, log) == 2);
  bad = cfg;
  bad.preset.clear();
  bad.problem["rhs"] = "sin(";
  CHECK(run(bad, log) == 2);
}

TEST_CASE("repeated runs are byte-identical") {
  RunConfig cfg;
  cfg.preset = "example5";
  cfg.mode = RunMode::Adaptive;
  cfg.steps = 2;
  std::ostringstream log;
  std::string first[2];
  for (int k = 0; k < 2; ++k) {
    cfg.out = scratch("det" + std::to_string(k)).string();
    REQUIRE(run(cfg, log) == 0);
    first[k] = slurp(fs::path(cfg.out) / "study.csv") + slurp(fs::path(cfg.out) / "mesh_ref2.txt") +
               slurp(fs::path(cfg.out) / "plot.dat");
  }
  CHECK(first[0] == first[1]);
  CHECK(!first[0].empty());
}
