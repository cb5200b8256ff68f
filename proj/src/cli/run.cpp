#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fpe/cli.hpp"
#include "fpe/expr.hpp"

namespace fpe {

namespace {

namespace fs = std::filesystem;

// F = 0 and lambda = 0 on a sample grid of the domain
bool diffusion_only(const ProblemSpec& s) {
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 6; ++j) {
      const Point x{s.box.lo[0] + (s.box.hi[0] - s.box.lo[0]) * i / 6.0,
                    s.box.lo[1] + (s.box.hi[1] - s.box.lo[1]) * j / 6.0};
      if (s.F(x, 0, x[1]) != 0.0 || s.lambda(x, x[1]) != 0.0) return false;
    }
  return true;
}

void write_plot(const std::string& path, const std::vector<StudyRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << "# dof err_up majorant err_low minorant\n" << std::setprecision(10);
  for (const auto& r : recs)
    f << r.dofs << ' ' << r.err_upper << ' ' << r.majorant << ' ' << r.err_lower << ' ' << r.minorant << '\n';
}

void print_records(std::ostream& log, const std::vector<StudyRecord>& recs) {
  log << std::setw(4) << "ref" << std::setw(9) << "dof" << std::setw(12) << "[e]" << std::setw(12) << "M_up"
      << std::setw(8) << "I_eff" << std::setw(12) << "M_low" << std::setw(8) << "I_eff" << '\n';
  for (const auto& r : recs)
    log << std::setw(4) << r.ref << std::setw(9) << r.dofs << std::scientific << std::setprecision(3)
        << std::setw(12) << r.err_upper << std::setw(12) << r.majorant << std::fixed << std::setprecision(3)
        << std::setw(8) << r.ieff_maj << std::scientific << std::setprecision(3) << std::setw(12) << r.minorant
        << std::fixed << std::setw(8) << r.ieff_min << std::defaultfloat << '\n';
}

std::string mesh_path(const RunConfig& cfg, int k) {
  return (fs::path(cfg.out) / ("mesh_ref" + std::to_string(k) + ".txt")).string();
}

StaticStudyOptions static_options(const RunConfig& cfg, const Preset& pr) {
  StaticStudyOptions o;
  o.deg_v = cfg.deg_v;
  o.deg_flux = cfg.deg_flux == 0 ? 1 : cfg.deg_flux;
  o.deg_w = cfg.deg_w;
  o.stab = cfg.stab.value_or(pr.stab);
  o.majorant.sweeps = cfg.sweeps;
  return o;
}

void check_degrees(const RunConfig& cfg) {
  const int dw = cfg.deg_w == 0 ? cfg.deg_v + 1 : cfg.deg_w;
  if (cfg.deg_w >= 0 && dw <= cfg.deg_v) throw ConfigError("deg_w must exceed deg_v");
}

void run_study(const RunConfig& cfg, std::ostream& log) {
  Preset pr = build_problem(cfg, cfg.eps);
  const ProblemSpec& spec = pr.spec;
  const bool parabolic = spec.parabolic;
  if (cfg.mode == RunMode::SpaceTime && !parabolic) throw ConfigError("spacetime mode needs a parabolic problem");
  check_degrees(cfg);
  LoopOptions lo;
  lo.theta = cfg.theta;
  lo.steps = cfg.steps;
  lo.uniform = cfg.mode == RunMode::Uniform;
  lo.on_mesh = [&](int k, const Mesh& m) { write_mesh_file(mesh_path(cfg, k), m); };
  auto initial = std::make_shared<const Mesh>(pr.mesh);
  std::vector<StudyRecord> recs;
  bool with_eid = false;
  if (parabolic) {
    SpaceTimeStudyOptions o;
    o.deg_v = cfg.deg_v;
    o.deg_flux = cfg.deg_flux;
    o.deg_w = cfg.deg_w;
    o.identity = diffusion_only(spec);
    o.majorant.mu_mode = cfg.mu;
    o.majorant.gamma = cfg.gamma;
    o.majorant.sweeps = cfg.sweeps;
    with_eid = true;
    recs = adaptive_loop(
        initial, [&](std::shared_ptr<const Mesh> m, int k) { return spacetime_step(spec, m, k, o); }, lo);
  } else {
    StaticStudyOptions o = static_options(cfg, pr);
    if (!spec.has_exact() && cfg.reference_degree > 0 && cfg.mode == RunMode::Uniform) {
      // reference on a common uniform hierarchy
      std::vector<std::shared_ptr<const Mesh>> h{initial};
      const int top = cfg.steps + cfg.reference_extra;
      for (int k = 0; k < top; ++k) h.push_back(std::make_shared<const Mesh>(refine_uniform(*h.back())));
      auto rs = FeSpace::lagrange(h[top], cfg.reference_degree);
      DiscreteField u = solve_static(spec, rs, o.stab);
      log << "reference: P" << cfg.reference_degree << " with " << rs->n_dofs() << " dofs\n";
      recs = adaptive_loop(
          initial,
          [&](std::shared_ptr<const Mesh>, int k) {
            ReferenceSolution ref{u, ancestor_map(h, k, top)};
            return static_step(spec, h[k], k, o, &ref);
          },
          lo);
    } else {
      recs = adaptive_loop(
          initial, [&](std::shared_ptr<const Mesh> m, int k) { return static_step(spec, m, k, o); }, lo);
    }
  }
  print_records(log, recs);
  write_study_csv((fs::path(cfg.out) / "study.csv").string(), recs, with_eid);
  write_plot((fs::path(cfg.out) / "plot.dat").string(), recs);
}

void write_homotopy(const RunConfig& cfg, const HomotopyResult& res, std::ostream& log) {
  std::vector<StudyRecord> all;
  for (const auto& l : res.levels) {
    log << "eps = " << l.eps << '\n';
    print_records(log, l.records);
    write_study_csv((fs::path(cfg.out) / homotopy_csv_name(l.eps)).string(), l.records);
    for (auto r : l.records) {
      r.ref = static_cast<int>(all.size());
      all.push_back(r);
    }
  }
  write_study_csv((fs::path(cfg.out) / "study.csv").string(), all);
  write_plot((fs::path(cfg.out) / "plot.dat").string(), all);
}

void run_homotopy_mode(const RunConfig& cfg, std::ostream& log) {
  Preset pr = build_problem(cfg, cfg.eps);
  if (pr.spec.parabolic) throw ConfigError("homotopy mode needs a stationary problem");
  check_degrees(cfg);
  HomotopySchedule s;
  s.eps_start = cfg.eps0;
  s.eps_target = pr.spec.epsilon;
  if (s.eps_start < s.eps_target) throw ConfigError("eps0 must not be smaller than the target eps");
  s.strategy = cfg.strategy;
  s.fixed_steps = std::max(1, cfg.steps);
  s.layer_resolution_factor = cfg.layer_resolution_factor;
  s.step_cap = cfg.step_cap;
  LevelSpec at = [&](double e) { return build_problem(cfg, e).spec; };
  int k = 0;
  MeshHook hook = [&](double, int, const Mesh& m) { write_mesh_file(mesh_path(cfg, k++), m); };
  try {
    HomotopyResult res = run_homotopy(at, std::make_shared<const Mesh>(pr.mesh), s, cfg.theta,
                                      static_options(cfg, pr), hook);
    write_homotopy(cfg, res, log);
  } catch (const StepCapExceeded& e) {
    write_homotopy(cfg, e.partial(), log);
    throw;
  }
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  try {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec || !fs::is_directory(cfg.out)) throw ConfigError("cannot create output directory " + cfg.out);
    if (cfg.mode == RunMode::Homotopy)
      run_homotopy_mode(cfg, log);
    else
      run_study(cfg, log);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const PresetError& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const SyntaxError& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace fpe
