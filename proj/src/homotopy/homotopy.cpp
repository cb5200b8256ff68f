#include "fpe/homotopy.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace fpe {

std::vector<double> homotopy_levels(const HomotopySchedule& s) {
  if (!(s.eps_target > 0.0) || !(s.eps_start >= s.eps_target))
    throw AdaptError("homotopy needs eps_start >= eps_target > 0");
  if (!(s.decay > 1.0)) throw AdaptError("homotopy decay factor must exceed 1");
  std::vector<double> out;
  for (int k = 0;; ++k) {
    double e = s.eps_start / std::pow(s.decay, k);
    if (e <= s.eps_target * (1.0 + 1e-12)) {
      out.push_back(s.eps_target);
      break;
    }
    out.push_back(e);
  }
  return out;
}

HomotopyResult run_homotopy(const LevelSpec& spec_at, std::shared_ptr<const Mesh> initial,
                            const HomotopySchedule& schedule, double theta, const StaticStudyOptions& opt,
                            const MeshHook& on_mesh) {
  if (!(theta > 0.0 && theta <= 1.0)) throw AdaptError("theta must lie in (0, 1]");
  if (schedule.strategy == SwitchStrategy::FixedSteps && schedule.fixed_steps < 1)
    throw AdaptError("fixed-steps homotopy needs at least one step per level");
  HomotopyResult res;
  res.mesh = std::move(initial);
  for (double eps : homotopy_levels(schedule)) {
    const ProblemSpec spec = spec_at(eps);
    HomotopyLevel level;
    level.eps = eps;
    for (int j = 0;; ++j) {
      if (schedule.strategy == SwitchStrategy::FixedSteps && j == schedule.fixed_steps) break;
      if (schedule.strategy == SwitchStrategy::Hmin && j == schedule.step_cap) {
        res.levels.push_back(level);
        std::ostringstream os;
        os << "StepCapExceeded: level eps = " << eps << " not resolved after " << schedule.step_cap << " steps";
        throw StepCapExceeded(os.str(), res);
      }
      if (on_mesh) on_mesh(eps, j, *res.mesh);
      const auto t0 = std::chrono::steady_clock::now();
      StepResult step = static_step(spec, res.mesh, j, opt);
      step.record.ref = j;
      step.record.cells = res.mesh->n_cells();
      step.record.h_min = min_cell_diameter(*res.mesh);
      step.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      level.records.push_back(step.record);
      RefinementPlan plan = bulk_mark(step.indicators, theta);
      res.mesh = std::make_shared<const Mesh>(refine_marked(*res.mesh, plan));
      if (schedule.strategy == SwitchStrategy::Hmin &&
          min_cell_diameter(*res.mesh) <= schedule.layer_resolution_factor * eps)
        break;
    }
    compute_eoc(level.records, res.mesh->dim);
    res.levels.push_back(std::move(level));
  }
  return res;
}

std::string homotopy_csv_name(double eps) {
  std::ostringstream os;
  os << "homotopy_eps_" << eps << ".csv";
  return os.str();
}

}  // namespace fpe
