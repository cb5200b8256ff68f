#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpe/adapt.hpp"

namespace fpe {

enum class SwitchStrategy { FixedSteps, Hmin };

struct HomotopySchedule {
  double eps_start = 1.0;
  double eps_target = 1e-3;
  double decay = 10.0;
  SwitchStrategy strategy = SwitchStrategy::Hmin;
  int fixed_steps = 4;                  // iterations per level for FixedSteps
  double layer_resolution_factor = 1.0;  // Hmin: leave a level once h_min <= factor * eps
  int step_cap = 25;                     // Hmin: iterations allowed per level
};

// eps_start, eps_start / decay, ... with the last level clamped to eps_target
std::vector<double> homotopy_levels(const HomotopySchedule& s);

struct HomotopyLevel {
  double eps = 0.0;
  std::vector<StudyRecord> records;
};

struct HomotopyResult {
  std::vector<HomotopyLevel> levels;
  std::shared_ptr<const Mesh> mesh;  // mesh after the last refinement
};

class StepCapExceeded : public std::runtime_error {
 public:
  StepCapExceeded(const std::string& msg, HomotopyResult partial)
      : std::runtime_error(msg), partial_(std::move(partial)) {}
  const HomotopyResult& partial() const { return partial_; }

 private:
  HomotopyResult partial_;
};

using LevelSpec = std::function<ProblemSpec(double eps)>;
// called with (level eps, step within the level, mesh) before each solve
using MeshHook = std::function<void(double, int, const Mesh&)>;

// per level: solve -> estimate -> record -> mark -> refine, the mesh carrying over
HomotopyResult run_homotopy(const LevelSpec& spec_at, std::shared_ptr<const Mesh> initial,
                            const HomotopySchedule& schedule, double theta, const StaticStudyOptions& opt = {},
                            const MeshHook& on_mesh = {});

// file name of the study CSV of one level
std::string homotopy_csv_name(double eps);

}  // namespace fpe
