#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "fpe/homotopy.hpp"
#include "fpe/presets.hpp"

namespace fpe {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { Uniform, Adaptive, Homotopy, SpaceTime };

struct RunConfig {
  std::string preset;  // empty: problem given by the problem.* keys
  RunMode mode = RunMode::Uniform;
  int steps = 4;
  double theta = 0.3;
  int deg_v = 1;
  int deg_flux = 0;  // 0: RT1 for static problems, deg_v + 1 in space-time
  int deg_w = 0;     // 0: deg_v + 1; negative skips the minorant
  MuMode mu = MuMode::Opt;
  double gamma = 1.0;
  int sweeps = 3;
  double eps0 = 1.0;
  double eps = 0.0;  // 0 keeps the problem's own diffusion
  SwitchStrategy strategy = SwitchStrategy::Hmin;
  double layer_resolution_factor = 1.0;
  int step_cap = 25;
  std::optional<Stabilization> stab;  // unset: the problem's own choice
  int reference_degree = 0;  // > 0: reference solve for problems without exact solution (uniform mode)
  int reference_extra = 0;   // extra uniform refinements of the reference mesh
  std::string out = ".";
  std::map<std::string, std::string> problem;  // inline problem definition
};

// one "key = value" setting; flag names with '-' are accepted as well
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
// flat key = value lines, '#' starts a comment
void read_config(std::istream& is, RunConfig& cfg);
void read_config_file(const std::string& path, RunConfig& cfg);

// preset or inline problem with its initial mesh; eps > 0 overrides the diffusion
Preset build_problem(const RunConfig& cfg, double eps = 0.0);

// 0 on success, 2 on configuration errors, 3 on numerical failures
int run(const RunConfig& cfg, std::ostream& log);

}  // namespace fpe
