#pragma once

#include <string>
#include <vector>

#include "fpe/assembly.hpp"

namespace fpe {

class PresetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Preset {
  ProblemSpec spec;
  Mesh mesh;  // initial mesh
  Stabilization stab = Stabilization::Supg;  // discretization used for the tables
};

std::vector<std::string> preset_names();
// eps <= 0 keeps the preset's own diffusion
Preset make_preset(const std::string& name, double eps = 0.0);

// building blocks, also used by the homotopy driver
ProblemSpec example4_spec(double eps);

}  // namespace fpe
