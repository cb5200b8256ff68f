#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpe/estimate_spacetime.hpp"

namespace fpe {

class AdaptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// marked set: shortest prefix of cells by descending indicator (ties by index)
// whose indicators reach theta times the total
RefinementPlan bulk_mark(const std::vector<double>& indicators, double theta);

struct StudyRecord {
  int ref = 0;
  int dofs = 0;
  int cells = 0;
  double err_upper = std::numeric_limits<double>::quiet_NaN();
  double majorant = std::numeric_limits<double>::quiet_NaN();
  double ieff_maj = std::numeric_limits<double>::quiet_NaN();
  double err_lower = std::numeric_limits<double>::quiet_NaN();
  double minorant = std::numeric_limits<double>::quiet_NaN();
  double ieff_min = std::numeric_limits<double>::quiet_NaN();
  double eid = std::numeric_limits<double>::quiet_NaN();
  double eoc_err = std::numeric_limits<double>::quiet_NaN();
  double eoc_maj = std::numeric_limits<double>::quiet_NaN();
  double eoc_min = std::numeric_limits<double>::quiet_NaN();
  double h_min = 0.0;
  double seconds = 0.0;
};

// rate between consecutive entries: ln(e_i / e_{i+1}) / ln(N_i^{-1/d} / N_{i+1}^{-1/d});
// entry 0 is NaN
std::vector<double> compute_eoc(const std::vector<double>& errors, const std::vector<int>& dofs, int dim);
// fills the eoc fields of every record
void compute_eoc(std::vector<StudyRecord>& records, int dim);

// one solve + certify step on a mesh
struct StepResult {
  StudyRecord record;
  std::vector<double> indicators;
};
using StepFunction = std::function<StepResult(std::shared_ptr<const Mesh> mesh, int ref)>;

struct LoopOptions {
  double theta = 0.3;
  int steps = 0;          // refinements after the initial mesh
  bool uniform = false;   // refine every cell instead of bulk marking
  // called with every mesh before it is solved on
  std::function<void(int, const Mesh&)> on_mesh;
};

// solve -> certify -> mark -> refine; one record per mesh (steps + 1 records).
// final_mesh receives the last mesh solved on.
std::vector<StudyRecord> adaptive_loop(std::shared_ptr<const Mesh> initial, const StepFunction& step,
                                       const LoopOptions& opt, std::shared_ptr<const Mesh>* final_mesh = nullptr);

// ---- standard certify steps

struct StaticStudyOptions {
  int deg_v = 1;
  int deg_flux = 1;       // 1: Raviart-Thomas, >= 2: vector Lagrange of that degree
  int deg_w = 0;          // minorant space degree; 0 picks deg_v + 1, negative skips it
  Stabilization stab = Stabilization::Supg;
  MajorantOptions majorant;
};
StepResult static_step(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, int ref,
                       const StaticStudyOptions& opt, const ReferenceSolution* reference = nullptr);

struct SpaceTimeStudyOptions {
  int deg_v = 1;
  int deg_flux = 0;  // 0 picks deg_v + 1
  int deg_w = 0;     // 0 picks deg_v + 1, negative skips the minorant
  bool identity = false;  // also compute the error identity
  SpaceTimeOptions majorant;
};
StepResult spacetime_step(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, int ref,
                          const SpaceTimeStudyOptions& opt);

// CSV with columns ref,dof,err_up,majorant,ieff_maj,err_low,minorant,ieff_min[,eid]
void write_study_csv(std::ostream& os, const std::vector<StudyRecord>& records, bool with_eid = false);
void write_study_csv(const std::string& path, const std::vector<StudyRecord>& records, bool with_eid = false);

}  // namespace fpe
