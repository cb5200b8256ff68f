#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "fpe/assembly.hpp"

namespace fpe {

class EstimateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reference solution on a (possibly finer) mesh. to_coarse maps every cell of
// the reference mesh to the cell of the approximation mesh containing it.
struct ReferenceSolution {
  DiscreteField u;
  std::vector<int> to_coarse;
};

// composed parent map from cells of hierarchy[fine] to cells of hierarchy[coarse]
std::vector<int> ancestor_map(const std::vector<std::shared_ptr<const Mesh>>& hierarchy, int coarse, int fine);

struct ErrorMeasures {
  double upper = 0.0;  // [e] of the majorant: eps|grad e|^2 + |delta e|^2 + |chi e|^2_{Gamma_N}
  double lower = 0.0;  // [e] of the minorant
  double l2 = 0.0;
  double h1 = 0.0;  // gradient seminorm
};

// error measures of v against spec.exact (adaptive quadrature) or a reference field
ErrorMeasures error_norms(const DiscreteField& v, const ProblemSpec& spec, const ReferenceSolution* ref = nullptr);

struct MajorantParts {
  double total = 0.0;  // M^2
  double rd = 0.0;     // |r_d|^2 in the A^{-1} weighted norm
  double req = 0.0;    // C_F^2/eps |(1-mu) r_eq|^2
  double rn = 0.0;     // C_tr^2/eps |(1-theta) r_N|^2
  double req_mu = 0.0; // |mu r_eq / delta|^2
  double rn_th = 0.0;  // |theta r_N / chi|^2
  std::vector<double> indicators;  // per-cell share of M^2
};

// M^2 for a given flux field and parameter set
MajorantParts evaluate_majorant(const DiscreteField& v, const ProblemSpec& spec, const DiscreteField& y,
                                const MajorantWeights& w);

// closed-form pointwise minimizers of the weight fields for the current beta, zeta
void update_weight_fields(const DiscreteField& v, const ProblemSpec& spec, MajorantWeights& w);

struct ErrorCertificate {
  double majorant = 0.0;
  double minorant = 0.0;  // square root of the maximized minorant functional
  double err_upper = std::numeric_limits<double>::quiet_NaN();
  double err_lower = std::numeric_limits<double>::quiet_NaN();
  double ieff_maj = std::numeric_limits<double>::quiet_NaN();
  double ieff_min = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> indicators;
  std::vector<double> history;  // M^2 after every sweep
  MajorantWeights weights;
  DiscreteField flux;
  MajorantParts parts;
};

struct MajorantOptions {
  int sweeps = 3;
  int quad_degree = kDefaultQuadDegree;
};

// guaranteed upper bound, flux minimized by block-coordinate sweeps
ErrorCertificate majorant_mixed(const DiscreteField& v, const ProblemSpec& spec, SpacePtr flux_space,
                                const MajorantOptions& opt = {});
// Robin variant: v zero mean, Gamma_N replaced by the whole boundary, C_F by C_P
ErrorCertificate majorant_robin(const DiscreteField& v, const ProblemSpec& spec, SpacePtr flux_space,
                                const MajorantOptions& opt = {});

// value of the minorant functional for a given w (w must vanish on Gamma_D)
double minorant_functional(const DiscreteField& v, const ProblemSpec& spec, const DiscreteField& w);
// maximized minorant M^2 (clamped at 0) over w in w_space; optionally returns the maximizer
double minorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr w_space, DiscreteField* w_out = nullptr);

// fill the error and efficiency fields of a certificate
void attach_errors(ErrorCertificate& c, const ErrorMeasures& e);

}  // namespace fpe
