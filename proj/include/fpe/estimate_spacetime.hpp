#pragma once

#include <limits>
#include <vector>

#include "fpe/estimate_static.hpp"

namespace fpe {

enum class MuMode { One, Opt };

// Spatial mean m(t) of a field on a space-time mesh, exact for Lagrange fields:
// piecewise polynomial between consecutive vertex times.
class MeanProfile {
 public:
  MeanProfile() = default;
  explicit MeanProfile(const DiscreteField& v);
  double value(double t) const;
  double derivative(double t) const;
  const std::vector<double>& breaks() const { return breaks_; }

 private:
  void eval(double t, double& m, double& dm) const;
  std::vector<double> breaks_;
  int npts_ = 0;
  std::vector<double> samples_;  // npts_ values per slab at interior nodes
};

struct SpaceTimeOptions {
  MuMode mu_mode = MuMode::Opt;
  double gamma = 1.0;
  int sweeps = 3;
  // remove the spatial mean of v before certifying (pure Neumann problems whose
  // exact solution has zero spatial mean)
  bool mean_correction = true;
};

struct SpaceTimeMeasures {
  double upper = 0.0;  // majorant measure (of v, or of v - m(t) with mean correction)
  double lower = 0.0;  // minorant measure (of v)
  double upper_raw = 0.0;  // signed square before clamping
};

struct SpaceTimeCertificate {
  double majorant = 0.0;
  double minorant = 0.0;
  double err_upper = std::numeric_limits<double>::quiet_NaN();
  double err_lower = std::numeric_limits<double>::quiet_NaN();
  double ieff_maj = std::numeric_limits<double>::quiet_NaN();
  double ieff_min = std::numeric_limits<double>::quiet_NaN();
  double alpha[3] = {2.0, 2.0, 2.0};
  double beta = 1.0;
  double gamma = 1.0;
  bool lambda_zero_with_mu_one = false;  // mu forced to 0 where lambda vanishes
  std::vector<double> mu;  // per cell quadrature point
  std::vector<double> indicators;
  std::vector<double> history;
  DiscreteField flux;
  // individual pieces of M^2
  double e0 = 0.0, mu_term = 0.0, req = 0.0, rd = 0.0, bnd = 0.0;
};

// M^2 for given flux y (scalar Lagrange on the space-time mesh), beta and mu field
SpaceTimeCertificate evaluate_parabolic_majorant(const DiscreteField& v, const ProblemSpec& spec,
                                                 const DiscreteField& y, double beta, const std::vector<double>& mu,
                                                 const SpaceTimeOptions& opt = {});
// pointwise optimal mu for given beta
double mu_opt(double beta, double gamma, double c_f, double eps, double lambda);

SpaceTimeCertificate parabolic_majorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr flux_space,
                                        const SpaceTimeOptions& opt = {});

double parabolic_minorant_functional(const DiscreteField& v, const ProblemSpec& spec, const DiscreteField& eta);
// maximized functional (clamped at 0); eta_space must be richer than v's space
double parabolic_minorant(const DiscreteField& v, const ProblemSpec& spec, SpacePtr eta_space,
                          DiscreteField* eta_out = nullptr);

SpaceTimeMeasures parabolic_error_norm(const DiscreteField& v, const ProblemSpec& spec,
                                       const SpaceTimeOptions& opt = {});

struct ErrorIdentity {
  double eid = 0.0;
  double strong = 0.0;
  bool certified = true;  // false for P1 input (RegularityViolated)
};
// diffusion-only problems; element-wise Laplacians of v
ErrorIdentity error_identity(const DiscreteField& v, const ProblemSpec& spec);

void attach_errors(SpaceTimeCertificate& c, const SpaceTimeMeasures& m);

}  // namespace fpe
