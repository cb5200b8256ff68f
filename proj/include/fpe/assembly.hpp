#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpe/fem.hpp"
#include "fpe/linsolve.hpp"

namespace fpe {

enum class BcLayout { Mixed, Robin, FullDirichlet };
enum class Stabilization { None, Supg };

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Coefficients take a spatial point and a time. On a space-time mesh the point
// is (x, t) and the time argument repeats t.
using Coef = std::function<double(const Point&, double)>;
using VecCoef = std::function<Point(const Point&, double)>;

struct ProblemSpec {
  std::string name;
  Box box{1, {0.0, 0.0}, {1.0, 0.0}};
  SideTags tags;
  BcLayout layout = BcLayout::FullDirichlet;

  double epsilon = 1.0;
  Point aniso{1.0, 1.0};  // diffusion matrix eps * diag(aniso)
  // conservative: -div(A grad u) + div(F u) + lambda u = f
  // otherwise:    -div(A grad u) + F . grad u + lambda u = f
  bool conservative = false;
  VecCoef drift;
  Coef drift_div;
  Coef reaction;
  Coef rhs;
  Coef dirichlet;  // boundary values on Gamma_D (defaults to 0)

  Coef exact;
  VecCoef exact_grad;

  // parabolic problems: 1D space, the mesh lives on (x, t)
  bool parabolic = false;
  double final_time = 0.0;
  Coef initial;

  double F(const Point& x, int i, double t = 0.0) const { return drift ? drift(x, t)[i] : 0.0; }
  Point drift_at(const Point& x, double t = 0.0) const { return drift ? drift(x, t) : Point{0.0, 0.0}; }
  double div_drift(const Point& x, double t = 0.0) const { return drift_div ? drift_div(x, t) : 0.0; }
  double lambda(const Point& x, double t = 0.0) const { return reaction ? reaction(x, t) : 0.0; }
  double f(const Point& x, double t = 0.0) const { return rhs ? rhs(x, t) : 0.0; }
  double g(const Point& x, double t = 0.0) const { return dirichlet ? dirichlet(x, t) : 0.0; }
  // reaction coefficient of the conservative form
  double lambda_c(const Point& x, double t = 0.0) const {
    return conservative ? lambda(x, t) : lambda(x, t) - div_drift(x, t);
  }
  // reaction coefficient of the convective form
  double lambda_nc(const Point& x, double t = 0.0) const {
    return conservative ? lambda(x, t) + div_drift(x, t) : lambda(x, t);
  }
  // weight delta^2 of the energy measure
  double delta2(const Point& x) const { return lambda_c(x) + 0.5 * div_drift(x); }
  double diff(int i) const { return epsilon * aniso[i]; }
  double eps_min(int dim) const { return dim == 1 ? diff(0) : std::min(diff(0), diff(1)); }
  bool has_exact() const { return static_cast<bool>(exact); }
};

struct SupgParams {
  double delta0 = 0.5;
  double delta1 = 0.25;
};

// stabilization weight of one cell from the Peclet switch
double supg_delta(const ProblemSpec& spec, const Mesh& mesh, int cell, const SupgParams& p = {});

// Static system on a Lagrange space. Dirichlet rows are eliminated
// symmetrically; a zero-mean space gets a trailing multiplier row.
LinearSystem assemble_static(const ProblemSpec& spec, const FeSpace& space,
                             Stabilization stab = Stabilization::Supg, const SupgParams& p = {});
// throws IncomingFluxViolated (AssemblyError) unless F.n < 0 on the flux boundary
void check_incoming_flux(const ProblemSpec& spec, const Mesh& mesh);
DiscreteField solve_static(const ProblemSpec& spec, SpacePtr space, Stabilization stab = Stabilization::Supg,
                           const SupgParams& p = {});

// Space-time Petrov-Galerkin system on the (x, t) mesh: values at t = 0 are
// fixed by the initial condition, every other boundary part is natural.
LinearSystem assemble_spacetime(const ProblemSpec& spec, const FeSpace& trial, const FeSpace& test);
DiscreteField solve_spacetime(const ProblemSpec& spec, SpacePtr space);

// Weights of the static majorant. mu lives on cell quadrature points of
// cell_rule(dim, quad_degree), theta on facet quadrature points of the flux
// boundary, both in the order produced by the estimator.
struct MajorantWeights {
  double beta = 1.0;
  double zeta = 1.0;
  double c_f = 1.0;   // Friedrichs or Poincare constant
  double c_tr = 0.0;  // trace constant (gradient seminorm)
  std::vector<double> mu;
  std::vector<double> theta;
  int quad_degree = kDefaultQuadDegree;
};

// Quadratic form of the majorant in the flux coefficients:
// M^2(y) = y^T A y - 2 b^T y + c.
struct FluxQuadratic {
  LinearSystem system;  // A and b
  double constant = 0.0;
};

// facets carrying the boundary residual (Gamma_N, or all of Gamma for Robin)
std::vector<FacetInfo> flux_facets(const ProblemSpec& spec, const Mesh& mesh);

FluxQuadratic assemble_majorant_flux_system(const DiscreteField& v, const ProblemSpec& spec,
                                            const FeSpace& flux_space, const MajorantWeights& w);

// apply Dirichlet values: rows/cols of fixed dofs are removed symmetrically
void apply_dirichlet(SparseMatrix& a, Eigen::VectorXd& b, const std::vector<int>& dofs,
                     const std::vector<double>& values);

}  // namespace fpe
