#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "fpe/mesh.hpp"
#include "fpe/quadrature.hpp"

namespace fpe {

enum class Family { Lagrange, VectorLagrange, RaviartThomas };
enum class Constraint { None, ZeroOnDirichlet, ZeroMean };

class FemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// affine map x = x0 + J xi
struct CellGeometry {
  int dim = 1;
  Point x0{0.0, 0.0};
  double J[2][2]{{0, 0}, {0, 0}};
  double K[2][2]{{0, 0}, {0, 0}};  // inverse of J
  double det = 0.0;                // |det J|

  Point map(const Point& xi) const;
  Point pull_grad(const double* g) const;  // K^T g
};
CellGeometry cell_geometry(const Mesh& mesh, int cell);

// Nodal Lagrange element on the reference cell. Node order: vertices, then the
// interior nodes of each local facet (facet i opposite vertex i, running from
// vertex i+1 to i+2), then cell-interior nodes.
class LagrangeRef {
 public:
  LagrangeRef(int dim, int degree);
  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Point>& nodes() const { return nodes_; }
  // any of the outputs may be null; grad has 2 entries and hess 3 (xx, xy, yy) per basis function
  void eval(const Point& xi, double* val, double* grad, double* hess) const;

 private:
  int dim_, degree_;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 2>> mono_;
  std::vector<double> coef_;  // coef_[m * n + i]: coefficient of monomial m in basis i
};
const LagrangeRef& lagrange_ref(int dim, int degree);

struct FacetInfo {
  int cell = -1;
  int local = -1;  // local facet index (opposite local vertex)
  BcTag tag = BcTag::Dirichlet;
  Point normal{0.0, 0.0};  // outward unit normal
  double measure = 1.0;    // facet length (1 in 1D)
};
std::vector<FacetInfo> boundary_facet_info(const Mesh& mesh);

// points on the reference cell along a local facet with weights summing to 1
void facet_rule(int dim, int local, int degree, std::vector<Point>& pts, std::vector<double>& w);

class FeSpace {
 public:
  static std::shared_ptr<FeSpace> lagrange(std::shared_ptr<const Mesh> mesh, int degree,
                                           Constraint c = Constraint::None);
  static std::shared_ptr<FeSpace> vector_lagrange(std::shared_ptr<const Mesh> mesh, int degree);
  // RT1: local space P1^d + x P1 (continuous P2 in 1D)
  static std::shared_ptr<FeSpace> raviart_thomas(std::shared_ptr<const Mesh> mesh);

  Family family() const { return family_; }
  int degree() const { return degree_; }
  Constraint constraint() const { return constraint_; }
  int n_dofs() const { return n_dofs_; }
  int n_local() const { return n_local_; }
  int value_dim() const;
  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const int* cell_dofs(int k) const { return &cell_dofs_[static_cast<std::size_t>(k) * n_local_]; }

  // scalar node data (Lagrange and vector Lagrange)
  int n_nodes() const { return static_cast<int>(node_points_.size()); }
  const std::vector<Point>& node_points() const { return node_points_; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_nodes_; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  const EdgeTable& edges() const { return edges_; }

  std::string describe() const;

 private:
  FeSpace() = default;
  void build_lagrange_nodes(int degree);

  Family family_ = Family::Lagrange;
  int degree_ = 1;
  Constraint constraint_ = Constraint::None;
  std::shared_ptr<const Mesh> mesh_;
  int n_dofs_ = 0;
  int n_local_ = 0;
  std::vector<int> cell_dofs_;
  std::vector<int> cell_nodes_;
  std::vector<Point> node_points_;
  std::vector<int> dirichlet_nodes_;
  std::vector<int> boundary_nodes_;
  EdgeTable edges_;
};
using SpacePtr = std::shared_ptr<const FeSpace>;

// Scalar Lagrange basis tabulated at physical quadrature points of one cell.
struct ScalarTab {
  int nq = 0, nloc = 0;
  std::vector<Point> x;
  std::vector<double> w;     // physical weights
  std::vector<double> phi;   // [q * nloc + i]
  std::vector<double> dphi;  // [(q * nloc + i) * 2 + d]
  std::vector<double> hphi;  // [(q * nloc + i) * 3 + c], xx, xy, yy
};

// Vector basis (RT or vector Lagrange) tabulated at points of one cell.
struct VectorTab {
  int nq = 0, nloc = 0;
  std::vector<Point> x;
  std::vector<double> w;
  std::vector<double> val;  // [(q * nloc + i) * 2 + d]
  std::vector<double> div;  // [q * nloc + i]
};

void tabulate_scalar(const FeSpace& space, int cell, const QuadratureRule& q, ScalarTab& tab,
                     bool hessians = false);
void tabulate_scalar_at(const FeSpace& space, int cell, const std::vector<Point>& xi,
                        const std::vector<double>& wref, ScalarTab& tab, bool hessians = false);
void tabulate_vector(const FeSpace& space, int cell, const QuadratureRule& q, VectorTab& tab);
void tabulate_vector_at(const FeSpace& space, int cell, const std::vector<Point>& xi,
                        const std::vector<double>& wref, VectorTab& tab);

struct DiscreteField {
  SpacePtr space;
  Eigen::VectorXd coeffs;

  DiscreteField() = default;
  DiscreteField(SpacePtr s) : space(std::move(s)), coeffs(Eigen::VectorXd::Zero(space->n_dofs())) {}
  DiscreteField(SpacePtr s, Eigen::VectorXd c) : space(std::move(s)), coeffs(std::move(c)) {}
};

using ScalarFunction = std::function<double(const Point&)>;
using VectorFunction = std::function<Point(const Point&)>;

// value at reference point xi of a cell; vector spaces return both components
double evaluate_scalar(const DiscreteField& f, int cell, const Point& xi);
Point evaluate_gradient(const DiscreteField& f, int cell, const Point& xi);
Point evaluate_vector(const DiscreteField& f, int cell, const Point& xi);
// barycentric variant (lambda_0, lambda_1, lambda_2); returns {value, 0} for scalars
Point evaluate(const DiscreteField& f, int cell, const std::array<double, 3>& bary);

DiscreteField interpolate(SpacePtr space, const ScalarFunction& fn);
DiscreteField interpolate_vector(SpacePtr space, const VectorFunction& fn);

// integral of fn(cell, x) over the mesh, or over boundary facets passing the filter
double integrate(const Mesh& mesh, const std::function<double(int, const Point&)>& fn,
                 int degree = kDefaultQuadDegree);
double integrate_boundary(const Mesh& mesh, const std::function<double(const FacetInfo&, const Point&)>& fn,
                          int degree = kDefaultQuadDegree,
                          const std::function<bool(const FacetInfo&)>& filter = {});

// spatial mean of a scalar field
double field_mean(const DiscreteField& f);

struct EmbeddingConstants {
  double c_friedrichs = 0.0;  // ||u|| <= C_F ||grad u|| for u = 0 on the Dirichlet part
  double c_poincare = 0.0;    // same for zero-mean u
  double c_trace = 0.0;       // ||u||_{Gamma_N} <= C_tr ||grad u|| on the relevant subspace
};

// C_F and C_P from the separable Laplace eigenvalues of the box, C_tr analytic in
// 1D and from a discrete eigenvalue problem (+5%) in 2D. For layouts without a
// Dirichlet side the trace constant refers to zero-mean functions and the whole
// non-Dirichlet boundary.
EmbeddingConstants embedding_constants(const Box& box, const SideTags& tags);
// discrete trace ratio sup ||u||_{Gamma_N} / ||grad u|| on an n x n P2 mesh (no margin)
double discrete_trace_constant(const Box& box, const SideTags& tags, int n);

}  // namespace fpe
