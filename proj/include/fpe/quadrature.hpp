#pragma once

#include <vector>

#include "fpe/mesh.hpp"

namespace fpe {

// Reference cells: interval [0,1]; triangle (0,0),(1,0),(0,1).
struct QuadratureRule {
  int dim = 1;
  int degree = 0;
  std::vector<Point> points;
  std::vector<double> weights;  // sum to the reference measure
  int size() const { return static_cast<int>(weights.size()); }
};

// Gauss-Legendre on [0,1] with n points (exact to degree 2n-1)
QuadratureRule gauss_legendre(int n);
// rule exact for polynomials of total degree <= degree
QuadratureRule interval_rule(int degree);
// collapsed Gauss rule on the reference triangle, exact to the given degree
QuadratureRule triangle_rule(int degree);
QuadratureRule cell_rule(int dim, int degree);

constexpr int kDefaultQuadDegree = 8;

}  // namespace fpe
