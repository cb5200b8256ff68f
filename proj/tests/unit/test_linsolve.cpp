#include "doctest.h"
#include "fpe/linsolve.hpp"

using namespace fpe;

TEST_CASE("identity solve") {
  SparseMatrix a(5, 5);
  a.setIdentity();
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(5, 1, 5);
  LinearSystem s{a, b};
  CHECK((solve(s) - b).norm() == 0.0);
}

TEST_CASE("1D Dirichlet Laplacian with f = 2") {
  // 4 cells, h = 1/4, interior nodes 1/4, 1/2, 3/4
  const double h = 0.25;
  SparseMatrix a(3, 3);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < 3; ++i) {
    t.emplace_back(i, i, 2 / h);
    if (i > 0) t.emplace_back(i, i - 1, -1 / h);
    if (i < 2) t.emplace_back(i, i + 1, -1 / h);
  }
  a.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd b = Eigen::VectorXd::Constant(3, 2 * h);
  LinearSystem s{a, b};
  Eigen::VectorXd x = solve(s);
  for (int i = 0; i < 3; ++i) {
    double xi = (i + 1) * h;
    CHECK(x[i] == doctest::Approx(xi * (1 - xi)).epsilon(1e-14));
  }
  CHECK(relative_residual(a, x, b) < 1e-10);
  Eigen::VectorXd y = factor_spd(a).solve(b);
  CHECK((y - x).norm() < 1e-13);
}

TEST_CASE("duplicate row is singular") {
  SparseMatrix a(3, 3);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1}, {0, 1, 2}, {1, 0, 1}, {1, 1, 2}, {2, 2, 3}, {0, 2, 1}, {1, 2, 1}};
  a.setFromTriplets(t.begin(), t.end());
  LinearSystem s{a, Eigen::VectorXd::Ones(3)};
  CHECK_THROWS_AS(factor(s), SingularMatrix);
  try {
    factor(s);
  } catch (const SingularMatrix& e) {
    CHECK(e.pivot() >= 0);
  }
}

TEST_CASE("indefinite matrix rejected by Cholesky") {
  SparseMatrix a(2, 2);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1}, {1, 1, -1}};
  a.setFromTriplets(t.begin(), t.end());
  CHECK_THROWS_AS(factor_spd(a), IndefiniteSystem);
}
