#include "fpe/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace fpe {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
  QuadratureRule r;
  r.dim = 1;
  r.degree = 2 * n - 1;
  r.points.resize(n, {0.0, 0.0});
  r.weights.resize(n);
  auto legendre = [n](double x, double& p, double& dp) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    p = p1;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
  };
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre(x, p, dp);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(x, p, dp);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.points[n - 1 - i] = {0.5 * (x + 1.0), 0.0};
    r.weights[n - 1 - i] = 0.5 * w;
  }
  return r;
}

QuadratureRule interval_rule(int degree) {
  int n = std::max(1, (degree + 2) / 2);
  QuadratureRule r = gauss_legendre(n);
  r.degree = 2 * n - 1;
  return r;
}

QuadratureRule triangle_rule(int degree) {
  // Duffy map x = s, y = (1-s) t; the Jacobian (1-s) adds one degree in s
  int n = std::max(1, (degree + 3) / 2);
  QuadratureRule g = gauss_legendre(n);
  QuadratureRule r;
  r.dim = 2;
  r.degree = degree;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = g.points[i][0], t = g.points[j][0];
      r.points.push_back({s, (1.0 - s) * t});
      r.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - s));
    }
  return r;
}

QuadratureRule cell_rule(int dim, int degree) {
  static std::mutex mtx;
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  QuadratureRule r = dim == 1 ? interval_rule(degree) : triangle_rule(degree);
  cache.emplace(key, r);
  return r;
}

}  // namespace fpe
