#include "fpe/presets.hpp"

#include <cmath>

namespace fpe {

namespace {

const double kPi = std::acos(-1.0);

Preset example1() {
  Preset p;
  ProblemSpec& s = p.spec;
  s.name = "example1";
  s.box = Box{1, {0.0, 0.0}, {1.0, 0.0}};
  s.layout = BcLayout::FullDirichlet;
  s.epsilon = 1e-2;
  const double eps = s.epsilon;
  s.drift = [](const Point&, double) { return Point{1.0, 0.0}; };
  s.drift_div = [](const Point&, double) { return 0.0; };
  s.rhs = [](const Point&, double) { return 0.0; };
  // u = e^{(x-1)/eps} - e^{-1/eps}: u(0) = 0, u(1) = 1 - e^{-1/eps}
  s.exact = [eps](const Point& x, double) { return std::exp((x[0] - 1.0) / eps) - std::exp(-1.0 / eps); };
  s.exact_grad = [eps](const Point& x, double) { return Point{std::exp((x[0] - 1.0) / eps) / eps, 0.0}; };
  s.dirichlet = s.exact;
  p.mesh = interval_mesh(0.0, 1.0, 8);
  p.stab = Stabilization::None;
  return p;
}

Preset example2() {
  Preset p;
  ProblemSpec& s = p.spec;
  s.name = "example2";
  s.box = Box{2, {0.0, 0.0}, {1.0, 1.0}};
  s.layout = BcLayout::FullDirichlet;
  s.epsilon = 1e-3;
  s.drift = [](const Point& x, double) { return Point{-x[0], 0.0}; };
  s.drift_div = [](const Point&, double) { return -1.0; };
  s.rhs = [](const Point& x, double) { return x[0]; };
  p.mesh = unit_square_mesh(4);
  p.stab = Stabilization::None;
  return p;
}

Preset example3() {
  Preset p;
  ProblemSpec& s = p.spec;
  s.name = "example3";
  s.box = Box{2, {0.0, 0.0}, {1.0, 1.0}};
  s.layout = BcLayout::FullDirichlet;
  s.epsilon = 1.0;
  s.aniso = {10.0, 1.0};
  s.conservative = true;
  const double c = std::cos(kPi / 3.0), sn = std::sin(kPi / 3.0);
  s.drift = [c, sn](const Point& x, double) { return Point{-c * x[0], sn * x[1]}; };
  s.drift_div = [c, sn](const Point&, double) { return -c + sn; };
  s.rhs = [](const Point& x, double) { return x[0] + x[1]; };
  p.mesh = unit_square_mesh(4);
  return p;
}

Preset example5() {
  Preset p;
  ProblemSpec& s = p.spec;
  s.name = "example5";
  s.box = Box{2, {0.0, 0.0}, {1.0, 1.0}};
  s.layout = BcLayout::FullDirichlet;
  s.epsilon = 1e-3;
  const double eps = s.epsilon;
  const double c0 = std::exp(-1.0 / eps);
  s.drift = [](const Point&, double) { return Point{1.0, 0.0}; };
  s.drift_div = [](const Point&, double) { return 0.0; };
  s.reaction = [](const Point&, double) { return 1.0; };
  auto P = [eps, c0](double x) { return x + (std::exp((x - 1.0) / eps) - c0) / (c0 - 1.0); };
  auto dP = [eps, c0](double x) { return 1.0 + std::exp((x - 1.0) / eps) / (eps * (c0 - 1.0)); };
  s.exact = [P](const Point& x, double) { return P(x[0]) * x[1] * (1.0 - x[1]); };
  s.exact_grad = [P, dP](const Point& x, double) {
    return Point{dP(x[0]) * x[1] * (1.0 - x[1]), P(x[0]) * (1.0 - 2.0 * x[1])};
  };
  s.rhs = [P, eps](const Point& x, double) {
    const double q = x[1] * (1.0 - x[1]), p0 = P(x[0]);
    return q * (1.0 + p0) + 2.0 * eps * p0;
  };
  s.dirichlet = s.exact;
  p.mesh = unit_square_mesh(4);
  return p;
}

Preset example6() {
  Preset p;
  ProblemSpec& s = p.spec;
  s.name = "example6";
  s.box = Box{2, {0.0, 0.0}, {1.0, 1.0}};
  s.layout = BcLayout::FullDirichlet;
  s.epsilon = 1e-4;
  const double eps = s.epsilon;
  s.drift = [](const Point&, double) { return Point{2.0, 3.0}; };
  s.drift_div = [](const Point&, double) { return 0.0; };
  s.reaction = [](const Point&, double) { return 1.0; };
  auto P = [eps](double x) { return x - std::exp(2.0 * (x - 1.0) / eps); };
  auto dP = [eps](double x) { return 1.0 - 2.0 / eps * std::exp(2.0 * (x - 1.0) / eps); };
  auto Q = [eps](double y) { return y * y - std::exp(3.0 * (y - 1.0) / eps); };
  auto dQ = [eps](double y) { return 2.0 * y - 3.0 / eps * std::exp(3.0 * (y - 1.0) / eps); };
  s.exact = [P, Q](const Point& x, double) { return P(x[0]) * Q(x[1]); };
  s.exact_grad = [P, Q, dP, dQ](const Point& x, double) {
    return Point{dP(x[0]) * Q(x[1]), P(x[0]) * dQ(x[1])};
  };
  s.rhs = [P, Q, eps](const Point& x, double) {
    const double p0 = P(x[0]), q0 = Q(x[1]);
    return 2.0 * q0 + p0 * (6.0 * x[1] - 2.0 * eps) + p0 * q0;
  };
  s.dirichlet = s.exact;
  p.mesh = unit_square_mesh(8);
  return p;
}

// u = (sin 2pi + cos pi x)(t cos 2t + 1) on (0,1) x (0,2)
Preset example7(char which) {
  Preset p;
  ProblemSpec& s = p.spec;
  s.name = std::string("example7") + which;
  s.parabolic = true;
  s.final_time = 2.0;
  s.box = Box{2, {0.0, 0.0}, {1.0, s.final_time}};
  s.tags = SideTags{BcTag::Neumann, BcTag::Neumann, BcTag::Dirichlet, BcTag::Neumann};
  s.layout = BcLayout::Mixed;
  s.epsilon = 1.0;
  const double a = which == 'd' ? 0.0 : 1.0;
  s.drift = [a](const Point&, double) { return Point{a, 0.0}; };
  s.drift_div = [](const Point&, double) { return 0.0; };
  Coef lam;
  switch (which) {
    case 'a':
      lam = [](const Point& x, double) {
        return std::exp(-200.0 * (x[0] - 0.2) * (x[0] - 0.2)) / (0.05 * std::sqrt(2.0 * kPi));
      };
      break;
    case 'b':
      lam = [](const Point& x, double t) { return 0.001 * (x[0] + 0.001) * (t * std::sin(t) + 1.0); };
      break;
    case 'c':
      lam = [](const Point& x, double t) { return 1000.0 * (x[0] + 0.001) * (t * std::sin(t) + 1.0); };
      break;
    default:
      lam = [](const Point&, double) { return 0.0; };
  }
  s.reaction = lam;
  auto u0 = [](double x) { return std::sin(2.0 * kPi) + std::cos(kPi * x); };
  auto tf = [](double t) { return t * std::cos(2.0 * t) + 1.0; };
  auto dtf = [](double t) { return std::cos(2.0 * t) - 2.0 * t * std::sin(2.0 * t); };
  s.initial = [u0](const Point& x, double) { return u0(x[0]); };
  s.exact = [u0, tf](const Point& x, double) { return u0(x[0]) * tf(x[1]); };
  s.exact_grad = [u0, tf, dtf](const Point& x, double) {
    return Point{-kPi * std::sin(kPi * x[0]) * tf(x[1]), u0(x[0]) * dtf(x[1])};
  };
  s.rhs = [u0, tf, dtf, lam, a](const Point& x, double) {
    const double t = x[1];
    return u0(x[0]) * dtf(t) +
           (kPi * kPi * std::cos(kPi * x[0]) - a * kPi * std::sin(kPi * x[0]) + lam(x, t) * u0(x[0])) * tf(t);
  };
  p.mesh = rectangle_mesh(s.box, 8, 16, s.tags);
  return p;
}

}  // namespace

ProblemSpec example4_spec(double eps) {
  ProblemSpec s;
  s.name = "example4";
  s.box = Box{2, {0.0, 0.0}, {1.0, 1.0}};
  s.layout = BcLayout::FullDirichlet;
  s.epsilon = eps;
  s.drift = [](const Point&, double) { return Point{1.0, 0.0}; };
  s.drift_div = [](const Point&, double) { return 0.0; };
  auto P = [eps](double x) { return x * x - std::exp((x - 1.0) / eps); };
  auto dP = [eps](double x) { return 2.0 * x - std::exp((x - 1.0) / eps) / eps; };
  s.exact = [P](const Point& x, double) { return P(x[0]) * x[1] * (1.0 - x[1]); };
  s.exact_grad = [P, dP](const Point& x, double) {
    return Point{dP(x[0]) * x[1] * (1.0 - x[1]), P(x[0]) * (1.0 - 2.0 * x[1])};
  };
  s.rhs = [P, eps](const Point& x, double) {
    const double q = x[1] * (1.0 - x[1]);
    return q * (2.0 * x[0] - 2.0 * eps) + 2.0 * eps * P(x[0]);
  };
  // u(0, y) = -e^{-1/eps} y (1 - y) is not exactly zero
  s.dirichlet = s.exact;
  return s;
}

std::vector<std::string> preset_names() {
  return {"example1", "example2", "example3", "example4", "example5", "example6",
          "example7a", "example7b", "example7c", "example7d"};
}

Preset make_preset(const std::string& name, double eps) {
  Preset p;
  if (name == "example1") {
    p = example1();
  } else if (name == "example2") {
    p = example2();
  } else if (name == "example3") {
    p = example3();
  } else if (name == "example4") {
    p.spec = example4_spec(eps > 0.0 ? eps : 1e-4);
    p.mesh = unit_square_mesh(8);
    return p;
  } else if (name == "example5") {
    p = example5();
  } else if (name == "example6") {
    p = example6();
  } else if (name.size() == 9 && name.rfind("example7", 0) == 0 && name[8] >= 'a' && name[8] <= 'd') {
    p = example7(name[8]);
  } else {
    throw PresetError("unknown preset '" + name + "'");
  }
  if (eps > 0.0 && eps != p.spec.epsilon) {
    // manufactured solutions are tied to their own diffusion
    if (p.spec.has_exact()) throw PresetError("preset '" + name + "' does not accept a diffusion override");
    p.spec.epsilon = eps;
  }
  return p;
}

}  // namespace fpe
