#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "fpe/cli.hpp"
#include "fpe/expr.hpp"

namespace fpe {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t n = 0;
  int r = 0;
  try {
    r = std::stoi(v, &n);
  } catch (const std::exception&) {
    n = 0;
  }
  if (n == 0 || n != v.size()) throw ConfigError("invalid integer for " + key + ": '" + v + "'");
  return r;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t n = 0;
  double r = 0.0;
  try {
    r = std::stod(v, &n);
  } catch (const std::exception&) {
    n = 0;
  }
  if (n == 0 || n != v.size() || !std::isfinite(r)) throw ConfigError("invalid number for " + key + ": '" + v + "'");
  return r;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
  if (l == "0" || l == "false" || l == "no" || l == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

const char* kProblemKeys[] = {"dim", "n", "nt", "eps", "aniso_x", "aniso_y", "conservative", "drift_x", "drift_y",
                              "drift_div", "reaction", "rhs", "dirichlet", "exact", "exact_dx", "exact_dy",
                              "bc_left", "bc_right", "bc_bottom", "bc_top", "parabolic", "final_time", "initial",
                              "x0", "x1", "y0", "y1"};

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key_in, const std::string& value_in) {
  std::string key = lower(trim(key_in));
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(value_in);
  if (key.rfind("problem.", 0) == 0) {
    const std::string k = key.substr(8);
    if (std::find(std::begin(kProblemKeys), std::end(kProblemKeys), k) == std::end(kProblemKeys))
      throw ConfigError("unknown problem key '" + k + "'");
    cfg.problem[k] = v;
    return;
  }
  if (key == "preset") {
    cfg.preset = v;
  } else if (key == "mode") {
    const std::string m = lower(v);
    if (m == "uniform") cfg.mode = RunMode::Uniform;
    else if (m == "adaptive") cfg.mode = RunMode::Adaptive;
    else if (m == "homotopy") cfg.mode = RunMode::Homotopy;
    else if (m == "spacetime") cfg.mode = RunMode::SpaceTime;
    else throw ConfigError("unknown mode '" + v + "'");
  } else if (key == "steps") {
    cfg.steps = to_int(key, v);
    if (cfg.steps < 0) throw ConfigError("steps must be nonnegative");
  } else if (key == "theta") {
    cfg.theta = to_double(key, v);
    if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  } else if (key == "deg_v") {
    cfg.deg_v = to_int(key, v);
    if (cfg.deg_v < 1 || cfg.deg_v > 2) throw ConfigError("deg_v must be 1 or 2");
  } else if (key == "deg_flux") {
    cfg.deg_flux = to_int(key, v);
    if (cfg.deg_flux < 0 || cfg.deg_flux > 3) throw ConfigError("deg_flux must be 1..3 (0 for the default)");
  } else if (key == "deg_w") {
    cfg.deg_w = to_int(key, v);
    if (cfg.deg_w > 3) throw ConfigError("deg_w must be at most 3");
  } else if (key == "mu") {
    const std::string m = lower(v);
    if (m == "opt") cfg.mu = MuMode::Opt;
    else if (m == "one" || m == "1") cfg.mu = MuMode::One;
    else throw ConfigError("mu must be 'opt' or 'one'");
  } else if (key == "gamma") {
    cfg.gamma = to_double(key, v);
    if (!(cfg.gamma > 0.0)) throw ConfigError("gamma must be positive");
  } else if (key == "sweeps") {
    cfg.sweeps = to_int(key, v);
    if (cfg.sweeps < 1) throw ConfigError("sweeps must be positive");
  } else if (key == "eps0") {
    cfg.eps0 = to_double(key, v);
    if (!(cfg.eps0 > 0.0)) throw ConfigError("eps0 must be positive");
  } else if (key == "eps") {
    cfg.eps = to_double(key, v);
    if (!(cfg.eps > 0.0)) throw ConfigError("eps must be positive");
  } else if (key == "switch") {
    const std::string m = lower(v);
    if (m == "hmin") cfg.strategy = SwitchStrategy::Hmin;
    else if (m == "fixed") cfg.strategy = SwitchStrategy::FixedSteps;
    else throw ConfigError("switch must be 'hmin' or 'fixed'");
  } else if (key == "layer_resolution_factor") {
    cfg.layer_resolution_factor = to_double(key, v);
    if (!(cfg.layer_resolution_factor > 0.0)) throw ConfigError("layer_resolution_factor must be positive");
  } else if (key == "step_cap") {
    cfg.step_cap = to_int(key, v);
    if (cfg.step_cap < 1) throw ConfigError("step_cap must be positive");
  } else if (key == "stabilization") {
    const std::string m = lower(v);
    if (m == "supg") cfg.stab = Stabilization::Supg;
    else if (m == "none") cfg.stab = Stabilization::None;
    else throw ConfigError("stabilization must be 'supg' or 'none'");
  } else if (key == "reference_degree") {
    cfg.reference_degree = to_int(key, v);
    if (cfg.reference_degree < 0 || cfg.reference_degree > 3) throw ConfigError("reference_degree must be 0..3");
  } else if (key == "reference_extra") {
    cfg.reference_extra = to_int(key, v);
    if (cfg.reference_extra < 0) throw ConfigError("reference_extra must be nonnegative");
  } else if (key == "out") {
    if (v.empty()) throw ConfigError("out must not be empty");
    cfg.out = v;
  } else {
    throw ConfigError("unknown setting '" + key_in + "'");
  }
}

void read_config(std::istream& is, RunConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void read_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  read_config(f, cfg);
}

namespace {

Coef coefficient(const std::string& text, double eps, bool parabolic) {
  Expression e = parse_coefficient(text);
  // on a space-time mesh the second coordinate is t
  if (parabolic) return [e, eps](const Point& x, double) { return e({x[0], 0.0, x[1], eps}); };
  return [e, eps](const Point& x, double t) { return e({x[0], x[1], t, eps}); };
}

Coef expression_or(const std::map<std::string, std::string>& p, const std::string& key, double eps, bool parabolic) {
  auto it = p.find(key);
  return it == p.end() ? Coef{} : coefficient(it->second, eps, parabolic);
}

Preset inline_problem(const RunConfig& cfg, double eps_override) {
  const auto& p = cfg.problem;
  auto get = [&](const std::string& k, const std::string& def) {
    auto it = p.find(k);
    return it == p.end() ? def : it->second;
  };
  Preset out;
  ProblemSpec& s = out.spec;
  s.name = "inline";
  s.parabolic = to_bool("parabolic", get("parabolic", "false"));
  const int dim = s.parabolic ? 2 : to_int("dim", get("dim", "2"));
  if (dim != 1 && dim != 2) throw ConfigError("problem.dim must be 1 or 2");
  s.epsilon = eps_override > 0.0 ? eps_override : to_double("eps", get("eps", "1"));
  if (!(s.epsilon > 0.0)) throw ConfigError("problem.eps must be positive");
  const double eps = s.epsilon;
  s.aniso = {to_double("aniso_x", get("aniso_x", "1")), to_double("aniso_y", get("aniso_y", "1"))};
  s.conservative = to_bool("conservative", get("conservative", "false"));
  const bool par = s.parabolic;
  s.tags.left = parse_bc_tag(get("bc_left", par ? "neumann" : "dirichlet"));
  s.tags.right = parse_bc_tag(get("bc_right", par ? "neumann" : "dirichlet"));
  s.tags.bottom = parse_bc_tag(get("bc_bottom", "dirichlet"));
  s.tags.top = parse_bc_tag(get("bc_top", par ? "neumann" : "dirichlet"));
  const double x0 = to_double("x0", get("x0", "0")), x1 = to_double("x1", get("x1", "1"));
  if (!(x1 > x0)) throw ConfigError("problem.x1 must exceed problem.x0");
  const int n = to_int("n", get("n", "4"));
  if (n < 1) throw ConfigError("problem.n must be positive");

  Coef fx = expression_or(p, "drift_x", eps, par), fy = expression_or(p, "drift_y", eps, par);
  if (fx || fy) {
    s.drift = [fx, fy](const Point& x, double t) { return Point{fx ? fx(x, t) : 0.0, fy ? fy(x, t) : 0.0}; };
    s.drift_div = expression_or(p, "drift_div", eps, par);
    if (!s.drift_div) {
      // central differences of the drift components
      const int d = par ? 1 : dim;
      s.drift_div = [fx, fy, d](const Point& x, double t) {
        const double h = 1e-6;
        double r = 0.0;
        if (fx) r += (fx({x[0] + h, x[1]}, t) - fx({x[0] - h, x[1]}, t)) / (2 * h);
        if (fy && d == 2) r += (fy({x[0], x[1] + h}, t) - fy({x[0], x[1] - h}, t)) / (2 * h);
        return r;
      };
    }
  }
  s.reaction = expression_or(p, "reaction", eps, par);
  s.rhs = expression_or(p, "rhs", eps, par);
  s.dirichlet = expression_or(p, "dirichlet", eps, par);
  s.exact = expression_or(p, "exact", eps, par);
  if (s.exact) {
    Coef ux = expression_or(p, "exact_dx", eps, par), uy = expression_or(p, "exact_dy", eps, par);
    Coef u = s.exact;
    s.exact_grad = [u, ux, uy](const Point& x, double t) {
      const double h = 1e-6;
      const double gx = ux ? ux(x, t) : (u({x[0] + h, x[1]}, t) - u({x[0] - h, x[1]}, t)) / (2 * h);
      const double gy = uy ? uy(x, t) : (u({x[0], x[1] + h}, t) - u({x[0], x[1] - h}, t)) / (2 * h);
      return Point{gx, gy};
    };
    if (!s.dirichlet) s.dirichlet = s.exact;
  }
  if (par) {
    s.final_time = to_double("final_time", get("final_time", "1"));
    if (!(s.final_time > 0.0)) throw ConfigError("problem.final_time must be positive");
    s.box = Box{2, {x0, 0.0}, {x1, s.final_time}};
    s.tags.bottom = BcTag::Dirichlet;
    s.tags.top = BcTag::Neumann;
    s.layout = BcLayout::Mixed;
    s.initial = expression_or(p, "initial", eps, par);
    if (!s.initial && s.exact) s.initial = s.exact;
    if (!s.initial) throw ConfigError("parabolic problems need problem.initial or problem.exact");
    out.mesh = rectangle_mesh(s.box, n, to_int("nt", get("nt", std::to_string(n))), s.tags);
    return out;
  }
  if (dim == 1) {
    s.box = Box{1, {x0, 0.0}, {x1, 0.0}};
    out.mesh = interval_mesh(x0, x1, n, s.tags.left, s.tags.right);
  } else {
    const double y0 = to_double("y0", get("y0", "0")), y1 = to_double("y1", get("y1", "1"));
    if (!(y1 > y0)) throw ConfigError("problem.y1 must exceed problem.y0");
    s.box = Box{2, {x0, y0}, {x1, y1}};
    out.mesh = rectangle_mesh(s.box, n, n, s.tags);
  }
  const bool all_d = s.tags.left == BcTag::Dirichlet && s.tags.right == BcTag::Dirichlet &&
                     (dim == 1 || (s.tags.bottom == BcTag::Dirichlet && s.tags.top == BcTag::Dirichlet));
  bool any_r = s.tags.left == BcTag::Robin || s.tags.right == BcTag::Robin;
  if (dim == 2) any_r = any_r || s.tags.bottom == BcTag::Robin || s.tags.top == BcTag::Robin;
  s.layout = all_d ? BcLayout::FullDirichlet : any_r ? BcLayout::Robin : BcLayout::Mixed;
  return out;
}

}  // namespace

Preset build_problem(const RunConfig& cfg, double eps) {
  if (!cfg.preset.empty()) {
    if (!cfg.problem.empty()) throw ConfigError("give either a preset or problem.* keys, not both");
    return make_preset(cfg.preset, eps);
  }
  if (cfg.problem.empty()) throw ConfigError("no problem given: set a preset or problem.* keys");
  try {
    return inline_problem(cfg, eps);
  } catch (const MeshError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace fpe
