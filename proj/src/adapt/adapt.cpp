#include "fpe/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace fpe {

RefinementPlan bulk_mark(const std::vector<double>& indicators, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw AdaptError("theta must lie in (0, 1]");
  double total = 0.0;
  for (double e : indicators) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw AdaptError("indicators must be finite and nonnegative");
    total += e;
  }
  if (!(total > 0.0)) throw AdaptError("AllZeroIndicators: nothing to mark");
  std::vector<int> order(indicators.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return indicators[a] > indicators[b]; });
  RefinementPlan plan;
  const double goal = theta * total;
  double acc = 0.0;
  for (int k : order) {
    if (indicators[k] <= 0.0) break;
    plan.marked_cells.push_back(k);
    acc += indicators[k];
    if (acc >= goal) break;
  }
  return plan;
}

std::vector<double> compute_eoc(const std::vector<double>& errors, const std::vector<int>& dofs, int dim) {
  if (errors.size() != dofs.size()) throw AdaptError("errors and dof counts differ in length");
  std::vector<double> out(errors.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double h0 = std::pow(static_cast<double>(dofs[i - 1]), -1.0 / dim);
    const double h1 = std::pow(static_cast<double>(dofs[i]), -1.0 / dim);
    if (errors[i - 1] > 0.0 && errors[i] > 0.0 && h0 != h1) out[i] = std::log(errors[i - 1] / errors[i]) / std::log(h0 / h1);
  }
  return out;
}

void compute_eoc(std::vector<StudyRecord>& records, int dim) {
  std::vector<double> e, m, l;
  std::vector<int> n;
  for (const auto& r : records) {
    e.push_back(r.err_upper);
    m.push_back(r.majorant);
    l.push_back(r.minorant);
    n.push_back(r.dofs);
  }
  auto re = compute_eoc(e, n, dim), rm = compute_eoc(m, n, dim), rl = compute_eoc(l, n, dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].eoc_err = re[i];
    records[i].eoc_maj = rm[i];
    records[i].eoc_min = rl[i];
  }
}

std::vector<StudyRecord> adaptive_loop(std::shared_ptr<const Mesh> initial, const StepFunction& step,
                                       const LoopOptions& opt, std::shared_ptr<const Mesh>* final_mesh) {
  if (!opt.uniform && !(opt.theta > 0.0 && opt.theta <= 1.0)) throw AdaptError("theta must lie in (0, 1]");
  if (opt.steps < 0) throw AdaptError("number of steps must be nonnegative");
  std::vector<StudyRecord> out;
  auto mesh = std::move(initial);
  for (int k = 0; k <= opt.steps; ++k) {
    if (opt.on_mesh) opt.on_mesh(k, *mesh);
    const auto t0 = std::chrono::steady_clock::now();
    StepResult res = step(mesh, k);
    res.record.ref = k;
    res.record.cells = mesh->n_cells();
    res.record.h_min = min_cell_diameter(*mesh);
    res.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(res.record);
    if (final_mesh) *final_mesh = mesh;
    if (k == opt.steps) break;
    if (opt.uniform) {
      mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
    } else {
      RefinementPlan plan = bulk_mark(res.indicators, opt.theta);
      mesh = std::make_shared<const Mesh>(refine_marked(*mesh, plan));
    }
  }
  compute_eoc(out, initial ? initial->dim : mesh->dim);
  return out;
}

StepResult static_step(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, int, const StaticStudyOptions& opt,
                       const ReferenceSolution* reference) {
  const Constraint vc = spec.layout == BcLayout::Robin ? Constraint::ZeroMean : Constraint::None;
  auto vs = FeSpace::lagrange(mesh, opt.deg_v, vc);
  DiscreteField v = solve_static(spec, vs, opt.stab);
  SpacePtr ys = opt.deg_flux <= 1 ? FeSpace::raviart_thomas(mesh) : FeSpace::vector_lagrange(mesh, opt.deg_flux);
  ErrorCertificate cert = spec.layout == BcLayout::Robin ? majorant_robin(v, spec, ys, opt.majorant)
                                                         : majorant_mixed(v, spec, ys, opt.majorant);
  StepResult res;
  if (opt.deg_w >= 0) {
    const int dw = opt.deg_w == 0 ? opt.deg_v + 1 : opt.deg_w;
    cert.minorant = std::sqrt(minorant(v, spec, FeSpace::lagrange(mesh, dw)));
    res.record.minorant = cert.minorant;
  }
  if (spec.has_exact() || reference) attach_errors(cert, error_norms(v, spec, reference));
  res.record.dofs = vs->n_dofs();
  res.record.majorant = cert.majorant;
  res.record.err_upper = cert.err_upper;
  res.record.err_lower = cert.err_lower;
  res.record.ieff_maj = cert.ieff_maj;
  if (opt.deg_w >= 0) res.record.ieff_min = cert.ieff_min;
  res.indicators = std::move(cert.indicators);
  return res;
}

StepResult spacetime_step(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, int,
                          const SpaceTimeStudyOptions& opt) {
  auto vs = FeSpace::lagrange(mesh, opt.deg_v);
  DiscreteField v = solve_spacetime(spec, vs);
  const int dy = opt.deg_flux == 0 ? opt.deg_v + 1 : opt.deg_flux;
  SpaceTimeCertificate cert = parabolic_majorant(v, spec, FeSpace::lagrange(mesh, dy), opt.majorant);
  StepResult res;
  if (opt.deg_w >= 0) {
    const int dw = opt.deg_w == 0 ? opt.deg_v + 1 : opt.deg_w;
    cert.minorant = std::sqrt(parabolic_minorant(v, spec, FeSpace::lagrange(mesh, dw)));
    res.record.minorant = cert.minorant;
  }
  if (spec.has_exact()) attach_errors(cert, parabolic_error_norm(v, spec, opt.majorant));
  if (opt.identity) res.record.eid = error_identity(v, spec).eid;
  res.record.dofs = vs->n_dofs();
  res.record.majorant = cert.majorant;
  res.record.err_upper = cert.err_upper;
  res.record.err_lower = cert.err_lower;
  res.record.ieff_maj = cert.ieff_maj;
  if (opt.deg_w >= 0) res.record.ieff_min = cert.ieff_min;
  res.indicators = std::move(cert.indicators);
  return res;
}

void write_study_csv(std::ostream& os, const std::vector<StudyRecord>& records, bool with_eid) {
  os << "ref,dof,err_up,majorant,ieff_maj,err_low,minorant,ieff_min";
  if (with_eid) os << ",eid";
  os << '\n' << std::setprecision(10);
  for (const auto& r : records) {
    os << r.ref << ',' << r.dofs << ',' << r.err_upper << ',' << r.majorant << ',' << r.ieff_maj << ','
       << r.err_lower << ',' << r.minorant << ',' << r.ieff_min;
    if (with_eid) os << ',' << r.eid;
    os << '\n';
  }
}

void write_study_csv(const std::string& path, const std::vector<StudyRecord>& records, bool with_eid) {
  std::ofstream f(path);
  if (!f) throw AdaptError("cannot write " + path);
  write_study_csv(f, records, with_eid);
}

}  // namespace fpe
