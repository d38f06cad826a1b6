#include "athero/verify.hpp"

#include "athero/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <ostream>

namespace athero::verify {

namespace {

const direct::Field kFields[3] = {direct::Field::L, direct::Field::H, direct::Field::F};
const char* const kFieldNames[3] = {"L", "H", "F"};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Evaluator direct_field(const direct::StateSolution& s, direct::Field f,
                       const spectral::CollocationSetup& setup) {
  return [&s, f, &setup](double rho, double t) { return direct::evaluate_field(s, f, rho, t, setup); };
}

}  // namespace

PointGrid node_grid(const spectral::CollocationSetup& setup) {
  return {setup.space_nodes, setup.time_nodes};
}

double err_inf(const Evaluator& coarse, const Evaluator& reference, const PointGrid& nodes) {
  double e = 0.0;
  for (double rho : nodes.rho)
    for (double t : nodes.t) e = std::max(e, std::abs(coarse(rho, t) - reference(rho, t)));
  return e;
}

double err_l2(const Evaluator& coarse, const Evaluator& reference, const PointGrid& nodes) {
  double sum = 0.0;
  for (double rho : nodes.rho)
    for (double t : nodes.t) {
      const double d = coarse(rho, t) - reference(rho, t);
      sum += d * d;
    }
  return std::sqrt(sum);
}

ConvergenceStudy convergence_study(const model::ModelParameters& params,
                                   const std::vector<GridSpec>& grids, GridSpec reference,
                                   const SolverOptions& options) {
  params.validate();
  for (const GridSpec& g : grids)
    if (g.N >= reference.N || g.M >= reference.M)
      throw InvalidInput(fmt::format("convergence_study: reference ({},{}) is not finer than ({},{})",
                                     reference.N, reference.M, g.N, g.M));

  ConvergenceStudy study;
  study.reference = reference;
  study.params = params;
  const auto ref_setup = spectral::build_setup(reference.N, reference.M);
  const auto t0 = std::chrono::steady_clock::now();
  const auto ref = direct::solve_direct(ref_setup, params, options.nlp, options.fixed_point);
  study.reference_cpu_seconds = seconds_since(t0);
  study.reference_objective = ref.objective;

  for (const GridSpec& g : grids) {
    ErrorReport row;
    row.grid = g;
    row.reference = reference;
    try {
      const auto setup = spectral::build_setup(g.N, g.M);
      const auto start = std::chrono::steady_clock::now();
      const auto sol = direct::solve_direct(setup, params, options.nlp, options.fixed_point);
      row.cpu_seconds = seconds_since(start);
      row.objective = sol.objective;
      row.EJ = std::abs(sol.objective - ref.objective);
      const PointGrid nodes = node_grid(setup);
      for (int f = 0; f < 3; ++f) {
        const Evaluator coarse = direct_field(sol.state, kFields[f], setup);
        const Evaluator fine = direct_field(ref.state, kFields[f], ref_setup);
        row.Einf[f] = err_inf(coarse, fine, nodes);
        row.E2[f] = err_l2(coarse, fine, nodes);
      }
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    study.rows.push_back(row);
  }
  return study;
}

std::vector<double> uniform_times(int n) {
  if (n < 2) throw InvalidInput("uniform_times: need at least two points");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = -1.0 + 2.0 * i / (n - 1);
  t.back() = 1.0;
  return t;
}

CrossMethodRecord cross_method_diff(const direct::DirectSolution& d,
                                    const spectral::CollocationSetup& direct_setup,
                                    const indirect::AdjointSolution& ind,
                                    const spectral::CollocationSetup& indirect_setup,
                                    const model::ModelParameters& params,
                                    const PointGrid& field_grid,
                                    const std::vector<double>& radius_times, double membership_tol) {
  CrossMethodRecord rec;
  for (int f = 0; f < 3; ++f) {
    const Evaluator a = direct_field(d.state, kFields[f], direct_setup);
    const Evaluator b = [&, f](double rho, double t) {
      return indirect::evaluate_field(ind, kFields[f], rho, t, indirect_setup);
    };
    rec.field[f] = err_inf(a, b, field_grid);
  }
  // R_hat = R + epsilon on both sides, so the shift cancels.
  for (double t : radius_times)
    rec.radius = std::max(rec.radius, std::abs(direct::evaluate_radius(d.state, t, direct_setup) -
                                               indirect::evaluate_radius(ind, t)));

  const double K = params.Kbound;
  const double band = membership_tol * std::max(K, 1e-300);
  rec.segments = d.control.size();
  for (int i = 0; i < rec.segments; ++i) {
    const double mid = 0.5 * (d.control.segment_start(i) + d.control.segment_end(i));
    const double cd = d.control.segments[i];
    const double ci = indirect::control_at(ind, mid);
    rec.control = std::max(rec.control, std::abs(cd - ci));
    const bool at_zero = cd <= band, at_K = cd >= K - band;
    if ((ci == 0.0 && at_zero) || (ci == K && at_K)) ++rec.matching_segments;
  }
  rec.match_fraction = rec.segments > 0 ? double(rec.matching_segments) / rec.segments : 1.0;
  return rec;
}

SweepRow sweep_pair(double L0, double H0, const model::ModelParameters& params,
                    const spectral::CollocationSetup& setup, const SolverOptions& options,
                    int samples) {
  SweepRow row;
  row.L0 = L0;
  row.H0 = H0;
  try {
    model::ModelParameters p = params;
    p.L0 = L0;
    p.H0 = H0;
    p.validate();
    row.t = uniform_times(samples);
    const auto zero = direct::ControlVector::constant(setup.M, 0.0, p.Kbound);
    const auto free = direct::fixed_point_solve(zero, setup, p, options.fixed_point);
    const auto opt = direct::solve_direct(setup, p, options.nlp, options.fixed_point);
    row.control = opt.control;
    row.objective_controlled = opt.objective;
    row.objective_uncontrolled = 1.0 - direct::evaluate_radius(free, 1.0, setup) - p.epsilon;
    for (double t : row.t) {
      row.R_controlled.push_back(direct::evaluate_radius(opt.state, t, setup) + p.epsilon);
      row.R_uncontrolled.push_back(direct::evaluate_radius(free, t, setup) + p.epsilon);
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

std::vector<SweepRow> control_effect_sweep(const std::vector<std::pair<double, double>>& pairs,
                                           const model::ModelParameters& params,
                                           const spectral::CollocationSetup& setup,
                                           const SolverOptions& options, int samples,
                                           bool concurrent) {
  std::vector<SweepRow> rows;
  if (concurrent) {
    std::vector<std::future<SweepRow>> jobs;
    for (const auto& [L0, H0] : pairs)
      jobs.push_back(std::async(std::launch::async, [&, L0 = L0, H0 = H0] {
        return sweep_pair(L0, H0, params, setup, options, samples);
      }));
    for (auto& j : jobs) rows.push_back(j.get());
  } else {
    for (const auto& [L0, H0] : pairs) rows.push_back(sweep_pair(L0, H0, params, setup, options, samples));
  }
  return rows;
}

std::vector<std::pair<double, double>> default_sweep_pairs() {
  return {{0.0100, 0.0050}, {0.0120, 0.0050}, {0.0140, 0.0050}, {0.0160, 0.0050}};
}

void write_convergence_csv(std::ostream& os, const ConvergenceStudy& study) {
  os << "N,M,Ne,Me,Einf_L,Einf_H,Einf_F,E2_L,E2_H,E2_F,E_J,objective,cpu_seconds,status\n";
  for (const auto& r : study.rows) {
    fmt::print(os, "{},{},{},{}", r.grid.N, r.grid.M, r.reference.N, r.reference.M);
    for (double v : r.Einf) fmt::print(os, ",{:.12g}", v);
    for (double v : r.E2) fmt::print(os, ",{:.12g}", v);
    fmt::print(os, ",{:.12g},{:.12g},{:.12g},{}\n", r.EJ, r.objective, r.cpu_seconds,
               r.failed ? "failed" : "ok");
  }
}

std::string format_convergence_table(const ConvergenceStudy& study) {
  const auto& p = study.params;
  std::string out = fmt::format(
      "# direct method self-convergence, reference (Ne,Me)=({},{}), L0={:.12g} H0={:.12g} T={:.12g} "
      "epsilon={:.12g} Kbound={:.12g}\n",
      study.reference.N, study.reference.M, p.L0, p.H0, p.T, p.epsilon, p.Kbound);
  out += fmt::format("{:>4} {:>4}", "N", "M");
  for (const char* n : kFieldNames) out += fmt::format(" {:>12}", std::string("Einf(") + n + ")");
  for (const char* n : kFieldNames) out += fmt::format(" {:>12}", std::string("E2(") + n + ")");
  out += fmt::format(" {:>12} {:>10}\n", "E(J)", "CPU(s)");
  for (const auto& r : study.rows) {
    out += fmt::format("{:>4} {:>4}", r.grid.N, r.grid.M);
    if (r.failed) {
      out += "  failed: " + r.error + "\n";
      continue;
    }
    for (double v : r.Einf) out += fmt::format(" {:>12.4e}", v);
    for (double v : r.E2) out += fmt::format(" {:>12.4e}", v);
    out += fmt::format(" {:>12.4e} {:>10.3f}\n", r.EJ, r.cpu_seconds);
  }
  return out;
}

}  // namespace athero::verify
