#include "athero/commands.hpp"

#include "athero/direct.hpp"
#include "athero/errors.hpp"
#include "athero/indirect.hpp"
#include "athero/verify.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

namespace athero::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kFieldNames[3] = {"L", "H", "F"};
const direct::Field kFields[3] = {direct::Field::L, direct::Field::H, direct::Field::F};

std::string g12(double v) { return fmt::format("{:.12g}", v); }

class Output {
 public:
  Output(std::string dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    fs::create_directories(dir_);
    manifest_["command"] = command_;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream f(fs::path(dir_) / name);
    if (!f) throw InvalidInput("cannot write '" + (fs::path(dir_) / name).string() + "'");
    manifest_["artifacts"].push_back(name);
    return f;
  }

  json& manifest() { return manifest_; }

  void write_manifest() {
    std::ofstream f(fs::path(dir_) / "manifest.json");
    f << manifest_.dump(2) << "\n";
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::string command_;
  json manifest_;
};

// (t, rho, value) rows, time-major.
void write_field_csv(std::ostream& os, const std::vector<double>& times, const std::vector<double>& rhos,
                     const std::function<double(int, int)>& value) {
  os << "t,rho,value\n";
  for (size_t k = 0; k < times.size(); ++k)
    for (size_t i = 0; i < rhos.size(); ++i)
      os << g12(times[k]) << ',' << g12(rhos[i]) << ',' << g12(value(int(i), int(k))) << '\n';
}

void write_control_csv(std::ostream& os, const direct::ControlVector& c) {
  os << "segment_start,segment_end,value\n";
  for (int i = 0; i < c.size(); ++i)
    os << g12(c.segment_start(i)) << ',' << g12(c.segment_end(i)) << ',' << g12(c.segments[i]) << '\n';
}

// Runs of equal samples become (start, end, value) segments.
void write_control_csv(std::ostream& os, const indirect::AdjointSolution& s) {
  os << "segment_start,segment_end,value\n";
  const size_t n = s.phi.size();
  size_t a = 0;
  while (a < n) {
    size_t b = a;
    while (b + 1 < n && s.phi[b + 1] == s.phi[a]) ++b;
    const double end = b + 1 < n ? s.time_grid[b + 1] : s.time_grid.back();
    os << g12(s.time_grid[a]) << ',' << g12(end) << ',' << g12(s.phi[a]) << '\n';
    a = b + 1;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json nlp_record(const nlp::NlpResult& r) {
  return {{"converged", r.converged}, {"iterations", r.iterations}, {"evaluations", r.evaluations},
          {"projected_gradient", r.projected_gradient}, {"message", r.message}};
}

struct DirectRun {
  spectral::CollocationSetup setup;
  direct::DirectSolution sol;
};

DirectRun direct_solve(const RunConfig& cfg, Output& out, std::ostream& log) {
  log << fmt::format("direct: N={} M={}\n", cfg.N, cfg.M);
  const auto t0 = std::chrono::steady_clock::now();
  DirectRun run{spectral::build_setup(cfg.N, cfg.M), {}};
  run.sol = direct::solve_direct(run.setup, cfg.params, cfg.solver.nlp, cfg.solver.fixed_point);
  out.manifest()["timings"]["direct_seconds"] = seconds_since(t0);

  const auto& s = run.sol.state;
  const auto& setup = run.setup;
  for (int f = 0; f < 3; ++f) {
    const Eigen::MatrixXd U = direct::nodal_values(s.coefficients(kFields[f]), setup);
    auto os = out.open(fmt::format("direct_{}.csv", kFieldNames[f]));
    write_field_csv(os, setup.time_nodes, setup.space_nodes, [&](int i, int k) { return U(i, k); });
  }
  {
    auto os = out.open("direct_v.csv");
    write_field_csv(os, setup.time_nodes, setup.space_nodes, [&](int i, int k) { return s.v(i, k); });
  }
  {
    auto os = out.open("direct_radius.csv");
    os << "t,R_hat\n";
    std::vector<double> times{-1.0};
    times.insert(times.end(), setup.time_nodes.begin(), setup.time_nodes.end());
    for (double t : times)
      os << g12(t) << ',' << g12(direct::evaluate_radius(s, t, setup) + cfg.params.epsilon) << '\n';
  }
  {
    auto os = out.open("direct_control.csv");
    write_control_csv(os, run.sol.control);
  }
  {
    auto os = out.open("objective.csv");
    os << "objective\n" << g12(run.sol.objective) << '\n';
  }
  json& r = out.manifest()["results"]["direct"];
  r["objective"] = run.sol.objective;
  r["R_hat_final"] = direct::evaluate_radius(s, 1.0, setup) + cfg.params.epsilon;
  r["fixed_point_iterations"] = s.iterations;
  r["fixed_point_delta"] = s.residual_history.empty() ? 0.0 : s.residual_history.back();
  r["linear_residual"] = s.linear_residual;
  r["sqp"] = nlp_record(run.sol.nlp);
  r["active_bound_segments"] = direct::active_bound_segments(run.sol.control);
  return run;
}

struct IndirectRun {
  spectral::CollocationSetup setup;
  indirect::AdjointSolution sol;
};

IndirectRun indirect_solve(const RunConfig& cfg, Output& out, std::ostream& log) {
  log << fmt::format("indirect: N={}\n", cfg.N);
  const auto t0 = std::chrono::steady_clock::now();
  IndirectRun run{spectral::build_setup(cfg.N, cfg.M), {}};
  run.sol = indirect::solve_indirect(run.setup, cfg.params, cfg.solver.shooting, cfg.solver.rk4);
  out.manifest()["timings"]["indirect_seconds"] = seconds_since(t0);

  const auto& s = run.sol;
  const auto& setup = run.setup;
  const std::vector<Eigen::VectorXd>* traj[3] = {&s.alpha_L, &s.alpha_H, &s.alpha_F};
  const Eigen::MatrixXd P0 = setup.space_eval(0);
  for (int f = 0; f < 3; ++f) {
    auto os = out.open(fmt::format("indirect_{}.csv", kFieldNames[f]));
    std::vector<Eigen::VectorXd> nodal;
    for (const auto& a : *traj[f]) nodal.push_back(P0 * a);
    write_field_csv(os, s.time_grid, setup.space_nodes, [&](int i, int k) { return nodal[k](i); });
  }
  {
    auto os = out.open("indirect_radius.csv");
    os << "t,R_hat,P_R\n";
    for (size_t k = 0; k < s.time_grid.size(); ++k)
      os << g12(s.time_grid[k]) << ',' << g12(s.R[k] + cfg.params.epsilon) << ',' << g12(s.P_R[k]) << '\n';
  }
  {
    auto os = out.open("indirect_control.csv");
    write_control_csv(os, s);
  }
  json& r = out.manifest()["results"]["indirect"];
  r["converged"] = s.converged;
  r["residual"] = s.residual;
  r["newton_iterations"] = s.newton_iterations;
  r["rk4_steps"] = s.steps;
  r["R_hat_final"] = s.R.back() + cfg.params.epsilon;
  r["switching_times"] = s.switching_times;
  int ties = 0;
  for (bool t : s.tie) ties += t;
  r["tie_samples"] = ties;
  return run;
}

json error_record(const std::string& command, const std::exception& e) {
  json j;
  j["command"] = command;
  j["message"] = e.what();
  j["exit_code"] = exit_code_for(e);
  if (auto* nc = dynamic_cast<const NonConvergence*>(&e)) {
    j["error"] = "NonConvergence";
    j["iterations"] = nc->iterations();
    j["last_delta"] = nc->last_delta();
  } else if (auto* ss = dynamic_cast<const SingularSystem*>(&e)) {
    j["error"] = "SingularSystem";
    j["rcond"] = ss->rcond();
  } else if (auto* inf = dynamic_cast<const IntegrationFailure*>(&e)) {
    j["error"] = "IntegrationFailure";
    j["time"] = inf->time();
  } else if (dynamic_cast<const InvalidInput*>(&e)) {
    j["error"] = "InvalidInput";
  } else if (dynamic_cast<const DomainError*>(&e)) {
    j["error"] = "DomainError";
  } else {
    j["error"] = "Error";
  }
  return j;
}

int finish(Output& out, const std::vector<std::string>& problems, int iterations) {
  out.manifest()["status"] = problems.empty() ? "ok" : "not_converged";
  out.write_manifest();
  if (problems.empty()) return kSuccess;
  std::string msg;
  for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
  return write_error(out.dir(), out.manifest()["command"], NonConvergence(msg, iterations, 0.0));
}

int cmd_direct(const RunConfig& cfg, Output& out, std::ostream& log) {
  const auto d = direct_solve(cfg, out, log);
  std::vector<std::string> problems;
  if (!d.sol.nlp.converged) problems.push_back("sqp: " + d.sol.nlp.message);
  return finish(out, problems, d.sol.nlp.iterations);
}

int cmd_indirect(const RunConfig& cfg, Output& out, std::ostream& log) {
  const auto r = indirect_solve(cfg, out, log);
  std::vector<std::string> problems;
  if (!r.sol.converged) problems.push_back(fmt::format("shooting residual {:.3e}", r.sol.residual));
  return finish(out, problems, r.sol.newton_iterations);
}

int cmd_compare(const RunConfig& cfg, Output& out, std::ostream& log) {
  const auto d = direct_solve(cfg, out, log);
  const auto r = indirect_solve(cfg, out, log);
  const auto rec = verify::cross_method_diff(d.sol, d.setup, r.sol, r.setup, cfg.params,
                                             verify::node_grid(d.setup), verify::uniform_times(101));
  {
    auto os = out.open("cross_method.csv");
    os << "L,H,F,R_hat,control,segments,matching_segments,match_fraction\n";
    os << g12(rec.field[0]) << ',' << g12(rec.field[1]) << ',' << g12(rec.field[2]) << ','
       << g12(rec.radius) << ',' << g12(rec.control) << ',' << rec.segments << ','
       << rec.matching_segments << ',' << g12(rec.match_fraction) << '\n';
  }
  out.manifest()["results"]["cross_method"] = {
      {"L", rec.field[0]},        {"H", rec.field[1]},       {"F", rec.field[2]},
      {"R_hat", rec.radius},      {"control", rec.control},  {"segments", rec.segments},
      {"matching_segments", rec.matching_segments},          {"match_fraction", rec.match_fraction}};
  std::vector<std::string> problems;
  if (!d.sol.nlp.converged) problems.push_back("sqp: " + d.sol.nlp.message);
  if (!r.sol.converged) problems.push_back(fmt::format("shooting residual {:.3e}", r.sol.residual));
  return finish(out, problems, 0);
}

int cmd_convergence(const RunConfig& cfg, Output& out, std::ostream& log) {
  log << fmt::format("convergence: reference ({},{}), {} grids\n", cfg.Ne, cfg.Me, cfg.convergence_grids.size());
  const auto t0 = std::chrono::steady_clock::now();
  const auto study = verify::convergence_study(cfg.params, cfg.convergence_grids, {cfg.Ne, cfg.Me}, cfg.solver);
  out.manifest()["timings"]["study_seconds"] = seconds_since(t0);
  out.manifest()["timings"]["reference_seconds"] = study.reference_cpu_seconds;
  {
    auto os = out.open("convergence.csv");
    verify::write_convergence_csv(os, study);
  }
  const std::string table = verify::format_convergence_table(study);
  {
    auto os = out.open("convergence.txt");
    os << table;
  }
  log << table;
  json& r = out.manifest()["results"]["convergence"];
  r["reference_objective"] = study.reference_objective;
  std::vector<std::string> problems;
  for (const auto& row : study.rows) {
    r["rows"].push_back({{"N", row.grid.N}, {"M", row.grid.M}, {"failed", row.failed}, {"error", row.error}});
    if (row.failed) problems.push_back(fmt::format("grid ({},{}): {}", row.grid.N, row.grid.M, row.error));
  }
  return finish(out, problems, 0);
}

int cmd_sweep(const RunConfig& cfg, Output& out, std::ostream& log) {
  log << fmt::format("sweep: {} pairs at N={} M={}\n", cfg.sweep_pairs.size(), cfg.N, cfg.M);
  const auto setup = spectral::build_setup(cfg.N, cfg.M);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = verify::control_effect_sweep(cfg.sweep_pairs, cfg.params, setup, cfg.solver,
                                                 cfg.sweep_samples, cfg.sweep_concurrent);
  out.manifest()["timings"]["sweep_seconds"] = seconds_since(t0);
  std::vector<std::string> problems;
  {
    auto os = out.open("sweep.csv");
    os << "L0,H0,R_hat_controlled_T,R_hat_uncontrolled_T,objective_controlled,objective_uncontrolled,status\n";
    for (const auto& r : rows) {
      if (r.failed) {
        os << g12(r.L0) << ',' << g12(r.H0) << ",,,,,failed\n";
        problems.push_back(fmt::format("pair ({},{}): {}", r.L0, r.H0, r.error));
        continue;
      }
      os << g12(r.L0) << ',' << g12(r.H0) << ',' << g12(r.R_controlled.back()) << ','
         << g12(r.R_uncontrolled.back()) << ',' << g12(r.objective_controlled) << ','
         << g12(r.objective_uncontrolled) << ",ok\n";
    }
  }
  {
    auto os = out.open("sweep_trajectories.csv");
    os << "L0,H0,t,R_hat_controlled,R_hat_uncontrolled\n";
    for (const auto& r : rows)
      for (size_t k = 0; k < r.t.size(); ++k)
        os << g12(r.L0) << ',' << g12(r.H0) << ',' << g12(r.t[k]) << ',' << g12(r.R_controlled[k]) << ','
           << g12(r.R_uncontrolled[k]) << '\n';
  }
  {
    auto os = out.open("sweep_controls.csv");
    os << "L0,H0,segment_start,segment_end,value\n";
    for (const auto& r : rows)
      for (int i = 0; i < r.control.size(); ++i)
        os << g12(r.L0) << ',' << g12(r.H0) << ',' << g12(r.control.segment_start(i)) << ','
           << g12(r.control.segment_end(i)) << ',' << g12(r.control.segments[i]) << '\n';
  }
  for (const auto& r : rows)
    out.manifest()["results"]["sweep"].push_back({{"L0", r.L0}, {"H0", r.H0}, {"failed", r.failed}, {"error", r.error}});
  return finish(out, problems, 0);
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"solve-direct", "solve-indirect", "compare",
                                              "convergence", "sweep", "run"};
  return names;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidInput*>(&e)) return kInvalidInput;
  return kSolverFailure;
}

int write_error(const std::string& dir, const std::string& command, const std::exception& e) {
  const json j = error_record(command, e);
  try {
    fs::create_directories(dir);
    std::ofstream f(fs::path(dir) / "error.json");
    f << j.dump(2) << "\n";
  } catch (const std::exception&) {
    // The exit code still reports the failure.
  }
  return j["exit_code"].get<int>();
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log) {
  try {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end())
      throw InvalidInput("unknown command '" + command + "'");
    cfg.validate();
    std::string cmd = command;
    if (cmd == "run")
      cmd = cfg.method == Method::Direct ? "solve-direct" : cfg.method == Method::Indirect ? "solve-indirect" : "compare";
    Output out(cfg.out, command);
    fs::remove(fs::path(cfg.out) / "error.json");
    out.manifest()["config"] = to_json(cfg);
    out.manifest()["manifest_version"] = 1;
    const auto t0 = std::chrono::steady_clock::now();
    int code;
    if (cmd == "solve-direct") code = cmd_direct(cfg, out, log);
    else if (cmd == "solve-indirect") code = cmd_indirect(cfg, out, log);
    else if (cmd == "compare") code = cmd_compare(cfg, out, log);
    else if (cmd == "convergence") code = cmd_convergence(cfg, out, log);
    else code = cmd_sweep(cfg, out, log);
    out.manifest()["timings"]["total_seconds"] = seconds_since(t0);
    out.write_manifest();
    return code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return write_error(cfg.out, command, e);
  }
}

}  // namespace athero::cli
