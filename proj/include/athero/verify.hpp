#pragma once

// Error norms, self-convergence study, direct/indirect comparison and the
// (L0, H0) control-effect sweep.

#include "athero/direct.hpp"
#include "athero/indirect.hpp"
#include "athero/model.hpp"
#include "athero/nlp.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace athero::verify {

using Evaluator = std::function<double(double rho, double t)>;

struct PointGrid {
  std::vector<double> rho;
  std::vector<double> t;
};

/// Collocation node lattice of a setup.
PointGrid node_grid(const spectral::CollocationSetup& setup);

/// max |coarse - reference| over the lattice.
double err_inf(const Evaluator& coarse, const Evaluator& reference, const PointGrid& nodes);
/// Root of the plain sum of squared differences over the lattice.
double err_l2(const Evaluator& coarse, const Evaluator& reference, const PointGrid& nodes);

struct GridSpec {
  int N = 0;
  int M = 0;
};

struct SolverOptions {
  nlp::NlpOptions nlp;
  direct::FixedPointOptions fixed_point;
  indirect::ShootingOptions shooting;
  indirect::Rk4Options rk4;
};

struct ErrorReport {
  GridSpec grid;
  GridSpec reference;
  double Einf[3] = {0, 0, 0};  // L, H, F
  double E2[3] = {0, 0, 0};
  double EJ = 0.0;             // |J - J_reference|
  double objective = 0.0;
  double cpu_seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct ConvergenceStudy {
  GridSpec reference;
  double reference_objective = 0.0;
  double reference_cpu_seconds = 0.0;
  model::ModelParameters params;
  std::vector<ErrorReport> rows;
};

/// Direct solve on the reference grid, then one per coarse grid; norms are
/// taken on each coarse grid's collocation nodes. A failing row is marked and
/// the study continues. Throws InvalidInput unless the reference is strictly
/// finer than every coarse grid.
ConvergenceStudy convergence_study(const model::ModelParameters& params,
                                   const std::vector<GridSpec>& grids,
                                   GridSpec reference = {16, 16},
                                   const SolverOptions& options = {});

struct CrossMethodRecord {
  double field[3] = {0, 0, 0};  // sup |direct - indirect| for L, H, F
  double radius = 0.0;          // sup |R_hat direct - R_hat indirect|
  double control = 0.0;         // sup control difference at segment midpoints
  int segments = 0;
  int matching_segments = 0;    // same {0, Kbound} membership
  double match_fraction = 0.0;
};

/// Compares two solutions of the same problem. Fields are compared on
/// field_grid, R_hat on radius_times, controls at the direct segment
/// midpoints. A direct segment belongs to a bound when within
/// membership_tol * Kbound of it.
CrossMethodRecord cross_method_diff(const direct::DirectSolution& d,
                                    const spectral::CollocationSetup& direct_setup,
                                    const indirect::AdjointSolution& ind,
                                    const spectral::CollocationSetup& indirect_setup,
                                    const model::ModelParameters& params,
                                    const PointGrid& field_grid,
                                    const std::vector<double>& radius_times,
                                    double membership_tol = 1e-6);

/// Uniform lattice of n points on [-1, 1].
std::vector<double> uniform_times(int n);

struct SweepRow {
  double L0 = 0.0;
  double H0 = 0.0;
  std::vector<double> t;                // transformed time
  std::vector<double> R_controlled;     // R_hat = R + epsilon
  std::vector<double> R_uncontrolled;
  direct::ControlVector control;
  double objective_controlled = 0.0;
  double objective_uncontrolled = 0.0;
  bool failed = false;
  std::string error;
};

/// Per pair: one solve with phi = 0 and one with the optimized control.
SweepRow sweep_pair(double L0, double H0, const model::ModelParameters& params,
                    const spectral::CollocationSetup& setup, const SolverOptions& options = {},
                    int samples = 101);

std::vector<SweepRow> control_effect_sweep(const std::vector<std::pair<double, double>>& pairs,
                                           const model::ModelParameters& params,
                                           const spectral::CollocationSetup& setup,
                                           const SolverOptions& options = {},
                                           int samples = 101, bool concurrent = false);

/// Default (L0, H0) points of the sweep.
std::vector<std::pair<double, double>> default_sweep_pairs();

void write_convergence_csv(std::ostream& os, const ConvergenceStudy& study);
/// Fixed-width table, one row per grid, configuration in the header.
std::string format_convergence_table(const ConvergenceStudy& study);

}  // namespace athero::verify
