#pragma once

// Optimize-then-discretize: state and adjoint fields are collocated in space
// only, the resulting ODE system runs forward from t = -1 with RK4, and Newton
// shooting fixes the unknown adjoint initial data.

#include "athero/direct.hpp"
#include "athero/model.hpp"
#include "athero/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

namespace athero::indirect {

struct Rk4Options {
  int steps = 400;  // lower bound on uniform steps over [-1, 1]
  // Raise the step count so that h times the spectral radius of the linear
  // diffusion/drift part stays below stability_margin (RK4 real-axis limit 2.78).
  bool stiffness_steps = true;
  double stability_margin = 2.5;
  double blowup = 1e8;  // |y|_inf above this counts as instability
  bool retry_on_failure = true;  // halve h once and rerun
};

struct ShootingOptions {
  double fd_step = 1e-6;
  double tol = 1e-8;
  int max_iter = 50;
  int max_halvings = 20;
  double sentinel = 1e10;  // residual entries returned when integration fails
  bool concurrent_jacobian = false;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> y;
};

using OdeFunction = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
// Called before each step with the step index, time and state; used to hold
// piecewise-constant inputs over a step.
using StepHook = std::function<void(int, double, const Eigen::VectorXd&)>;

/// Classical RK4 on the uniform grid t0 + k (t1 - t0) / steps. Throws
/// IntegrationFailure at the first non-finite state or one exceeding blowup.
Trajectory rk4_integrate(const OdeFunction& f, const Eigen::VectorXd& y0, int steps,
                         double t0 = -1.0, double t1 = 1.0,
                         double blowup = std::numeric_limits<double>::infinity(),
                         const StepHook& hook = {});

/// Packed layout [alpha_L | alpha_H | alpha_F | beta_PL | beta_PH | beta_PF | R | P_R].
struct Layout {
  int N = 0;
  int size() const { return 6 * N + 2; }
  int alpha(int field) const { return field * N; }
  int beta(int field) const { return (3 + field) * N; }
  int R() const { return 6 * N; }
  int PR() const { return 6 * N + 1; }
};

/// Read-only data shared by every right-hand-side evaluation.
class Context {
 public:
  Context(const spectral::CollocationSetup& setup, const model::ModelParameters& params,
          const Rk4Options& rk4 = {});

  const spectral::CollocationSetup& setup() const { return *setup_; }
  const model::ModelParameters& params() const { return params_; }
  const Rk4Options& rk4() const { return rk4_; }
  Layout layout() const { return {setup_->N}; }
  int steps() const { return steps_; }
  double stiffness() const { return stiffness_; }

  Eigen::VectorXd nodal(const Eigen::VectorXd& coefficients) const { return P0_ * coefficients; }
  Eigen::VectorXd from_nodal(const Eigen::VectorXd& values) const { return P0_lu_.solve(values); }
  Eigen::MatrixXd solve_mass(const Eigen::MatrixXd& values) const { return P0_lu_.solve(values); }
  const Eigen::MatrixXd& P1() const { return P1_; }
  const Eigen::MatrixXd& P2() const { return P2_; }
  const Eigen::RowVectorXd& left_row() const { return left_; }

 private:
  const spectral::CollocationSetup* setup_;
  model::ModelParameters params_;
  Rk4Options rk4_;
  Eigen::MatrixXd P0_, P1_, P2_;
  Eigen::PartialPivLU<Eigen::MatrixXd> P0_lu_;
  Eigen::RowVectorXd left_;  // p_j(-1)
  double stiffness_ = 0.0;
  int steps_ = 0;
};

/// Time derivative of the packed state for a given control value.
Eigen::VectorXd ode_rhs(double t, const Eigen::VectorXd& y, double phi, const Context& ctx);

/// xi(-1, t) for the packed state.
double switching_value(double t, const Eigen::VectorXd& y, const Context& ctx);

/// Bang-bang law: Kbound for xi < 0, 0 for xi > 0, previous value on a tie.
double bang_bang(double xi, double previous, double Kbound);

struct ControlledRun {
  Trajectory trajectory;
  std::vector<double> phi;  // control held over step k, sampled at grid point k
  std::vector<bool> tie;    // xi was exactly zero at that sample
  int steps = 0;
};

/// Integrates the packed system from y0 with the bang-bang control recovered
/// at the start of each step. Retries once with half the step on failure.
ControlledRun integrate(const Eigen::VectorXd& y0, const Context& ctx);

/// Initial packed state for shooting vector s (3N + 1 entries: nodal P_L,
/// P_H, P_F at t = -1, then P_R(-1)).
Eigen::VectorXd initial_state(const Eigen::VectorXd& s, const Context& ctx);

/// [P0 beta_PL(1) | P0 beta_PH(1) | P0 beta_PF(1) | P_R(1)]; entries equal
/// ShootingOptions::sentinel when the integration fails.
Eigen::VectorXd shooting_residual(const Eigen::VectorXd& s, const Context& ctx,
                                  double sentinel = 1e10);

struct AdjointSolution {
  std::vector<double> time_grid;
  std::vector<Eigen::VectorXd> alpha_L, alpha_H, alpha_F;
  std::vector<Eigen::VectorXd> beta_PL, beta_PH, beta_PF;
  std::vector<double> R, P_R;
  std::vector<double> phi;
  std::vector<bool> tie;
  std::vector<double> switching_times;
  Eigen::VectorXd s;
  double residual = 0.0;
  int newton_iterations = 0;
  bool converged = false;
  int steps = 0;
};

AdjointSolution solve_indirect(const spectral::CollocationSetup& setup,
                               const model::ModelParameters& params,
                               const ShootingOptions& options = {},
                               const Rk4Options& rk4 = {});

/// Field value at (rho, t); coefficients between grid points by cubic
/// Lagrange interpolation in t.
double evaluate_field(const AdjointSolution& s, direct::Field f, double rho, double t,
                      const spectral::CollocationSetup& setup);
double evaluate_radius(const AdjointSolution& s, double t);
/// Control value in force at t (grid sample at or before t).
double control_at(const AdjointSolution& s, double t);

}  // namespace athero::indirect
