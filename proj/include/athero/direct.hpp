#pragma once

// Discretize-then-optimize: fixed-point linearization of the transformed
// state system, space-time collocation of each linear problem, and the
// control-to-objective map handed to the SQP driver.

#include "athero/model.hpp"
#include "athero/nlp.hpp"
#include "athero/spectral.hpp"

#include <Eigen/Dense>

#include <vector>

namespace athero::direct {

/// Piecewise-constant control on the uniform partition t_i = -1 + 2i/M.
/// Segment i covers [t_i, t_{i+1}); the last segment is closed at t = 1.
struct ControlVector {
  std::vector<double> segments;
  double Kbound = 1.0;

  static ControlVector constant(int M, double value, double Kbound);

  int size() const { return static_cast<int>(segments.size()); }
  int segment_index(double t) const;
  double value_at(double t) const;
  double segment_start(int i) const;
  double segment_end(int i) const;
  /// Throws InvalidInput if any segment leaves [0, Kbound].
  void validate() const;
};

enum class Field { L, H, F };

/// Coefficients of one fixed-point solution. C(j, k) multiplies
/// p_j(rho) q_k(t); nodal arrays are indexed (space node, time node).
struct StateSolution {
  Eigen::MatrixXd CL, CH, CF;
  Eigen::VectorXd CR;
  Eigen::MatrixXd v;         // velocity at the collocation nodes
  Eigen::VectorXd v_inner;   // v(-1, t_b)
  std::vector<double> residual_history;
  double linear_residual = 0.0;  // sup-norm of A x - b over the last linear solves
  int iterations = 0;
  bool converged = false;

  const Eigen::MatrixXd& coefficients(Field f) const;
};

double evaluate_field(const StateSolution& s, Field f, double rho, double t,
                      const spectral::CollocationSetup& setup);
/// Shifted radius R(t) (R_hat = R + epsilon).
double evaluate_radius(const StateSolution& s, double t, const spectral::CollocationSetup& setup);
/// Nodal values P0 C Q0^T.
Eigen::MatrixXd nodal_values(const Eigen::MatrixXd& C, const spectral::CollocationSetup& setup);

/// Kronecker product with row index a * rows(B) + b.
Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// (2/T)(P0 x Q1) - diag(G1)(P2 x Q0) + diag(G2)(P1 x Q0), with G1, G2 the
/// diffusion and drift coefficients sampled at node pair (a, b) -> a * M + b.
Eigen::MatrixXd assemble_operator(const Eigen::VectorXd& G1, const Eigen::VectorXd& G2,
                                  const spectral::CollocationSetup& setup, double T);

/// Same operator with coefficients sampled from the frozen iterate.
Eigen::MatrixXd assemble_operator(Field kind, const StateSolution& previous,
                                  const spectral::CollocationSetup& setup,
                                  const model::ModelParameters& params);

struct FixedPointOptions {
  double tol = 1e-8;
  int max_iter = 50;
  // Treat the own-field dependence of each right-hand side implicitly
  // (diagonal linearization at the frozen iterate). Fixed points are
  // unchanged; disabling it gives the plain lagged scheme.
  bool implicit_reaction = true;
};

/// Runs the fixed-point sequence from the zero state. Throws NonConvergence
/// when max_iter is reached with delta >= tol.
StateSolution fixed_point_solve(const ControlVector& control,
                                const spectral::CollocationSetup& setup,
                                const model::ModelParameters& params,
                                const FixedPointOptions& options = {});

/// 1 - R(1) - epsilon.
double objective(const ControlVector& control, const spectral::CollocationSetup& setup,
                 const model::ModelParameters& params, const FixedPointOptions& options = {});

struct DirectSolution {
  ControlVector control;
  StateSolution state;
  double objective = 0.0;
  nlp::NlpResult nlp;
};

DirectSolution solve_direct(const spectral::CollocationSetup& setup,
                            const model::ModelParameters& params,
                            const nlp::NlpOptions& nlp_options = {},
                            const FixedPointOptions& fp_options = {});

/// Indices of segments sitting on either bound to within tol * Kbound.
std::vector<int> active_bound_segments(const ControlVector& c, double tol = 1e-8);

}  // namespace athero::direct
