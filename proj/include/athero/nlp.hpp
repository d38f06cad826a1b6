#pragma once

// Box-constrained SQP with finite-difference gradients and a damped BFGS
// Hessian model.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace athero::nlp {

struct NlpOptions {
  double fd_step = 1e-5;  // scaled by the bound width of each coordinate
  double tol = 1e-6;      // projected-gradient tolerance on the scaled objective
  int max_iter = 100;
  double armijo_c = 1e-4;
  int max_backtracks = 40;
  double damping = 0.2;   // Powell damping threshold
  bool concurrent_gradient = false;  // oracle must be safe to call from threads
};

struct NlpProblem {
  int dimension = 0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::function<double(const Eigen::VectorXd&)> objective;
  NlpOptions options;

  /// Throws InvalidInput if the box or options are malformed.
  void validate() const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

Eigen::VectorXd fd_gradient(const NlpProblem& problem, const Eigen::VectorXd& x);

struct QpResult {
  Eigen::VectorXd step;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Minimizes 0.5 d'Hd + g'd subject to lo <= d <= hi by a primal active-set
/// iteration. H must be symmetric positive definite; lo <= 0 <= hi.
QpResult qp_subproblem(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                       const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                       int max_iter = 0);

struct TracePoint {
  Eigen::VectorXd x;
  double f;
};

struct NlpResult {
  Eigen::VectorXd x;
  double f = 0.0;
  std::vector<TracePoint> trace;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double projected_gradient = 0.0;
  std::string message;
  Eigen::MatrixXd hessian;  // final BFGS model (scaled objective)
};

NlpResult sqp_minimize(const NlpProblem& problem, const Eigen::VectorXd& x0);

}  // namespace athero::nlp
