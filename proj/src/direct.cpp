#include "athero/direct.hpp"

#include "athero/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace athero::direct {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ControlVector ControlVector::constant(int M, double value, double Kbound) {
  if (M < 1) throw InvalidInput("ControlVector: need at least one segment");
  ControlVector c;
  c.segments.assign(M, value);
  c.Kbound = Kbound;
  c.validate();
  return c;
}

double ControlVector::segment_start(int i) const { return -1.0 + 2.0 * i / size(); }
double ControlVector::segment_end(int i) const { return -1.0 + 2.0 * (i + 1) / size(); }

int ControlVector::segment_index(double t) const {
  const int M = size();
  if (M == 0) throw InvalidInput("ControlVector: no segments");
  if (!(t >= -1.0 - 1e-12 && t <= 1.0 + 1e-12))
    throw InvalidInput("ControlVector: time " + std::to_string(t) + " outside [-1, 1]");
  int i = static_cast<int>(std::floor((t + 1.0) * M / 2.0));
  i = std::clamp(i, 0, M - 1);
  // Repair rounding near the breakpoints so that [t_i, t_{i+1}) is exact.
  if (i + 1 < M && t >= segment_start(i + 1)) ++i;
  if (i > 0 && t < segment_start(i)) --i;
  return i;
}

double ControlVector::value_at(double t) const { return segments[segment_index(t)]; }

void ControlVector::validate() const {
  if (segments.empty()) throw InvalidInput("ControlVector: no segments");
  if (!(Kbound >= 0)) throw InvalidInput("ControlVector: Kbound must be >= 0");
  for (int i = 0; i < size(); ++i) {
    const double c = segments[i];
    if (!(c >= 0.0 && c <= Kbound))
      throw InvalidInput("ControlVector: segment " + std::to_string(i) + " value " +
                         std::to_string(c) + " outside [0, Kbound]");
  }
}

std::vector<int> active_bound_segments(const ControlVector& c, double tol) {
  std::vector<int> out;
  const double scale = std::max(c.Kbound, 1e-300);
  for (int i = 0; i < c.size(); ++i) {
    const double x = c.segments[i];
    if (x <= tol * scale || x >= c.Kbound - tol * scale) out.push_back(i);
  }
  return out;
}

const MatrixXd& StateSolution::coefficients(Field f) const {
  switch (f) {
    case Field::L: return CL;
    case Field::H: return CH;
    case Field::F: return CF;
  }
  throw InvalidInput("StateSolution: unknown field");
}

double evaluate_field(const StateSolution& s, Field f, double rho, double t,
                      const spectral::CollocationSetup& setup) {
  const MatrixXd& C = s.coefficients(f);
  VectorXd ps(setup.N), qt(setup.M);
  for (int j = 0; j < setup.N; ++j) ps(j) = setup.space_basis.eval(j, rho);
  for (int k = 0; k < setup.M; ++k) qt(k) = setup.time_basis.eval(k, t);
  return ps.dot(C * qt);
}

double evaluate_radius(const StateSolution& s, double t, const spectral::CollocationSetup& setup) {
  double r = 0.0;
  for (int k = 0; k < setup.M; ++k) r += s.CR(k) * setup.time_basis.eval(k, t);
  return r;
}

MatrixXd nodal_values(const MatrixXd& C, const spectral::CollocationSetup& setup) {
  return setup.space_eval(0) * C * setup.time_eval(0).transpose();
}

MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

MatrixXd assemble_operator(const VectorXd& G1, const VectorXd& G2,
                           const spectral::CollocationSetup& setup, double T) {
  const int n = setup.N * setup.M;
  if (G1.size() != n || G2.size() != n)
    throw InvalidInput("assemble_operator: coefficient vectors must have N*M entries");
  const MatrixXd Q0 = setup.time_eval(0);
  MatrixXd A = (2.0 / T) * kron(setup.space_eval(0), setup.time_eval(1));
  A -= G1.asDiagonal() * kron(setup.space_eval(2), Q0);
  A += G2.asDiagonal() * kron(setup.space_eval(1), Q0);
  return A;
}

namespace {

struct Frozen {
  MatrixXd L, H, F;  // nodal values (space node, time node)
  VectorXd R;        // R at time nodes
};

Frozen freeze(const StateSolution& s, const spectral::CollocationSetup& setup) {
  return {nodal_values(s.CL, setup), nodal_values(s.CH, setup), nodal_values(s.CF, setup),
          setup.time_eval(0) * s.CR};
}

void coefficient_samples(Field kind, const StateSolution& s, const Frozen& fz,
                         const spectral::CollocationSetup& setup,
                         const model::ModelParameters& p, VectorXd& G1, VectorXd& G2) {
  const int N = setup.N, M = setup.M;
  G1.resize(N * M);
  G2.resize(N * M);
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < M; ++b) {
      model::CoeffArgs ca{setup.space_nodes[a], fz.R(b), s.v_inner(b), s.v(a, b)};
      const int row = a * M + b;
      if (kind == Field::F) {
        G1(row) = model::coeff(model::Coeff::g31, ca, p);
        G2(row) = model::coeff(model::Coeff::g32, ca, p);
      } else {
        G1(row) = model::coeff(model::Coeff::g11, ca, p);
        G2(row) = model::coeff(model::Coeff::g12, ca, p);
      }
    }
  }
}

// Velocity at every node pair for the fields and radius held in s.
void attach_velocity(StateSolution& s, const spectral::CollocationSetup& setup,
                     const model::ModelParameters& p) {
  const Frozen fz = freeze(s, setup);
  s.v.resize(setup.N, setup.M);
  s.v_inner.resize(setup.M);
  for (int b = 0; b < setup.M; ++b) {
    const VectorXd L = fz.L.col(b), H = fz.H.col(b), F = fz.F.col(b);
    const auto vr = model::velocity_solve(fz.R(b), setup.time_nodes[b], {L.data(), size_t(L.size())},
                                          {H.data(), size_t(H.size())},
                                          {F.data(), size_t(F.size())}, p, setup);
    s.v.col(b) = vr.values;
    s.v_inner(b) = vr.v_inner;
  }
}

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  return a.size() == 0 ? 0.0 : (a - b).lpNorm<Eigen::Infinity>();
}

}  // namespace

MatrixXd assemble_operator(Field kind, const StateSolution& previous,
                           const spectral::CollocationSetup& setup,
                           const model::ModelParameters& params) {
  VectorXd G1, G2;
  coefficient_samples(kind, previous, freeze(previous, setup), setup, params, G1, G2);
  return assemble_operator(G1, G2, setup, params.T);
}

StateSolution fixed_point_solve(const ControlVector& control,
                                const spectral::CollocationSetup& setup,
                                const model::ModelParameters& params,
                                const FixedPointOptions& options) {
  params.validate();
  control.validate();
  if (!(options.tol > 0)) throw InvalidInput("fixed_point_solve: tol must be > 0");
  if (options.max_iter < 1) throw InvalidInput("fixed_point_solve: maxIter must be >= 1");
  const int N = setup.N, M = setup.M;

  const MatrixXd K00 = kron(setup.space_eval(0), setup.time_eval(0));
  const Eigen::PartialPivLU<MatrixXd> radius_lu(setup.time_eval(1));

  std::vector<double> phi(M);
  for (int b = 0; b < M; ++b) phi[b] = control.value_at(setup.time_nodes[b]);

  StateSolution cur;
  cur.CL = MatrixXd::Zero(N, M);
  cur.CH = MatrixXd::Zero(N, M);
  cur.CF = MatrixXd::Zero(N, M);
  cur.CR = VectorXd::Zero(M);
  attach_velocity(cur, setup, params);

  const model::Rhs kinds[3] = {model::Rhs::fL, model::Rhs::fH, model::Rhs::fF};
  const Field fields[3] = {Field::L, Field::H, Field::F};

  for (int it = 1; it <= options.max_iter; ++it) {
    const Frozen fz = freeze(cur, setup);
    StateSolution next;
    double lin_res = 0.0;

    for (int f = 0; f < 3; ++f) {
      VectorXd G1, G2;
      coefficient_samples(fields[f], cur, fz, setup, params, G1, G2);
      MatrixXd A = assemble_operator(G1, G2, setup, params.T);
      VectorXd rhs(N * M), diag = VectorXd::Zero(N * M), u(N * M);

      for (int a = 0; a < N; ++a) {
        for (int b = 0; b < M; ++b) {
          const int row = a * M + b;
          const double rho = setup.space_nodes[a], t = setup.time_nodes[b];
          model::Fields pt{fz.L(a, b), fz.H(a, b), fz.F(a, b), cur.v(a, b)};
          double& own = f == 0 ? pt.L : f == 1 ? pt.H : pt.F;
          u(row) = own;
          auto eval = [&](const model::Fields& x) {
            return model::rhs(kinds[f], rho, t, fz.R(b), cur.v_inner(b), x, phi[b], params);
          };
          rhs(row) = eval(pt);
          if (options.implicit_reaction) {
            const double base = own;
            const double h = 1e-7 * std::max(std::abs(base), 1e-5);
            own = base + h;
            const double up = eval(pt);
            own = base - h;
            const double dn = eval(pt);
            own = base;
            diag(row) = (up - dn) / (2.0 * h);
          }
        }
      }
      if (options.implicit_reaction) {
        A -= diag.asDiagonal() * K00;
        rhs -= diag.cwiseProduct(u);
      }

      const Eigen::PartialPivLU<MatrixXd> lu(A);
      const double rc = lu.rcond();
      if (!(rc > 1e-14))
        throw SingularSystem("fixed_point_solve: collocation operator singular", rc);
      const VectorXd x = lu.solve(rhs);
      if (!x.allFinite()) throw SingularSystem("fixed_point_solve: non-finite linear solution", rc);
      lin_res = std::max(lin_res, (A * x - rhs).lpNorm<Eigen::Infinity>());

      // Unknown j * M + k -> C(j, k).
      const MatrixXd C = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                        Eigen::RowMajor>>(x.data(), N, M);
      (f == 0 ? next.CL : f == 1 ? next.CH : next.CF) = C;
    }

    // (2/T) R_t = v(-1, t) of the frozen iterate.
    next.CR = 0.5 * params.T * radius_lu.solve(cur.v_inner);

    const double delta = std::max({max_abs_diff(next.CL, cur.CL), max_abs_diff(next.CH, cur.CH),
                                   max_abs_diff(next.CF, cur.CF), max_abs_diff(next.CR, cur.CR)});
    next.residual_history = std::move(cur.residual_history);
    next.residual_history.push_back(delta);
    next.linear_residual = lin_res;
    next.iterations = it;
    attach_velocity(next, setup, params);
    cur = std::move(next);

    if (!std::isfinite(delta))
      throw NonConvergence("fixed_point_solve: iterate became non-finite", it, delta);
    if (delta < options.tol) {
      cur.converged = true;
      return cur;
    }
  }
  throw NonConvergence("fixed_point_solve: no convergence within maxIter", options.max_iter,
                       cur.residual_history.back());
}

double objective(const ControlVector& control, const spectral::CollocationSetup& setup,
                 const model::ModelParameters& params, const FixedPointOptions& options) {
  const StateSolution s = fixed_point_solve(control, setup, params, options);
  return 1.0 - evaluate_radius(s, 1.0, setup) - params.epsilon;
}

DirectSolution solve_direct(const spectral::CollocationSetup& setup,
                            const model::ModelParameters& params,
                            const nlp::NlpOptions& nlp_options,
                            const FixedPointOptions& fp_options) {
  params.validate();
  const int M = setup.M;
  nlp::NlpProblem pb;
  pb.dimension = M;
  pb.lower = VectorXd::Zero(M);
  pb.upper = VectorXd::Constant(M, params.Kbound);
  pb.options = nlp_options;
  auto to_control = [&](const VectorXd& x) {
    ControlVector c;
    c.Kbound = params.Kbound;
    c.segments.assign(x.data(), x.data() + x.size());
    return c;
  };
  pb.objective = [&](const VectorXd& x) {
    return objective(to_control(x), setup, params, fp_options);
  };

  DirectSolution out;
  out.nlp = nlp::sqp_minimize(pb, VectorXd::Zero(M));
  out.control = to_control(out.nlp.x);
  out.state = fixed_point_solve(out.control, setup, params, fp_options);
  out.objective = 1.0 - evaluate_radius(out.state, 1.0, setup) - params.epsilon;
  return out;
}

}  // namespace athero::direct
