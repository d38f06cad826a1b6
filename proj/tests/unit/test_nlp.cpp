#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "athero/errors.hpp"
#include "athero/nlp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

using namespace athero;
using namespace athero::nlp;
using Eigen::VectorXd;

namespace {

const double inf = std::numeric_limits<double>::infinity();

NlpProblem box(int n, double lo, double hi, std::function<double(const VectorXd&)> f) {
  NlpProblem p;
  p.dimension = n;
  p.lower = VectorXd::Constant(n, lo);
  p.upper = VectorXd::Constant(n, hi);
  p.objective = std::move(f);
  return p;
}

double rosenbrock(const VectorXd& x) {
  return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
}

void check_trace(const NlpProblem& pb, const NlpResult& r) {
  for (size_t k = 0; k < r.trace.size(); ++k) {
    const auto& x = r.trace[k].x;
    CHECK((x - pb.lower).minCoeff() >= -1e-14);
    CHECK((pb.upper - x).minCoeff() >= -1e-14);
    if (k > 0) CHECK(r.trace[k].f < r.trace[k - 1].f);
  }
}

}  // namespace

TEST_CASE("finite-difference gradients") {
  auto sq = box(1, -inf, inf, [](const VectorXd& x) { return x(0) * x(0); });
  CHECK(std::abs(fd_gradient(sq, VectorXd::Constant(1, 0.5))(0) - 1.0) < 1e-8);

  auto flat = box(3, 0, 1, [](const VectorXd&) { return 4.2; });
  CHECK(fd_gradient(flat, VectorXd::Constant(3, 0.5)).isZero(0.0));
  CHECK(fd_gradient(flat, VectorXd::Zero(3)).isZero(0.0));

  auto sum = box(3, 0, 1, [](const VectorXd& x) { return x.sum(); });
  const VectorXd g_hi = fd_gradient(sum, VectorXd::Ones(3));
  const VectorXd g_lo = fd_gradient(sum, VectorXd::Zero(3));
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(g_hi(i) - 1.0) < 1e-6);
    CHECK(std::abs(g_lo(i) - 1.0) < 1e-6);
  }

  // Quadratic fixture against its analytic gradient.
  Eigen::MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, -1, 0, -1, 2;
  const VectorXd b(VectorXd::LinSpaced(3, -1, 1));
  auto quad = box(3, -2, 2, [&](const VectorXd& x) { return 0.5 * x.dot(A * x) + b.dot(x); });
  for (const VectorXd& x : {VectorXd(VectorXd::Constant(3, 0.3)), VectorXd(VectorXd::LinSpaced(3, -2, 2))}) {
    const VectorXd exact = A * x + b;
    const VectorXd g = fd_gradient(quad, x);
    CHECK((g - exact).lpNorm<Eigen::Infinity>() <= 1e-6 * exact.lpNorm<Eigen::Infinity>());
  }

  auto conc = sum;
  conc.options.concurrent_gradient = true;
  CHECK(fd_gradient(conc, VectorXd::Constant(3, 0.4)) == fd_gradient(sum, VectorXd::Constant(3, 0.4)));
}

TEST_CASE("problem validation") {
  auto p = box(2, 0, 1, [](const VectorXd& x) { return x.sum(); });
  p.lower(1) = 2.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = box(2, 0, 1, [](const VectorXd& x) { return x.sum(); });
  p.options.fd_step = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = box(2, 0, 1, {});
  CHECK_THROWS_AS(p.validate(), InvalidInput);
}

TEST_CASE("box QP subproblem") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  auto r1 = qp_subproblem(I, VectorXd{{-1.0, 0.0}}, VectorXd::Constant(2, -10), VectorXd::Constant(2, 10));
  CHECK((r1.step - VectorXd{{1.0, 0.0}}).norm() < 1e-14);
  CHECK(r1.kkt_residual < 1e-10);

  auto r2 = qp_subproblem(Eigen::MatrixXd::Identity(1, 1), VectorXd::Constant(1, -3.0),
                          VectorXd::Constant(1, -5), VectorXd::Constant(1, 1));
  CHECK(r2.step(0) == doctest::Approx(1.0));

  Eigen::MatrixXd H(2, 2);
  H << 1, 0, 0, 4;
  auto r3 = qp_subproblem(H, VectorXd{{-1.0, -4.0}}, VectorXd::Constant(2, -10), VectorXd{{0.5, 2.0}});
  CHECK(r3.step(0) == doctest::Approx(0.5));
  CHECK(r3.step(1) == doctest::Approx(1.0));
  CHECK(r3.kkt_residual < 1e-10);

  // Coupled Hessian where the active set must be revised.
  Eigen::MatrixXd C(3, 3);
  C << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  const VectorXd g{{-4.0, 1.0, -4.0}};
  auto r4 = qp_subproblem(C, g, VectorXd::Constant(3, -1), VectorXd::Constant(3, 1));
  CHECK(r4.kkt_residual < 1e-10);
  // Brute-force check of the optimality: no feasible coordinate move improves.
  auto q = [&](const VectorXd& d) { return 0.5 * d.dot(C * d) + g.dot(d); };
  for (int i = 0; i < 3; ++i)
    for (double e : {-1e-4, 1e-4}) {
      VectorXd d = r4.step;
      d(i) = std::clamp(d(i) + e, -1.0, 1.0);
      CHECK(q(d) >= q(r4.step) - 1e-14);
    }

  CHECK_THROWS_AS(qp_subproblem(C, g, VectorXd::Constant(3, -1), VectorXd::Constant(3, 1), 1),
                  NonConvergence);
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(qp_subproblem(neg, VectorXd::Ones(2), VectorXd::Constant(2, -1), VectorXd::Ones(2)),
                  InvalidInput);
}

TEST_CASE("SQP on scalar quadratics") {
  auto interior = box(1, 0, 1, [](const VectorXd& x) { return std::pow(x(0) - 0.3, 2); });
  auto r = sqp_minimize(interior, VectorXd::Zero(1));
  CHECK(r.converged);
  CHECK(std::abs(r.x(0) - 0.3) < 1e-6);
  check_trace(interior, r);

  auto bound = box(1, 0, 1, [](const VectorXd& x) { return std::pow(x(0) - 2.0, 2); });
  auto b = sqp_minimize(bound, VectorXd::Zero(1));
  CHECK(b.converged);
  CHECK(b.x(0) == 1.0);
  check_trace(bound, b);
}

TEST_CASE("SQP on Rosenbrock in a box") {
  auto pb = box(2, 0, 2, rosenbrock);
  auto r = sqp_minimize(pb, VectorXd::Zero(2));
  CHECK(r.f < 1e-6);
  CHECK(r.trace.size() > 2);
  check_trace(pb, r);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (r.hessian + r.hessian.transpose()));
  CHECK(es.eigenvalues().minCoeff() > 0);
}

TEST_CASE("SQP contracts") {
  auto pb = box(2, 0, 2, rosenbrock);
  pb.options.max_iter = 0;
  const VectorXd x0{{0.4, 1.5}};
  auto r = sqp_minimize(pb, x0);
  CHECK(r.x == x0);
  CHECK(r.trace.size() == 1);

  // Infeasible starts are projected.
  pb.options.max_iter = 100;
  auto p = sqp_minimize(pb, VectorXd{{-3.0, 5.0}});
  CHECK(p.trace.front().x == VectorXd{{0.0, 2.0}});

  auto flat = box(4, 0, 1, [](const VectorXd&) { return 1.0; });
  NlpResult f;
  CHECK_NOTHROW(f = sqp_minimize(flat, VectorXd::Constant(4, 0.5)));
  CHECK(f.converged);
  CHECK(f.x == VectorXd::Constant(4, 0.5));

  CHECK_THROWS_AS(sqp_minimize(pb, VectorXd::Zero(3)), InvalidInput);
}

TEST_CASE("SQP identifies active bounds of a separable problem") {
  // Minimizer (-1, 0.5, 3) clipped to [0, 1]^3 -> (0, 0.5, 1).
  auto pb = box(3, 0, 1, [](const VectorXd& x) {
    return std::pow(x(0) + 1, 2) + 2 * std::pow(x(1) - 0.5, 2) + 0.5 * std::pow(x(2) - 3, 2);
  });
  auto r = sqp_minimize(pb, VectorXd::Constant(3, 0.5));
  CHECK(r.converged);
  CHECK(r.x(0) == 0.0);
  CHECK(std::abs(r.x(1) - 0.5) < 1e-6);
  CHECK(r.x(2) == 1.0);
  check_trace(pb, r);
}
