#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "athero/errors.hpp"
#include "athero/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>

using namespace athero;
using namespace athero::spectral;

namespace {

// Legendre polynomials written out by hand.
double legendre_closed(int n, double x) {
  switch (n) {
    case 0: return 1.0;
    case 1: return x;
    case 2: return 0.5 * (3 * x * x - 1);
    case 3: return 0.5 * (5 * x * x * x - 3 * x);
    case 4: return (35 * std::pow(x, 4) - 30 * x * x + 3) / 8.0;
    case 5: return (63 * std::pow(x, 5) - 70 * std::pow(x, 3) + 15 * x) / 8.0;
  }
  return NAN;
}

// Golub-Welsch: Gauss-Legendre nodes as eigenvalues of the Jacobi matrix.
std::vector<double> golub_welsch(int count) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(count, count);
  for (int k = 1; k < count; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + count);
  std::sort(out.begin(), out.end());
  return out;
}

// Sign changes on a fine grid refined by bisection.
std::vector<double> bracket_roots(const std::function<double(double)>& f, double a, double b,
                                  int samples) {
  std::vector<double> roots;
  double x0 = a, f0 = f(a);
  for (int i = 1; i <= samples; ++i) {
    const double x1 = a + (b - a) * i / samples;
    const double f1 = f(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if (f0 * f1 < 0) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  if (f0 == 0.0) roots.push_back(x0);
  return roots;
}

// Five-point central differences.
double fd1(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}
double fd2(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

// One Richardson step on top of the 5-point rules (error O(h^6)).
double rich1(const std::function<double(double)>& f, double x, double h) {
  return (16 * fd1(f, x, h / 2) - fd1(f, x, h)) / 15;
}
double rich2(const std::function<double(double)>& f, double x, double h) {
  return (16 * fd2(f, x, h / 2) - fd2(f, x, h)) / 15;
}

}  // namespace

TEST_CASE("jacobi_eval reproduces closed-form Legendre values") {
  CHECK(jacobi_eval(0, 0, 0, 0.37) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(jacobi_eval(1, 0, 0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(jacobi_eval(2, 0, 0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(jacobi_eval(2, 0, 0, 0.2, 1) == doctest::Approx(0.6).epsilon(1e-14));
  for (int n = 0; n <= 5; ++n)
    for (double x : {-1.0, -0.71, -0.2, 0.0, 0.33, 0.9, 1.0})
      CHECK(std::abs(jacobi_eval(n, 0, 0, x) - legendre_closed(n, x)) < 1e-14);
}

TEST_CASE("jacobi_eval derivatives agree with finite differences for general exponents") {
  for (double a : {0.0, 0.5, 1.5})
    for (double b : {0.0, -0.5, 2.0})
      for (int n : {1, 3, 6})
        for (double x : {-0.6, 0.1, 0.8}) {
          auto f = [&](double y) { return jacobi_eval(n, a, b, y); };
          CHECK(std::abs(jacobi_eval(n, a, b, x, 1) - fd1(f, x, 1e-3)) < 1e-7);
          CHECK(std::abs(jacobi_eval(n, a, b, x, 2) - fd2(f, x, 1e-3)) < 1e-5);
        }
}

TEST_CASE("jacobi_eval J_n(1) matches the binomial value") {
  // J_n^{a,b}(1) = Gamma(n+a+1) / (Gamma(n+1) Gamma(a+1))
  for (double a : {0.0, 0.5, 2.0})
    for (int n = 0; n < 8; ++n) {
      const double expect = std::exp(std::lgamma(n + a + 1) - std::lgamma(n + 1) - std::lgamma(a + 1));
      CHECK(jacobi_eval(n, a, 0.3, 1.0) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("jacobi_eval rejects invalid input") {
  CHECK_THROWS_AS(jacobi_eval(-1, 0, 0, 0.0), InvalidInput);
  CHECK_THROWS_AS(jacobi_eval(2, 0, 0, 1.5), InvalidInput);
  CHECK_THROWS_AS(jacobi_eval(2, 0, 0, -1.0001), InvalidInput);
  CHECK_THROWS_AS(jacobi_eval(2, -1.0, 0, 0.0), InvalidInput);
}

TEST_CASE("Gauss nodes match the Golub-Welsch eigenvalues") {
  CHECK(legendre_gauss_nodes(0) == std::vector<double>{0.0});
  const auto n1 = legendre_gauss_nodes(1);
  REQUIRE(n1.size() == 2);
  CHECK(n1[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(n1[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  const auto n4 = legendre_gauss_nodes(4);
  CHECK(n4[2] == 0.0);
  for (int i = 0; i < 5; ++i) CHECK(n4[i] == -n4[4 - i]);

  for (int N = 0; N <= 20; ++N) {
    const auto nodes = legendre_gauss_nodes(N);
    const auto oracle = golub_welsch(N + 1);
    REQUIRE(nodes.size() == size_t(N + 1));
    for (int i = 0; i <= N; ++i) {
      CHECK(std::abs(nodes[i] - oracle[i]) < 1e-13);
      CHECK(std::abs(jacobi_eval(N + 1, 0, 0, nodes[i])) < 1e-12);
      CHECK(nodes[i] > -1.0);
      CHECK(nodes[i] < 1.0);
      if (i > 0) CHECK(nodes[i] > nodes[i - 1]);
    }
  }
}

TEST_CASE("Radau nodes are negated zeros of J_M + J_{M+1}") {
  CHECK(legendre_gauss_radau_nodes(0) == std::vector<double>{1.0});
  const auto r1 = legendre_gauss_radau_nodes(1);
  REQUIRE(r1.size() == 2);
  CHECK(r1[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(r1[1] == 1.0);

  for (int M = 1; M <= 20; ++M) {
    const auto nodes = legendre_gauss_radau_nodes(M);
    REQUIRE(nodes.size() == size_t(M + 1));
    CHECK(nodes.back() == 1.0);
    auto g = [&](double x) { return jacobi_eval(M, 0, 0, x) + jacobi_eval(M + 1, 0, 0, x); };
    // Oracle: every sign change of g in (-1, 1) plus the known root at -1.
    auto roots = bracket_roots(g, -1.0 + 1e-9, 1.0, 20000);
    roots.push_back(-1.0);
    std::vector<double> expect;
    for (double r : roots) expect.push_back(-r);
    std::sort(expect.begin(), expect.end());
    REQUIRE(expect.size() == nodes.size());
    for (int i = 0; i <= M; ++i) {
      CHECK(std::abs(nodes[i] - expect[i]) < 1e-12);
      CHECK(std::abs(g(-nodes[i])) < 1e-12);
      CHECK(nodes[i] > -1.0);
      if (i > 0) CHECK(nodes[i] > nodes[i - 1]);
    }
  }
}

TEST_CASE("basis functions embed the boundary and initial conditions") {
  const auto b = build_bases(20, 20);
  CHECK(b.space.size() == 20);
  CHECK(b.time.size() == 20);
  for (double x : {-1.0, -0.3, 0.0, 0.8, 1.0}) CHECK(b.space.eval(0, x) == doctest::Approx(1.0));
  CHECK(std::abs(b.space.eval(1, 1.0, 1)) < 1e-15);
  // p_2 = x - (5x^3 - 3x)/12
  for (double x : {-0.9, 0.25, 0.6})
    CHECK(b.space.eval(1, x) == doctest::Approx(x - (5 * x * x * x - 3 * x) / 12.0).epsilon(1e-14));
  CHECK(b.time.eval(0, -1.0) == 0.0);
  CHECK(b.time.eval(0, 0.4) == doctest::Approx(1.4));
  for (int j = 0; j < 20; ++j) {
    CHECK(std::abs(b.space.eval(j, -1.0, 1)) < 1e-12);
    CHECK(std::abs(b.space.eval(j, 1.0, 1)) < 1e-12);
    CHECK(std::abs(b.time.eval(j, -1.0)) < 1e-12);
  }
  CHECK_THROWS_AS(build_bases(0, 3), InvalidInput);
  CHECK_THROWS_AS(build_bases(3, 0), InvalidInput);
}

TEST_CASE("collocation matrices are nonsingular on their node sets") {
  for (int n : {1, 2, 4, 8, 16}) {
    const auto s = build_setup(n, n);
    const Eigen::FullPivLU<Eigen::MatrixXd> sp(s.D0rho), tm(s.D0t);
    CHECK(sp.rank() == n);
    CHECK(tm.rank() == n);
  }
}

TEST_CASE("differentiation matrices match finite differences") {
  for (int n : {1, 2, 4, 6, 8, 12, 16}) {
    const auto s = build_setup(n, n);
    REQUIRE(s.D0rho.rows() == n);
    REQUIRE(s.D0rho.cols() == n);
    REQUIRE(s.D0t.rows() == n);
    for (int j = 0; j < n; ++j) {
      auto p = [&](double x) { return s.space_basis.eval(j, x); };
      auto q = [&](double x) { return s.time_basis.eval(j, x); };
      for (int k = 0; k < n; ++k) {
        const double x = s.space_nodes[k];
        // Keep the stencil inside [-1, 1] where the polynomials are defined.
        const double h = std::min(2e-3, (1.0 - std::abs(x)) / 2.5);
        CHECK(std::abs(s.D0rho(j, k) - p(x)) < 1e-14);
        CHECK(std::abs(s.D1rho(j, k) - rich1(p, x, h)) < 1e-7);
        CHECK(std::abs(s.D2rho(j, k) - rich2(p, x, h)) < 1e-7 * std::max(1.0, std::abs(s.D2rho(j, k))));
        const double t = s.time_nodes[k];
        CHECK(std::abs(s.D0t(j, k) - q(t)) < 1e-14);
        // No central stencil fits at t = 1; use J'_n(1) = n(n+1)/2, so q_j'(1) = j^2.
        const double d1 = t < 1.0 ? rich1(q, t, std::min(2e-3, (1.0 - t) / 2.5))
                                  : double((j + 1) * (j + 1));
        CHECK(std::abs(s.D1t(j, k) - d1) < 1e-7 * std::max(1.0, std::abs(d1)));
      }
    }
  }
}

TEST_CASE("small setups match hand evaluation") {
  const auto s1 = build_setup(1, 1);
  CHECK(s1.D0rho(0, 0) == 1.0);
  CHECK(s1.space_nodes == std::vector<double>{0.0});
  CHECK(s1.time_nodes == std::vector<double>{1.0});

  const auto s6 = build_setup(6, 6);
  // p_3 = J_2 - (6/20) J_4, a quartic: 5-point differences are exact up to rounding.
  auto p3 = [](double x) { return legendre_closed(2, x) - 0.3 * legendre_closed(4, x); };
  for (int k = 0; k < 6; ++k)
    CHECK(std::abs(s6.D2rho(2, k) - fd2(p3, s6.space_nodes[k], 1e-3)) < 1e-8);

  // Derivative of the constant function p_1 vanishes at every node.
  const auto s4 = build_setup(4, 4);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
  c(0) = 2.5;
  CHECK((s4.space_eval(1) * c).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK_THROWS_AS(build_setup(0, 2), InvalidInput);
}

TEST_CASE("velocity collocation factors are consistent") {
  const auto s = build_setup(8, 8);
  CHECK(s.velocity_lu.rcond() > 1e-8);
  for (int j = 0; j < 8; ++j) {
    CHECK(s.velocity_at_right(j) == doctest::Approx(1.0));
    CHECK(s.velocity_at_left(j) == doctest::Approx(j % 2 == 0 ? -1.0 : 1.0));
  }
}
