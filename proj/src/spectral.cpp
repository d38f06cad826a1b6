#include "athero/spectral.hpp"

#include "athero/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace athero::spectral {

namespace {

// J_n^{a,b}(x) by the three-term recurrence.
double jacobi_value(int n, double a, double b, double x) {
  if (n == 0) return 1.0;
  double p0 = 1.0;
  double p1 = 0.5 * (a - b + (a + b + 2.0) * x);
  for (int k = 2; k <= n; ++k) {
    const double s = 2.0 * k + a + b;
    const double c1 = 2.0 * k * (k + a + b) * (s - 2.0);
    const double c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
    const double c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
    const double p2 = (c2 * p1 - c3 * p0) / c1;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Newton iteration with deflation against already-found roots. The caller
// supplies the initial guesses in order; each guess is refined until the
// step is below round-off.
std::vector<double> deflated_roots(const std::function<double(double)>& f,
                                   const std::function<double(double)>& df,
                                   const std::vector<double>& guesses,
                                   std::vector<double> known) {
  std::vector<double> roots;
  for (double x : guesses) {
    for (int it = 0; it < 100; ++it) {
      const double fx = f(x);
      double deflation = 0.0;
      for (double r : known) deflation += 1.0 / (x - r);
      const double step = fx / (df(x) - fx * deflation);
      x -= step;
      if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    known.push_back(x);
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Plain Newton polish without deflation; keeps the root inside its bracket.
double polish(const std::function<double(double)>& f, const std::function<double(double)>& df,
              double x) {
  for (int it = 0; it < 5; ++it) {
    const double fx = f(x);
    const double d = df(x);
    if (fx == 0.0 || d == 0.0) break;
    const double next = x - fx / d;
    if (std::abs(next - x) > 1e-10) break;
    x = next;
  }
  return x;
}

}  // namespace

double jacobi_eval(int n, double a, double b, double x, int d) {
  if (n < 0) throw InvalidInput("jacobi_eval: degree must be non-negative, got " + std::to_string(n));
  if (a <= -1.0 || b <= -1.0) throw InvalidInput("jacobi_eval: exponents must exceed -1");
  if (d < 0) throw InvalidInput("jacobi_eval: derivative order must be non-negative");
  if (!(x >= -1.0 && x <= 1.0))
    throw InvalidInput("jacobi_eval: x=" + std::to_string(x) + " outside [-1, 1]");
  if (d > n) return 0.0;
  // d^d/dx^d J_n^{a,b} = prod_{i=1..d} (n+a+b+i)/2 * J_{n-d}^{a+d,b+d}
  double factor = 1.0;
  for (int i = 1; i <= d; ++i) factor *= 0.5 * (n + a + b + i);
  return factor * jacobi_value(n - d, a + d, b + d, x);
}

std::vector<double> legendre_gauss_nodes(int N) {
  if (N < 0) throw InvalidInput("legendre_gauss_nodes: N must be non-negative");
  const int n = N + 1;
  auto f = [n](double x) { return jacobi_value(n, 0.0, 0.0, x); };
  auto df = [n](double x) { return 0.5 * (n + 1.0) * jacobi_value(n - 1, 1.0, 1.0, x); };
  std::vector<double> guesses(n);
  for (int i = 0; i < n; ++i)
    guesses[i] = -std::cos((2.0 * i + 1.0) * std::numbers::pi / (2.0 * n));
  auto roots = deflated_roots(f, df, guesses, {});
  for (double& r : roots) r = polish(f, df, r);
  // Parity: the node set is symmetric about the origin.
  for (int i = 0; i < n / 2; ++i) {
    const double m = 0.5 * (roots[n - 1 - i] - roots[i]);
    roots[i] = -m;
    roots[n - 1 - i] = m;
  }
  if (n % 2 == 1) roots[n / 2] = 0.0;
  return roots;
}

std::vector<double> legendre_gauss_radau_nodes(int M) {
  if (M < 0) throw InvalidInput("legendre_gauss_radau_nodes: M must be non-negative");
  if (M == 0) return {1.0};
  // g(x) = J_M + J_{M+1} has -1 as a root; the remaining M roots lie in (-1, 1).
  auto f = [M](double x) { return jacobi_value(M, 0, 0, x) + jacobi_value(M + 1, 0, 0, x); };
  auto df = [M](double x) {
    return 0.5 * (M + 1.0) * jacobi_value(M - 1, 1, 1, x) +
           0.5 * (M + 2.0) * jacobi_value(M, 1, 1, x);
  };
  std::vector<double> guesses(M);
  for (int i = 1; i <= M; ++i)
    guesses[i - 1] = -std::cos(2.0 * std::numbers::pi * i / (2.0 * M + 1.0));
  auto roots = deflated_roots(f, df, guesses, {-1.0});
  for (double& r : roots) r = polish(f, df, r);
  std::vector<double> nodes;
  nodes.reserve(M + 1);
  nodes.push_back(1.0);
  for (double r : roots) nodes.push_back(-r);
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

PolynomialBasis::PolynomialBasis(BasisKind kind, int count) : kind_(kind) {
  if (count < 1) throw InvalidInput("PolynomialBasis: count must be at least 1");
  table_.reserve(count);
  for (int j = 1; j <= count; ++j) {
    std::vector<Term> t;
    if (kind == BasisKind::Space) {
      t.push_back({j - 1, 1.0});
      const double c = static_cast<double>(j) * (j - 1) / ((j + 1.0) * (j + 2.0));
      if (c != 0.0) t.push_back({j + 1, -c});
    } else {
      t.push_back({j - 1, 1.0});
      t.push_back({j, 1.0});
    }
    table_.push_back(std::move(t));
  }
}

double PolynomialBasis::eval(int i, double x, int d) const {
  double s = 0.0;
  for (const auto& term : table_.at(i)) s += term.coeff * jacobi_eval(term.degree, 0.0, 0.0, x, d);
  return s;
}

BasisPair build_bases(int N, int M) {
  if (N < 1 || M < 1) throw InvalidInput("build_bases: N and M must be at least 1");
  return {PolynomialBasis(BasisKind::Space, N), PolynomialBasis(BasisKind::Time, M)};
}

Eigen::MatrixXd CollocationSetup::space_eval(int d) const {
  switch (d) {
    case 0: return D0rho.transpose();
    case 1: return D1rho.transpose();
    case 2: return D2rho.transpose();
    default: throw InvalidInput("space_eval: derivative order must be 0, 1 or 2");
  }
}

Eigen::MatrixXd CollocationSetup::time_eval(int d) const {
  switch (d) {
    case 0: return D0t.transpose();
    case 1: return D1t.transpose();
    default: throw InvalidInput("time_eval: derivative order must be 0 or 1");
  }
}

CollocationSetup build_setup(int N, int M) {
  auto bases = build_bases(N, M);
  CollocationSetup s(std::move(bases.space), std::move(bases.time));
  s.N = N;
  s.M = M;
  // N trial functions on N Gauss nodes, M trial functions on M Radau nodes.
  s.space_nodes = legendre_gauss_nodes(N - 1);
  s.time_nodes = legendre_gauss_radau_nodes(M - 1);

  auto fill = [](const PolynomialBasis& basis, const std::vector<double>& nodes, int d) {
    Eigen::MatrixXd D(basis.size(), static_cast<Eigen::Index>(nodes.size()));
    for (int j = 0; j < basis.size(); ++j)
      for (std::size_t k = 0; k < nodes.size(); ++k) D(j, k) = basis.eval(j, nodes[k], d);
    return D;
  };
  s.D0rho = fill(s.space_basis, s.space_nodes, 0);
  s.D1rho = fill(s.space_basis, s.space_nodes, 1);
  s.D2rho = fill(s.space_basis, s.space_nodes, 2);
  s.D0t = fill(s.time_basis, s.time_nodes, 0);
  s.D1t = fill(s.time_basis, s.time_nodes, 1);

  s.velocity_derivative.resize(N, N);
  s.velocity_second.resize(N, N);
  s.velocity_values.resize(N, N);
  s.velocity_at_right.resize(N);
  s.velocity_at_left.resize(N);
  s.velocity_slope_left.resize(N);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      const double x = s.space_nodes[i];
      s.velocity_values(i, j) = jacobi_eval(j + 1, 0, 0, x, 0);
      s.velocity_derivative(i, j) = jacobi_eval(j + 1, 0, 0, x, 1);
      s.velocity_second(i, j) = jacobi_eval(j + 1, 0, 0, x, 2);
    }
    s.velocity_at_right(j) = jacobi_eval(j + 1, 0, 0, 1.0, 0);
    s.velocity_at_left(j) = jacobi_eval(j + 1, 0, 0, -1.0, 0);
    s.velocity_slope_left(j) = jacobi_eval(j + 1, 0, 0, -1.0, 1);
  }
  s.velocity_lu.compute(s.velocity_derivative);
  return s;
}

}  // namespace athero::spectral
