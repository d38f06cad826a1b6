#pragma once

// Jacobi polynomials, Legendre-Gauss(-Radau) nodes, boundary-embedding trial
// bases and the collocation differentiation matrices built from them.

#include <Eigen/Dense>

#include <vector>

namespace athero::spectral {

/// d-th derivative (d = 0, 1, 2, ...) of the Jacobi polynomial J_n^{a,b} at x.
/// Throws InvalidInput for n < 0, a or b <= -1, or x outside [-1, 1].
double jacobi_eval(int n, double a, double b, double x, int d = 0);

/// The N+1 zeros of the Legendre polynomial J_{N+1}^{0,0}, ascending.
std::vector<double> legendre_gauss_nodes(int N);

/// M+1 Legendre-Gauss-Radau nodes in (-1, 1], ascending, last node exactly +1.
/// They are the negated zeros of J_M^{0,0} + J_{M+1}^{0,0}.
std::vector<double> legendre_gauss_radau_nodes(int M);

enum class BasisKind { Space, Time };

/// A trial basis whose members are finite Legendre expansions.
///
/// Space members (j = 1..N) have zero slope at both ends of [-1, 1]:
///   p_j(x) = J_{j-1}(x) - j(j-1)/((j+1)(j+2)) J_{j+1}(x).
/// Time members (j = 1..M) vanish at t = -1:
///   q_j(t) = J_{j-1}(t) + J_j(t).
/// Index 0 in code corresponds to j = 1.
class PolynomialBasis {
 public:
  struct Term {
    int degree;
    double coeff;
  };

  PolynomialBasis(BasisKind kind, int count);

  BasisKind kind() const { return kind_; }
  int size() const { return static_cast<int>(table_.size()); }
  const std::vector<Term>& terms(int i) const { return table_.at(i); }

  /// d-th derivative of member i at x.
  double eval(int i, double x, int d = 0) const;

 private:
  BasisKind kind_;
  std::vector<std::vector<Term>> table_;
};

struct BasisPair {
  PolynomialBasis space;
  PolynomialBasis time;
};

BasisPair build_bases(int N, int M);

/// Nodes, bases and differentiation matrices for an N x M space-time grid.
///
/// [D_d]_{jk} = d^d p_j / dx^d evaluated at node k (rows: basis members,
/// columns: nodes). With N space members and N Gauss nodes the collocation
/// system is square; likewise for the M time members on M Radau nodes.
/// The first-order velocity problems (v' = f, v(1) = 0 and w' = g, w(-1) = 0)
/// are collocated on the Legendre derivative basis J'_1..J'_N, factorized here
/// once.
struct CollocationSetup {
  int N = 0;
  int M = 0;
  std::vector<double> space_nodes;
  std::vector<double> time_nodes;
  PolynomialBasis space_basis;
  PolynomialBasis time_basis;
  Eigen::MatrixXd D0rho, D1rho, D2rho;
  Eigen::MatrixXd D0t, D1t;

  // Velocity collocation: VD(i, j) = J'_{j+1}(rho_i).
  Eigen::MatrixXd velocity_derivative;
  Eigen::PartialPivLU<Eigen::MatrixXd> velocity_lu;
  Eigen::MatrixXd velocity_second;         // J''_{j+1}(rho_i)
  Eigen::RowVectorXd velocity_at_right;    // J_{j+1}(1) = 1
  Eigen::RowVectorXd velocity_at_left;     // J_{j+1}(-1)
  Eigen::RowVectorXd velocity_slope_left;  // J'_{j+1}(-1)
  Eigen::MatrixXd velocity_values;         // J_{j+1}(rho_i)

  CollocationSetup(PolynomialBasis space, PolynomialBasis time)
      : space_basis(std::move(space)), time_basis(std::move(time)) {}

  /// Evaluation matrices in node-major orientation: E(k, j) = p_j^{(d)}(x_k).
  Eigen::MatrixXd space_eval(int d) const;
  Eigen::MatrixXd time_eval(int d) const;
};

CollocationSetup build_setup(int N, int M);

}  // namespace athero::spectral
