#pragma once

// The plaque-growth model on the fixed domain (rho, t) in [-1, 1]^2.
//
// Radius convention: R is the shifted radius, R = R_hat - epsilon, so that the
// physical inner plaque radius is R_hat = R + epsilon and R(-1) = 0.
// Field convention: L, H, F are the Neumann-transformed concentrations,
// L = exp(sl) (L_hat - L0), H = exp(sl) (H_hat - H0), F = exp(sf) F_hat.

#include "athero/spectral.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace athero::model {

struct ModelParameters {
  double k1 = 10.0;          // LDL ingestion by macrophages (1/day)
  double K1 = 1e-2;          // LDL saturation (g/cm^3)
  double k2 = 10.0;          // HDL removal of LDL from foam cells (1/day)
  double K2 = 0.5;           // foam cell saturation (g/cm^3)
  double r1 = 2.42e-5;       // LDL degradation (1/day)
  double r2 = 5.54e-7;       // HDL degradation (1/day)
  double D = 8.64e-7;        // foam cell diffusion (cm^2/day)
  double mu1 = 0.015;        // macrophage death rate (1/day)
  double mu2 = 0.03;         // foam cell death rate (1/day)
  double lambda = 2.573e-3;  // macrophage production by ox-LDL (1/day)
  double delta = -2.541e-3;  // HDL saturation
  double M0 = 5e-5;          // macrophage density (g/cm^3)
  double alpha = 1.0;        // LDL influx rate (1/cm)
  double beta = 0.01;        // macrophage influx rate (1/cm)
  double L0 = 0.016;         // LDL concentration in the blood (g/cm^3)
  double H0 = 0.005;         // HDL concentration in the blood (g/cm^3)
  double epsilon = 0.01;     // initial inner plaque radius
  double T = 1.0;            // final time (days)
  double Kbound = 1.0;       // control upper bound (1/day)
  double denominator_floor = 1e-12;

  /// Throws InvalidInput naming the first violated invariant.
  void validate() const;

  /// Reaction/production switched off so that the zero transformed state
  /// is an exact equilibrium.
  static ModelParameters decoupled_limit();
};

struct TransformedPoint {
  double rho;
  double t;
};

struct PhysicalPoint {
  double r;
  double tau;
};

/// Maps (r, tau) on [R_hat, 1] x [0, T] to (rho, t) on [-1, 1]^2.
TransformedPoint front_fix(double r, double tau, double R_hat, double T);
PhysicalPoint front_unfix(TransformedPoint p, double R_hat, double T);

double exponent_sl(double rho, double R, const ModelParameters& p);
double exponent_sf(double rho, double R, const ModelParameters& p);
double exponent_sz(double rho, double R, double v, const ModelParameters& p);

enum class Coeff { g11, g12, g31, g32, g42, g62 };

struct CoeffArgs {
  double rho = 0.0;
  double R = 0.0;
  double v_inner = 0.0;  // v(-1, t)
  double v_local = 0.0;  // v(rho, t)
  // Only consumed by g62.
  double dv_drho = 0.0;
  double F = 0.0;
  double dv_dF = 0.0;
};

double coeff(Coeff kind, const CoeffArgs& a, const ModelParameters& p);

struct Fields {
  double L = 0.0;
  double H = 0.0;
  double F = 0.0;
  double v = 0.0;
};

enum class Rhs { fL, fH, fF, fv };

/// Right-hand sides of the transformed state equations. Denominators below
/// p.denominator_floor raise DomainError naming the term.
double rhs(Rhs kind, double rho, double t, double R, double v_inner, const Fields& f, double phi,
           const ModelParameters& p);

/// Partial derivative of f_v with respect to the transformed F value.
double dfv_dF(double rho, double R, const Fields& f, const ModelParameters& p);

struct Adjoints {
  double PL = 0.0;
  double PH = 0.0;
  double PF = 0.0;
  double Pv = 0.0;
};

/// Everything the transformed adjoint right-hand sides need at one point.
struct AdjointPoint {
  double rho = 0.0;
  double t = 0.0;
  double R = 0.0;
  double v_inner = 0.0;
  Fields fields;
  Adjoints adjoints;
  double phi = 0.0;
  double dv_drho = 0.0;
  double d2v_drho2 = 0.0;
  double dv_dt = 0.0;
};

enum class AdjointRhs { fPL, fPH, fPF };

/// Right-hand side of the adjoint equation in its original (untransformed)
/// variables, evaluated from transformed inputs.
double adjoint_reaction(AdjointRhs kind, const AdjointPoint& a, const ModelParameters& p);

/// Right-hand sides of the transformed adjoint equations
///   (2/T) P_t + c g11 P_rhorho + g_2 P_rho = f_P,
/// with c = 1, g_2 = g42 for P_L, P_H and c = D, g_2 = g62 for P_F. Obtained
/// from the original-variable equation by P = exp(s) P_orig.
double adjoint_rhs(AdjointRhs kind, const AdjointPoint& a, const ModelParameters& p);

/// Switching function; the bang-bang law picks Kbound where xi(-1, t) < 0.
double switching_xi(double rho, double t, double R, const Fields& f, const Adjoints& q,
                    const ModelParameters& p);

struct VelocityResult {
  Eigen::VectorXd values;     // v at the space nodes
  Eigen::VectorXd slope;      // dv/drho at the space nodes (= f_v)
  Eigen::VectorXd curvature;  // d2v/drho2 at the space nodes
  double v_inner = 0.0;       // v(-1)
  double slope_inner = 0.0;   // dv/drho(-1)
  Eigen::VectorXd coefficients;
};

/// Solves dv/drho = f_v(rho, R, L, H, F), v(1) = 0 by collocation at the
/// space nodes. L, H, F are nodal values at one time level.
VelocityResult velocity_solve(double R, double t, std::span<const double> L,
                              std::span<const double> H, std::span<const double> F,
                              const ModelParameters& p, const spectral::CollocationSetup& setup);

/// Solves dw/drho = source, w(-1) = 0 on the same collocation basis; used for
/// the velocity adjoint P_v. Returns w at the space nodes.
Eigen::VectorXd left_anchored_solve(const Eigen::VectorXd& source,
                                    const spectral::CollocationSetup& setup);

}  // namespace athero::model
