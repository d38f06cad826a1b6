#include "athero/model.hpp"

#include "athero/errors.hpp"

#include <cmath>
#include <string>

namespace athero::model {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput("ModelParameters: " + what);
}

double guarded(double denom, const char* term, const ModelParameters& p) {
  if (!std::isfinite(denom) || std::abs(denom) <= p.denominator_floor)
    throw DomainError(std::string("near-zero denominator ") + term + " = " + std::to_string(denom));
  return denom;
}

// 1 - (R + epsilon), the transformed domain width.
double lumen_gap(double R, const ModelParameters& p) {
  const double w = 1.0 - (R + p.epsilon);
  if (!(w > p.denominator_floor))
    throw DomainError("vessel occluded: R + epsilon = " + std::to_string(R + p.epsilon) +
                      " reaches 1");
  return w;
}

// (rho + 1) + (R + epsilon)(1 - rho), proportional to the physical radius.
double radial_factor(double rho, double R, const ModelParameters& p) {
  return guarded((rho + 1.0) + (R + p.epsilon) * (1.0 - rho), "(rho+1)+(R+eps)(1-rho)", p);
}

struct Physical {
  double L, H, F;
};

// Original-variable concentrations as they appear in the state right-hand
// sides: exp(sl) L + L0, exp(sl) H + H0, exp(sf) F.
Physical state_form(double rho, double R, const Fields& f, const ModelParameters& p) {
  const double el = std::exp(exponent_sl(rho, R, p));
  const double ef = std::exp(exponent_sf(rho, R, p));
  return {el * f.L + p.L0, el * f.H + p.H0, ef * f.F};
}

// Inverse of the Neumann transform: L0 + exp(-sl) L, H0 + exp(-sl) H, exp(-sf) F.
Physical inverse_form(double rho, double R, const Fields& f, const ModelParameters& p) {
  const double el = std::exp(-exponent_sl(rho, R, p));
  const double ef = std::exp(-exponent_sf(rho, R, p));
  return {p.L0 + el * f.L, p.H0 + el * f.H, ef * f.F};
}

}  // namespace

void ModelParameters::validate() const {
  const double all[] = {k1, K1, k2, K2, r1, r2, D, mu1, mu2, lambda, delta, M0,
                        alpha, beta, L0, H0, epsilon, T, Kbound, denominator_floor};
  for (double x : all) require(std::isfinite(x), "all parameters must be finite");
  require(k1 >= 0 && k2 >= 0 && r1 >= 0 && r2 >= 0, "reaction and degradation rates must be >= 0");
  require(mu1 >= 0 && mu2 >= 0 && lambda >= 0, "death and production rates must be >= 0");
  require(K1 > 0 && K2 > 0, "saturation constants K1, K2 must be > 0");
  require(M0 > 0, "macrophage density M0 must be > 0");
  require(D > 0, "foam cell diffusion D must be > 0");
  require(alpha >= 0 && beta >= 0, "influx rates alpha, beta must be >= 0");
  require(L0 >= 0 && H0 >= 0, "blood concentrations L0, H0 must be >= 0");
  require(denominator_floor > 0, "denominator_floor must be > 0");
  require(std::abs(delta + H0) > denominator_floor, "guard delta + H0 != 0 violated");
  require(epsilon > 0 && epsilon < 1, "epsilon must lie in (0, 1)");
  require(T > 0, "final time T must be > 0");
  require(Kbound >= 0, "control bound Kbound must be >= 0");
}

ModelParameters ModelParameters::decoupled_limit() {
  ModelParameters p;
  p.k1 = 0.0;
  p.r1 = 0.0;
  p.r2 = 0.0;
  p.lambda = 0.0;
  p.mu1 = 0.0;
  p.mu2 = 0.0;
  return p;
}

TransformedPoint front_fix(double r, double tau, double R_hat, double T) {
  if (!(R_hat < 1.0)) throw InvalidInput("front_fix: free boundary R_hat must be < 1");
  if (!(T > 0.0)) throw InvalidInput("front_fix: T must be > 0");
  if (r < R_hat || r > 1.0) throw InvalidInput("front_fix: r outside [R_hat, 1]");
  if (tau < 0.0 || tau > T) throw InvalidInput("front_fix: tau outside [0, T]");
  return {2.0 * (r - R_hat) / (1.0 - R_hat) - 1.0, 2.0 * tau / T - 1.0};
}

PhysicalPoint front_unfix(TransformedPoint q, double R_hat, double T) {
  if (!(R_hat < 1.0)) throw InvalidInput("front_unfix: free boundary R_hat must be < 1");
  return {R_hat + 0.5 * (1.0 - R_hat) * (q.rho + 1.0), 0.5 * T * (q.t + 1.0)};
}

double exponent_sl(double rho, double R, const ModelParameters& p) {
  const double q = 1.0 - rho;
  return -p.alpha * (1.0 - R - p.epsilon) * q * q / 8.0;
}

double exponent_sf(double rho, double R, const ModelParameters& p) {
  const double q = 1.0 - rho;
  return -p.beta * (1.0 - R - p.epsilon) * q * q / 8.0;
}

double exponent_sz(double rho, double R, double v, const ModelParameters& p) {
  const double q = 1.0 - rho;
  return (1.0 - R - p.epsilon) * q * q * (1.0 + rho) * (v + p.D * p.beta) / 8.0;
}

double coeff(Coeff kind, const CoeffArgs& a, const ModelParameters& p) {
  const double w = lumen_gap(a.R, p);
  const double q = 1.0 - a.rho;
  const double s = 1.0 + a.rho;
  switch (kind) {
    case Coeff::g11:
      return 4.0 / (w * w);
    case Coeff::g31:
      return 4.0 * p.D / (w * w);
    case Coeff::g12: {
      const double den = radial_factor(a.rho, a.R, p);
      return -8.0 / (den * w) - a.v_inner * s / w + 2.0 * q * p.alpha / w;
    }
    case Coeff::g32: {
      const double den = radial_factor(a.rho, a.R, p);
      return -8.0 * p.D / (den * w) - a.v_inner * s / w + 2.0 * p.D * q * p.alpha / w +
             2.0 * a.v_local / w;
    }
    case Coeff::g42: {
      const double den = radial_factor(a.rho, a.R, p);
      return -8.0 / (den * w) - a.v_inner * s / w - 2.0 * q * p.alpha / w;
    }
    case Coeff::g62: {
      const double den = radial_factor(a.rho, a.R, p);
      const double one_minus_R = 1.0 - a.R;
      return -8.0 * p.D / (den * w) - a.v_inner * s / w -
             3.0 * (a.rho * a.rho - 2.0 * a.rho - 1.0) * (a.v_local + p.D * p.beta) / one_minus_R -
             q * q * s / one_minus_R * a.dv_drho - 2.0 * a.F * a.dv_dF / one_minus_R;
    }
  }
  throw InvalidInput("coeff: unknown kind");
}

double rhs(Rhs kind, double rho, double /*t*/, double R, double v_inner, const Fields& f,
           double phi, const ModelParameters& p) {
  const double w = lumen_gap(R, p);
  const double q = 1.0 - rho;
  const double s = 1.0 + rho;
  const double sl = exponent_sl(rho, R, p);
  const Physical x = state_form(rho, R, f, p);

  switch (kind) {
    case Rhs::fv: {
      const double hdl = guarded(p.delta + x.H, "delta + exp(sl)H + H0", p);
      return w / (2.0 * p.M0) *
             (p.lambda * (p.M0 - x.F) * x.L / hdl - p.mu1 * (p.M0 - x.F) - p.mu2 * x.F);
    }
    case Rhs::fL:
    case Rhs::fH: {
      const double den = radial_factor(rho, R, p);
      const double a = p.alpha * v_inner * q * q / (4.0 * p.T) + v_inner * s * q * p.alpha / 4.0 -
                       2.0 * p.alpha * q / den + p.alpha / w + p.alpha * p.alpha * q * q / 4.0;
      const double back = std::exp(-sl);
      if (kind == Rhs::fL) {
        const double sat = guarded(p.K1 + x.L, "K1 + exp(sl)L + L0", p);
        // The k1 uptake term enters once.
        return a * f.L - p.r1 * back * x.L - p.k1 * (p.M0 - x.F) * x.L / sat * back;
      }
      const double sat = guarded(p.K2 + x.F, "K2 + exp(sf)F", p);
      return a * f.H - p.r2 * back * x.H - (phi + p.k2) * back * x.F * x.H / sat;
    }
    case Rhs::fF: {
      const double den = radial_factor(rho, R, p);
      const double satL = guarded(p.K1 + x.L, "K1 + exp(sl)L + L0", p);
      const double satF = guarded(p.K2 + x.F, "K2 + exp(sf)F", p);
      const double hdl = guarded(p.delta + x.H, "delta + exp(sl)H + H0", p);
      const double linear = p.beta * v_inner * q * q / (4.0 * p.T) +
                            v_inner * s * q * p.beta / 4.0 - 2.0 * p.beta * p.D * q / den +
                            p.D * p.beta / w + p.beta * p.beta * p.D * q * q / 4.0;
      return linear * f.F + f.v * p.beta * q / 2.0 +
             p.k1 * (p.M0 - x.F) * x.L * std::exp(-sl) / satL -
             (phi + p.k2) * x.H * f.F / satF - p.lambda * f.F * (p.M0 - x.F) * x.L / hdl +
             (p.mu1 - p.mu2) * f.F * (p.M0 - x.F) / p.M0;
    }
  }
  throw InvalidInput("rhs: unknown kind");
}

double dfv_dF(double rho, double R, const Fields& f, const ModelParameters& p) {
  const double w = lumen_gap(R, p);
  const Physical x = state_form(rho, R, f, p);
  const double ef = std::exp(exponent_sf(rho, R, p));
  const double hdl = guarded(p.delta + x.H, "delta + exp(sl)H + H0", p);
  return w / (2.0 * p.M0) * ef * (-p.lambda * x.L / hdl + p.mu1 - p.mu2);
}

double adjoint_reaction(AdjointRhs kind, const AdjointPoint& a, const ModelParameters& p) {
  const Physical x = inverse_form(a.rho, a.R, a.fields, p);
  const double sl = exponent_sl(a.rho, a.R, p);
  const double sz = exponent_sz(a.rho, a.R, a.fields.v, p);
  const double PL = std::exp(-sl) * a.adjoints.PL;
  const double PH = std::exp(-sl) * a.adjoints.PH;
  const double PF = std::exp(-sz) * a.adjoints.PF;
  const double Pv = a.adjoints.Pv;
  const double satL = guarded(p.K1 + x.L, "K1 + L", p);
  const double satF = guarded(p.K2 + x.F, "K2 + F", p);
  const double hdl = guarded(p.delta + x.H, "delta + H", p);
  const double gain = a.phi + p.k2;

  switch (kind) {
    case AdjointRhs::fPL:
      return p.k1 * (p.M0 - x.F) * p.K1 / (satL * satL) * (PL - PF) + p.r1 * PL +
             p.lambda * x.F * (p.M0 - x.F) / (p.M0 * hdl) * (PF - Pv);
    case AdjointRhs::fPH:
      return gain * x.F / satF * (PH + PF) + p.r2 * PH +
             p.lambda * x.F * (p.M0 - x.F) * x.L / (p.M0 * hdl * hdl) * (PF - Pv);
    case AdjointRhs::fPF:
      return -p.k1 * x.L / satL * (PL - PF) + gain * x.H * p.K2 / (satF * satF) * (PH + PF) +
             p.lambda * (p.M0 * x.L - 2.0 * x.F * x.L) / (p.M0 * hdl) * (PF - Pv) -
             (p.mu1 - p.mu2) / p.M0 * (p.M0 - 2.0 * x.F) * PF - (p.mu1 - p.mu2) * Pv;
  }
  throw InvalidInput("adjoint_reaction: unknown kind");
}

double adjoint_rhs(AdjointRhs kind, const AdjointPoint& a, const ModelParameters& p) {
  const double w = lumen_gap(a.R, p);
  const double q = 1.0 - a.rho;
  const double g11 = 4.0 / (w * w);
  const double reaction = adjoint_reaction(kind, a, p);

  // With P = exp(s) P_orig, the original-variable equation
  //   (2/T) P_orig_t + c g11 P_orig_rr + b P_orig_r = reaction
  // becomes (2/T) P_t + c g11 P_rr + (b - 2 c g11 s_r) P_r
  //   = exp(s) reaction + [(2/T) s_t - c g11 (s_r^2 - s_rr) + b s_r] P,
  // where b is fixed by requiring b - 2 c g11 s_r to be the printed g42 / g62.
  double s, s_r, s_rr, s_t_scaled, diffusion, g2, P;
  CoeffArgs ca{a.rho, a.R, a.v_inner, a.fields.v};
  if (kind == AdjointRhs::fPF) {
    const double c = a.fields.v + p.D * p.beta;
    const double Q = q * q * (1.0 + a.rho);
    const double dQ = 3.0 * a.rho * a.rho - 2.0 * a.rho - 1.0;
    const double d2Q = 6.0 * a.rho - 2.0;
    s = exponent_sz(a.rho, a.R, a.fields.v, p);
    s_r = w / 8.0 * (dQ * c + Q * a.dv_drho);
    s_rr = w / 8.0 * (d2Q * c + 2.0 * dQ * a.dv_drho + Q * a.d2v_drho2);
    // dw/dt = -dR/dt = -(T/2) v_inner
    s_t_scaled = Q / 8.0 * (-a.v_inner * c + (2.0 / p.T) * w * a.dv_dt);
    diffusion = p.D;
    ca.dv_drho = a.dv_drho;
    ca.F = a.fields.F;
    ca.dv_dF = dfv_dF(a.rho, a.R, a.fields, p);
    g2 = coeff(Coeff::g62, ca, p);
    P = a.adjoints.PF;
  } else {
    s = exponent_sl(a.rho, a.R, p);
    s_r = p.alpha * w * q / 4.0;
    s_rr = -p.alpha * w / 4.0;
    s_t_scaled = p.alpha * q * q * a.v_inner / 8.0;
    diffusion = 1.0;
    g2 = coeff(Coeff::g42, ca, p);
    P = kind == AdjointRhs::fPL ? a.adjoints.PL : a.adjoints.PH;
  }
  const double b = g2 + 2.0 * diffusion * g11 * s_r;
  return std::exp(s) * reaction +
         (s_t_scaled - diffusion * g11 * (s_r * s_r - s_rr) + b * s_r) * P;
}

double switching_xi(double rho, double /*t*/, double R, const Fields& f, const Adjoints& q,
                    const ModelParameters& p) {
  const double sl = exponent_sl(rho, R, p);
  const double sf = exponent_sf(rho, R, p);
  const double sz = exponent_sz(rho, R, f.v, p);
  const double F = std::exp(-sf) * f.F;
  const double H = std::exp(-sl) * f.H + p.H0;
  const double sat = guarded(p.K2 + F, "K2 + exp(-sf)F", p);
  return F * H / sat * (std::exp(-sl) * q.PH - std::exp(-sz) * q.PF);
}

VelocityResult velocity_solve(double R, double t, std::span<const double> L,
                              std::span<const double> H, std::span<const double> F,
                              const ModelParameters& p, const spectral::CollocationSetup& setup) {
  const int n = setup.N;
  if (static_cast<int>(L.size()) != n || static_cast<int>(H.size()) != n ||
      static_cast<int>(F.size()) != n)
    throw InvalidInput("velocity_solve: field arrays must have one value per space node");
  lumen_gap(R, p);
  const double rc = setup.velocity_lu.rcond();
  if (!(rc > 1e-14)) throw SingularSystem("velocity_solve: collocation matrix singular", rc);

  Eigen::VectorXd fv(n);
  for (int i = 0; i < n; ++i)
    fv(i) = rhs(Rhs::fv, setup.space_nodes[i], t, R, 0.0, Fields{L[i], H[i], F[i], 0.0}, 0.0, p);

  VelocityResult out;
  out.coefficients = setup.velocity_lu.solve(fv);
  const double right = setup.velocity_at_right.dot(out.coefficients);
  out.values = setup.velocity_values * out.coefficients - Eigen::VectorXd::Constant(n, right);
  out.slope = setup.velocity_derivative * out.coefficients;
  out.curvature = setup.velocity_second * out.coefficients;
  out.v_inner = setup.velocity_at_left.dot(out.coefficients) - right;
  out.slope_inner = setup.velocity_slope_left.dot(out.coefficients);
  return out;
}

Eigen::VectorXd left_anchored_solve(const Eigen::VectorXd& source,
                                    const spectral::CollocationSetup& setup) {
  const Eigen::VectorXd a = setup.velocity_lu.solve(source);
  const double left = setup.velocity_at_left.dot(a);
  return setup.velocity_values * a - Eigen::VectorXd::Constant(setup.N, left);
}

}  // namespace athero::model
