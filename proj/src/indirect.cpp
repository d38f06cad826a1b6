#include "athero/indirect.hpp"

#include "athero/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <future>
#include <type_traits>

namespace athero::indirect {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Trajectory rk4_integrate(const OdeFunction& f, const VectorXd& y0, int steps, double t0, double t1,
                         double blowup, const StepHook& hook) {
  if (steps < 1) throw InvalidInput("rk4_integrate: need at least one step");
  const double h = (t1 - t0) / steps;
  Trajectory out;
  out.t.reserve(steps + 1);
  out.y.reserve(steps + 1);
  out.t.push_back(t0);
  out.y.push_back(y0);
  VectorXd y = y0;
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    if (hook) hook(k, t, y);
    const VectorXd k1 = f(t, y);
    const VectorXd k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    const VectorXd k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    const VectorXd k4 = f(t + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double tn = k + 1 == steps ? t1 : t0 + (k + 1) * h;
    if (!y.allFinite()) throw IntegrationFailure("rk4_integrate: non-finite state", tn);
    if (y.lpNorm<Eigen::Infinity>() > blowup)
      throw IntegrationFailure("rk4_integrate: state exceeded the instability bound", tn);
    out.t.push_back(tn);
    out.y.push_back(y);
  }
  return out;
}

namespace {

struct Nodal {
  VectorXd L, H, F;
  double R;
};

Nodal nodal_state(const VectorXd& y, const Context& ctx) {
  const Layout lay = ctx.layout();
  const int N = lay.N;
  return {ctx.nodal(y.segment(lay.alpha(0), N)), ctx.nodal(y.segment(lay.alpha(1), N)),
          ctx.nodal(y.segment(lay.alpha(2), N)), y(lay.R())};
}

model::VelocityResult velocity(double t, const Nodal& s, const Context& ctx) {
  return model::velocity_solve(s.R, t, {s.L.data(), size_t(s.L.size())},
                               {s.H.data(), size_t(s.H.size())},
                               {s.F.data(), size_t(s.F.size())}, ctx.params(), ctx.setup());
}

// Spectral radius of the linear diffusion/drift part of the state blocks at
// the zero state.
double state_stiffness(const Context& ctx) {
  const auto& setup = ctx.setup();
  const auto& p = ctx.params();
  const int N = setup.N;
  VectorXd y = VectorXd::Zero(ctx.layout().size());
  const Nodal s = nodal_state(y, ctx);
  const auto vr = velocity(-1.0, s, ctx);
  double radius = 0.0;
  for (int field : {0, 2}) {
    VectorXd G1(N), G2(N);
    for (int i = 0; i < N; ++i) {
      model::CoeffArgs ca{setup.space_nodes[i], 0.0, vr.v_inner, vr.values(i)};
      G1(i) = model::coeff(field == 2 ? model::Coeff::g31 : model::Coeff::g11, ca, p);
      G2(i) = model::coeff(field == 2 ? model::Coeff::g32 : model::Coeff::g12, ca, p);
    }
    const MatrixXd A = 0.5 * p.T *
                       ctx.solve_mass(MatrixXd(G1.asDiagonal() * ctx.P2() - G2.asDiagonal() * ctx.P1()));
    const Eigen::EigenSolver<MatrixXd> es(A, false);
    radius = std::max(radius, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return radius;
}

}  // namespace

Context::Context(const spectral::CollocationSetup& setup, const model::ModelParameters& params,
                 const Rk4Options& rk4)
    : setup_(&setup), params_(params), rk4_(rk4) {
  params_.validate();
  if (rk4_.steps < 1) throw InvalidInput("Rk4Options: steps must be >= 1");
  if (!(rk4_.stability_margin > 0)) throw InvalidInput("Rk4Options: stability margin must be > 0");
  P0_ = setup.space_eval(0);
  P1_ = setup.space_eval(1);
  P2_ = setup.space_eval(2);
  P0_lu_.compute(P0_);
  const double rc = P0_lu_.rcond();
  if (!(rc > 1e-14)) throw SingularSystem("indirect: space mass matrix singular", rc);
  left_.resize(setup.N);
  for (int j = 0; j < setup.N; ++j) left_(j) = setup.space_basis.eval(j, -1.0);

  steps_ = rk4_.steps;
  if (rk4_.stiffness_steps) {
    stiffness_ = state_stiffness(*this);
    const int needed = static_cast<int>(std::ceil(2.0 * stiffness_ / rk4_.stability_margin));
    steps_ = std::max(steps_, needed);
  }
}

VectorXd ode_rhs(double t, const VectorXd& y, double phi, const Context& ctx) {
  const Layout lay = ctx.layout();
  const int N = lay.N;
  if (y.size() != lay.size()) throw InvalidInput("ode_rhs: packed state has the wrong size");
  const auto& setup = ctx.setup();
  const auto& p = ctx.params();
  const double half_T = 0.5 * p.T;

  const Nodal s = nodal_state(y, ctx);
  const auto vr = velocity(t, s, ctx);

  VectorXd dy = VectorXd::Zero(lay.size());
  const model::Rhs kinds[3] = {model::Rhs::fL, model::Rhs::fH, model::Rhs::fF};
  for (int f = 0; f < 3; ++f) {
    const VectorXd a = y.segment(lay.alpha(f), N);
    const VectorXd d1 = ctx.P1() * a, d2 = ctx.P2() * a;
    VectorXd rhs(N);
    for (int i = 0; i < N; ++i) {
      const double rho = setup.space_nodes[i];
      model::CoeffArgs ca{rho, s.R, vr.v_inner, vr.values(i)};
      const double G1 = model::coeff(f == 2 ? model::Coeff::g31 : model::Coeff::g11, ca, p);
      const double G2 = model::coeff(f == 2 ? model::Coeff::g32 : model::Coeff::g12, ca, p);
      const model::Fields pt{s.L(i), s.H(i), s.F(i), vr.values(i)};
      rhs(i) = model::rhs(kinds[f], rho, t, s.R, vr.v_inner, pt, phi, p) + G1 * d2(i) - G2 * d1(i);
    }
    dy.segment(lay.alpha(f), N) = half_T * ctx.from_nodal(rhs);
  }
  dy(lay.R()) = half_T * vr.v_inner;
  dy(lay.PR()) = half_T * (-2.0 / (1.0 - s.R)) * vr.slope_inner * y(lay.PR());

  const VectorXd adj = y.segment(lay.beta(0), 3 * N);
  if (adj.isZero(0.0)) return dy;  // the adjoint blocks are linear and homogeneous

  const VectorXd PL = ctx.nodal(y.segment(lay.beta(0), N));
  const VectorXd PH = ctx.nodal(y.segment(lay.beta(1), N));
  const VectorXd PF = ctx.nodal(y.segment(lay.beta(2), N));

  // P_v: d/drho P_v = d/drho(exp(-sf) F) * exp(-sz) P_F with P_v(-1) = 0.
  VectorXd dvdt = VectorXd::Zero(N), Pv = VectorXd::Zero(N);
  if (!PF.isZero(0.0)) {
    const VectorXd Fr = ctx.P1() * y.segment(lay.alpha(2), N);
    VectorXd source(N);
    const double w = 1.0 - s.R - p.epsilon;
    for (int i = 0; i < N; ++i) {
      const double rho = setup.space_nodes[i];
      const double sf = model::exponent_sf(rho, s.R, p);
      const double sf_r = p.beta * w * (1.0 - rho) / 4.0;
      const double sz = model::exponent_sz(rho, s.R, vr.values(i), p);
      source(i) = std::exp(-sf) * (Fr(i) - sf_r * s.F(i)) * std::exp(-sz) * PF(i);
    }
    Pv = model::left_anchored_solve(source, setup);

    // dv/dt along the current motion of (L, H, F, R).
    const double scale = std::max(1.0, y.segment(0, 3 * N).lpNorm<Eigen::Infinity>());
    const double speed = std::max(dy.segment(0, 3 * N).lpNorm<Eigen::Infinity>(), std::abs(dy(lay.R())));
    if (speed > 0) {
      const double delta = 1e-7 * scale / speed;
      Nodal moved = s;
      moved.L += delta * ctx.nodal(dy.segment(lay.alpha(0), N));
      moved.H += delta * ctx.nodal(dy.segment(lay.alpha(1), N));
      moved.F += delta * ctx.nodal(dy.segment(lay.alpha(2), N));
      moved.R += delta * dy(lay.R());
      // dy holds derivatives in t already, so the quotient is dv/dt.
      dvdt = (velocity(t, moved, ctx).values - vr.values) / delta;
    }
  }

  const model::AdjointRhs akinds[3] = {model::AdjointRhs::fPL, model::AdjointRhs::fPH,
                                       model::AdjointRhs::fPF};
  const double w = 1.0 - s.R - p.epsilon;
  const double g11 = 4.0 / (w * w);
  for (int c = 0; c < 3; ++c) {
    const VectorXd b = y.segment(lay.beta(c), N);
    const VectorXd d1 = ctx.P1() * b, d2 = ctx.P2() * b;
    VectorXd rhs(N);
    for (int i = 0; i < N; ++i) {
      const double rho = setup.space_nodes[i];
      model::AdjointPoint ap;
      ap.rho = rho;
      ap.t = t;
      ap.R = s.R;
      ap.v_inner = vr.v_inner;
      ap.fields = {s.L(i), s.H(i), s.F(i), vr.values(i)};
      ap.adjoints = {PL(i), PH(i), PF(i), Pv(i)};
      ap.phi = phi;
      ap.dv_drho = vr.slope(i);
      ap.d2v_drho2 = vr.curvature(i);
      ap.dv_dt = dvdt(i);
      model::CoeffArgs ca{rho, s.R, vr.v_inner, vr.values(i)};
      double diffusion = g11, drift;
      if (c == 2) {
        ca.dv_drho = vr.slope(i);
        ca.F = s.F(i);
        ca.dv_dF = model::dfv_dF(rho, s.R, ap.fields, p);
        diffusion = p.D * g11;
        drift = model::coeff(model::Coeff::g62, ca, p);
      } else {
        drift = model::coeff(model::Coeff::g42, ca, p);
      }
      rhs(i) = model::adjoint_rhs(akinds[c], ap, p) - diffusion * d2(i) - drift * d1(i);
    }
    dy.segment(lay.beta(c), N) = half_T * ctx.from_nodal(rhs);
  }
  return dy;
}

double switching_value(double t, const VectorXd& y, const Context& ctx) {
  const Layout lay = ctx.layout();
  const int N = lay.N;
  const Nodal s = nodal_state(y, ctx);
  const auto vr = velocity(t, s, ctx);
  const auto& row = ctx.left_row();
  const model::Fields f{row.dot(y.segment(lay.alpha(0), N)), row.dot(y.segment(lay.alpha(1), N)),
                        row.dot(y.segment(lay.alpha(2), N)), vr.v_inner};
  const model::Adjoints q{row.dot(y.segment(lay.beta(0), N)), row.dot(y.segment(lay.beta(1), N)),
                          row.dot(y.segment(lay.beta(2), N)), 0.0};
  return model::switching_xi(-1.0, t, s.R, f, q, ctx.params());
}

double bang_bang(double xi, double previous, double Kbound) {
  if (xi < 0) return Kbound;
  if (xi > 0) return 0.0;
  return previous;
}

ControlledRun integrate(const VectorXd& y0, const Context& ctx) {
  const double K = ctx.params().Kbound;
  auto attempt = [&](int steps) {
    ControlledRun run;
    run.steps = steps;
    double phi = 0.0;
    auto hook = [&](int, double t, const VectorXd& y) {
      const double xi = switching_value(t, y, ctx);
      phi = bang_bang(xi, phi, K);
      run.phi.push_back(phi);
      run.tie.push_back(xi == 0.0);
    };
    auto f = [&](double t, const VectorXd& y) { return ode_rhs(t, y, phi, ctx); };
    run.trajectory = rk4_integrate(f, y0, steps, -1.0, 1.0, ctx.rk4().blowup, hook);
    // Sample at t = 1 as well so that every grid point carries a control value.
    const double xi = switching_value(1.0, run.trajectory.y.back(), ctx);
    run.phi.push_back(bang_bang(xi, phi, K));
    run.tie.push_back(xi == 0.0);
    return run;
  };
  // An unstable step can also push R past the occlusion guard before the
  // state blows up, so domain errors count as instability too.
  try {
    return attempt(ctx.steps());
  } catch (const IntegrationFailure&) {
    if (!ctx.rk4().retry_on_failure) throw;
  } catch (const DomainError&) {
    if (!ctx.rk4().retry_on_failure) throw;
  }
  return attempt(2 * ctx.steps());
}

VectorXd initial_state(const VectorXd& s, const Context& ctx) {
  const Layout lay = ctx.layout();
  const int N = lay.N;
  if (s.size() != 3 * N + 1) throw InvalidInput("shooting vector must have 3N+1 entries");
  VectorXd y = VectorXd::Zero(lay.size());
  for (int c = 0; c < 3; ++c) y.segment(lay.beta(c), N) = ctx.from_nodal(s.segment(c * N, N));
  y(lay.PR()) = s(3 * N);
  return y;
}

namespace {

VectorXd terminal_residual(const VectorXd& yT, const Context& ctx) {
  const Layout lay = ctx.layout();
  const int N = lay.N;
  VectorXd r(3 * N + 1);
  for (int c = 0; c < 3; ++c) r.segment(c * N, N) = ctx.nodal(yT.segment(lay.beta(c), N));
  r(3 * N) = yT(lay.PR());
  return r;
}

}  // namespace

VectorXd shooting_residual(const VectorXd& s, const Context& ctx, double sentinel) {
  const VectorXd y0 = initial_state(s, ctx);
  try {
    const ControlledRun run = integrate(y0, ctx);
    return terminal_residual(run.trajectory.y.back(), ctx);
  } catch (const IntegrationFailure&) {
  } catch (const DomainError&) {
  }
  return VectorXd::Constant(s.size(), sentinel);
}

AdjointSolution solve_indirect(const spectral::CollocationSetup& setup,
                               const model::ModelParameters& params,
                               const ShootingOptions& options, const Rk4Options& rk4) {
  if (!(options.tol > 0)) throw InvalidInput("ShootingOptions: tol must be > 0");
  if (!(options.fd_step > 0)) throw InvalidInput("ShootingOptions: fd_step must be > 0");
  if (options.max_iter < 0) throw InvalidInput("ShootingOptions: max_iter must be >= 0");
  const Context ctx(setup, params, rk4);
  const int n = 3 * setup.N + 1;

  VectorXd s = VectorXd::Zero(n);
  VectorXd r = shooting_residual(s, ctx, options.sentinel);
  double norm = r.lpNorm<Eigen::Infinity>();
  int iter = 0;
  while (norm >= options.tol && iter < options.max_iter) {
    ++iter;
    MatrixXd J(n, n);
    auto column = [&](int k) {
      VectorXd sp = s;
      sp(k) += options.fd_step;
      return VectorXd((shooting_residual(sp, ctx, options.sentinel) - r) / options.fd_step);
    };
    if (options.concurrent_jacobian) {
      std::vector<std::future<VectorXd>> cols;
      for (int k = 0; k < n; ++k) cols.push_back(std::async(std::launch::async, column, k));
      for (int k = 0; k < n; ++k) J.col(k) = cols[k].get();
    } else {
      for (int k = 0; k < n; ++k) J.col(k) = column(k);
    }
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(J);
    if (qr.rank() < n) {
      std::string bad;
      for (int k = 0; k < n; ++k)
        if (J.col(k).norm() == 0.0) bad += " " + std::to_string(k);
      throw SingularSystem("solve_indirect: shooting Jacobian rank " + std::to_string(qr.rank()) +
                               " of " + std::to_string(n) + "; zero columns:" + (bad.empty() ? " none" : bad),
                           0.0);
    }
    const VectorXd step = qr.solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h) {
      const VectorXd trial = s + lambda * step;
      const VectorXd rt = shooting_residual(trial, ctx, options.sentinel);
      const double nt = rt.lpNorm<Eigen::Infinity>();
      if (nt < norm) {
        s = trial;
        r = rt;
        norm = nt;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }

  const ControlledRun run = integrate(initial_state(s, ctx), ctx);
  const Layout lay = ctx.layout();
  AdjointSolution out;
  out.time_grid = run.trajectory.t;
  out.phi = run.phi;
  out.tie = run.tie;
  out.steps = run.steps;
  out.s = s;
  out.residual = norm;
  out.newton_iterations = iter;
  out.converged = norm < options.tol;
  for (const VectorXd& y : run.trajectory.y) {
    out.alpha_L.push_back(y.segment(lay.alpha(0), lay.N));
    out.alpha_H.push_back(y.segment(lay.alpha(1), lay.N));
    out.alpha_F.push_back(y.segment(lay.alpha(2), lay.N));
    out.beta_PL.push_back(y.segment(lay.beta(0), lay.N));
    out.beta_PH.push_back(y.segment(lay.beta(1), lay.N));
    out.beta_PF.push_back(y.segment(lay.beta(2), lay.N));
    out.R.push_back(y(lay.R()));
    out.P_R.push_back(y(lay.PR()));
  }
  for (size_t k = 1; k < out.phi.size(); ++k)
    if (out.phi[k] != out.phi[k - 1]) out.switching_times.push_back(out.time_grid[k]);
  return out;
}

namespace {

// Lagrange interpolation on the (up to) four grid points around t.
template <typename Sample>
auto interpolate(const std::vector<double>& grid, double t, const Sample& sample) {
  const int n = static_cast<int>(grid.size());
  if (n == 0) throw InvalidInput("interpolate: empty trajectory");
  if (!(t >= grid.front() - 1e-12 && t <= grid.back() + 1e-12))
    throw InvalidInput("interpolate: time outside the integration interval");
  const int m = std::min(4, n);
  const double h = n > 1 ? (grid.back() - grid.front()) / (n - 1) : 1.0;
  const int k = static_cast<int>(std::floor((t - grid.front()) / h));
  const int first = std::clamp(k - 1, 0, n - m);
  std::decay_t<decltype(sample(0))> acc = sample(first) * 0.0;
  for (int a = 0; a < m; ++a) {
    double w = 1.0;
    for (int b = 0; b < m; ++b)
      if (b != a) w *= (t - grid[first + b]) / (grid[first + a] - grid[first + b]);
    acc = acc + sample(first + a) * w;
  }
  return acc;
}

}  // namespace

double evaluate_field(const AdjointSolution& s, direct::Field f, double rho, double t,
                      const spectral::CollocationSetup& setup) {
  const auto& traj = f == direct::Field::L ? s.alpha_L : f == direct::Field::H ? s.alpha_H : s.alpha_F;
  const VectorXd a = interpolate(s.time_grid, t, [&](int k) { return VectorXd(traj[k]); });
  double v = 0.0;
  for (int j = 0; j < setup.N; ++j) v += a(j) * setup.space_basis.eval(j, rho);
  return v;
}

double evaluate_radius(const AdjointSolution& s, double t) {
  return interpolate(s.time_grid, t, [&](int k) { return s.R[k]; });
}

double control_at(const AdjointSolution& s, double t) {
  const int n = static_cast<int>(s.time_grid.size());
  if (n == 0) throw InvalidInput("control_at: empty trajectory");
  const double h = (s.time_grid.back() - s.time_grid.front()) / std::max(n - 1, 1);
  const int k = std::clamp(static_cast<int>(std::floor((t - s.time_grid.front()) / h + 1e-9)), 0, n - 1);
  return s.phi[k];
}

}  // namespace athero::indirect
