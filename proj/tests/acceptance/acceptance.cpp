// One PASS/FAIL line per acceptance criterion.
//
//   acceptance [--expect-fail 3,7]
//
// Exit status is 0 when every criterion passes. With --expect-fail the status
// is 0 when the failing set equals the listed set exactly, so a criterion
// that starts passing (or a new failure) still breaks the run.

#include "athero/direct.hpp"
#include "athero/errors.hpp"
#include "athero/indirect.hpp"
#include "athero/model.hpp"
#include "athero/nlp.hpp"
#include "athero/spectral.hpp"
#include "athero/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace athero;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Five-point central differences with one Richardson step (error O(h^6)).
double fd1(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}
double fd2(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}
double rich1(const std::function<double(double)>& f, double x, double h) {
  return (16 * fd1(f, x, h / 2) - fd1(f, x, h)) / 15;
}
double rich2(const std::function<double(double)>& f, double x, double h) {
  return (16 * fd2(f, x, h / 2) - fd2(f, x, h)) / 15;
}

Outcome spectral_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_d = 0.0, worst_node = 0.0;
  for (int n = 1; n <= 16; ++n) {
    const auto s = spectral::build_setup(n, n);
    for (int j = 0; j < n; ++j) {
      const auto p = [&](double x) { return s.space_basis.eval(j, x); };
      const auto q = [&](double x) { return s.time_basis.eval(j, x); };
      for (int k = 0; k < n; ++k) {
        const double x = s.space_nodes[k];
        const double h = std::min(2e-3, (1.0 - std::abs(x)) / 2.5);
        const double d2 = s.D2rho(j, k);
        worst_d = std::max({worst_d, std::abs(s.D0rho(j, k) - p(x)),
                            std::abs(s.D1rho(j, k) - rich1(p, x, h)),
                            std::abs(d2 - rich2(p, x, h)) / std::max(1.0, std::abs(d2))});
        const double t = s.time_nodes[k];
        // q_j'(1) = j^2 exactly; no central stencil fits at the right end.
        const double d1 = t < 1.0 ? rich1(q, t, std::min(2e-3, (1.0 - t) / 2.5)) : double((j + 1) * (j + 1));
        worst_d = std::max({worst_d, std::abs(s.D0t(j, k) - q(t)),
                            std::abs(s.D1t(j, k) - d1) / std::max(1.0, std::abs(d1))});
      }
    }
  }
  for (int n = 1; n <= 16; ++n) {
    for (double x : spectral::legendre_gauss_nodes(n))
      worst_node = std::max(worst_node, std::abs(spectral::jacobi_eval(n + 1, 0, 0, x)));
    for (double x : spectral::legendre_gauss_radau_nodes(n))
      worst_node = std::max(worst_node, std::abs(spectral::jacobi_eval(n, 0, 0, -x) +
                                                 spectral::jacobi_eval(n + 1, 0, 0, -x)));
  }
  const double secs = seconds_since(t0);
  return {worst_d <= 1e-7 && worst_node < 1e-12 && secs < 1.0,
          fmt::format("max derivative gap {:.3e} (tol 1e-7), max node residual {:.3e} (tol 1e-12), {:.3f} s",
                      worst_d, worst_node, secs)};
}

Outcome decoupled_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = model::ModelParameters::decoupled_limit();
  const auto setup = spectral::build_setup(8, 8);
  const auto control = direct::ControlVector::constant(8, 0.0, p.Kbound);
  const auto st = direct::fixed_point_solve(control, setup, p);
  double direct_sup = std::max({st.CL.cwiseAbs().maxCoeff(), st.CH.cwiseAbs().maxCoeff(),
                                st.CF.cwiseAbs().maxCoeff(), st.CR.cwiseAbs().maxCoeff(),
                                st.v.cwiseAbs().maxCoeff()});
  const double J = direct::objective(control, setup, p);
  const auto ind = indirect::solve_indirect(setup, p);
  double ind_sup = 0.0;
  for (size_t k = 0; k < ind.time_grid.size(); ++k) {
    ind_sup = std::max({ind_sup, ind.alpha_L[k].cwiseAbs().maxCoeff(), ind.alpha_H[k].cwiseAbs().maxCoeff(),
                        ind.alpha_F[k].cwiseAbs().maxCoeff(), std::abs(ind.R[k]), std::abs(ind.phi[k])});
  }
  const double gap = std::abs(J - (1.0 - p.epsilon));
  const double secs = seconds_since(t0);
  return {direct_sup < 1e-10 && ind_sup < 1e-10 && gap <= 1e-12 && secs < 5.0,
          fmt::format("direct sup {:.3e}, indirect sup {:.3e} (tol 1e-10), |J-(1-eps)| {:.3e} (tol 1e-12), {:.2f} s",
                      direct_sup, ind_sup, gap, secs)};
}

Outcome self_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  model::ModelParameters p;
  p.L0 = 0.016;
  p.H0 = 0.005;
  p.T = 1.0;
  const auto study = verify::convergence_study(p, {{2, 2}, {4, 4}, {8, 8}}, {16, 16});
  const double secs = seconds_since(t0);
  std::vector<double> e;
  bool ok = true;
  for (const auto& r : study.rows) {
    ok = ok && !r.failed;
    e.push_back(r.Einf[0]);
  }
  const bool decreasing = e[1] < e[0] && e[2] < e[1];
  const double orders = std::log10(e[0] / e[2]);
  return {ok && decreasing && orders >= 2.0 && secs < 300.0,
          fmt::format("Einf(L) {:.4e}, {:.4e}, {:.4e}; strictly decreasing {}; drop {:.2f} orders (need 2); {:.2f} s",
                      e[0], e[1], e[2], decreasing ? "yes" : "no", orders, secs)};
}

Outcome cpu_scale() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = direct::solve_direct(spectral::build_setup(8, 8), model::ModelParameters{});
  const double secs = seconds_since(t0);
  return {secs <= 60.0, fmt::format("N=M=8 direct solve {:.3f} s (limit 60 s), objective {:.6f}", secs, d.objective)};
}

struct DefaultRuns {
  direct::DirectSolution d;
  indirect::AdjointSolution ind;
  verify::CrossMethodRecord rec;
};

DefaultRuns default_runs() {
  const model::ModelParameters p;
  const auto setup = spectral::build_setup(10, 10);
  DefaultRuns r{direct::solve_direct(setup, p), indirect::solve_indirect(setup, p), {}};
  r.rec = verify::cross_method_diff(r.d, setup, r.ind, setup, p, verify::node_grid(setup),
                                    verify::uniform_times(101));
  return r;
}

Outcome cross_method(const DefaultRuns& r) {
  return {r.rec.radius <= 1e-3 && r.rec.match_fraction >= 0.9,
          fmt::format("sup |R_hat direct - R_hat indirect| {:.3e} (tol 1e-3), membership match {}/{} = {:.2f} (need 0.90)",
                      r.rec.radius, r.rec.matching_segments, r.rec.segments, r.rec.match_fraction)};
}

Outcome bang_bang(const DefaultRuns& r) {
  const model::ModelParameters p;
  const auto bad = std::count_if(r.ind.phi.begin(), r.ind.phi.end(),
                                 [&](double v) { return v != 0.0 && v != p.Kbound; });
  const auto active = direct::active_bound_segments(direct::solve_direct(spectral::build_setup(8, 8), p).control);
  return {bad == 0 && !active.empty(),
          fmt::format("{} of {} indirect samples outside {{0, K}}; {} direct segments on a bound", bad,
                      r.ind.phi.size(), active.size())};
}

Outcome control_effect() {
  const model::ModelParameters p;
  const auto rows = verify::control_effect_sweep(verify::default_sweep_pairs(), p, spectral::build_setup(8, 8));
  bool never_worse = true, strict = false, failed = false;
  std::ostringstream os;
  for (const auto& r : rows) {
    failed = failed || r.failed;
    if (r.failed) continue;
    const double gap = r.R_controlled.back() - r.R_uncontrolled.back();
    never_worse = never_worse && gap >= -1e-10;
    strict = strict || gap > 1e-12;
    os << fmt::format("({:.3f},{:.3f}) {:+.2e}; ", r.L0, r.H0, gap);
  }
  return {!failed && never_worse && strict,
          fmt::format("R_hat_c(T) - R_hat_u(T): {}never worse {}, strict for some pair {}", os.str(),
                      never_worse ? "yes" : "no", strict ? "yes" : "no")};
}

Outcome sqp_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto box = [](int n, double lo, double hi, std::function<double(const VectorXd&)> f) {
    nlp::NlpProblem pb;
    pb.dimension = n;
    pb.lower = VectorXd::Constant(n, lo);
    pb.upper = VectorXd::Constant(n, hi);
    pb.objective = std::move(f);
    return pb;
  };
  bool descent = true, feasible = true;
  const auto audit = [&](const nlp::NlpProblem& pb, const nlp::NlpResult& r) {
    for (size_t k = 0; k < r.trace.size(); ++k) {
      const auto& x = r.trace[k].x;
      feasible = feasible && (x - pb.lower).minCoeff() >= -1e-14 && (pb.upper - x).minCoeff() >= -1e-14;
      if (k > 0) descent = descent && r.trace[k].f < r.trace[k - 1].f;
    }
  };
  const auto interior = box(1, 0, 1, [](const VectorXd& x) { return std::pow(x(0) - 0.3, 2); });
  const auto a = nlp::sqp_minimize(interior, VectorXd::Zero(1));
  audit(interior, a);
  const auto bound = box(1, 0, 1, [](const VectorXd& x) { return std::pow(x(0) - 2.0, 2); });
  const auto b = nlp::sqp_minimize(bound, VectorXd::Zero(1));
  audit(bound, b);
  const auto rosen = box(2, 0, 2, [](const VectorXd& x) {
    return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
  });
  const auto c = nlp::sqp_minimize(rosen, VectorXd::Zero(2));
  audit(rosen, c);
  const double secs = seconds_since(t0);
  const bool fixtures = std::abs(a.x(0) - 0.3) <= 1e-6 && b.x(0) == 1.0 && c.f < 1e-6;
  return {fixtures && descent && feasible && secs < 1.0,
          fmt::format("|x-0.3| {:.1e}, bound x {}, Rosenbrock f {:.1e}; descent {}, feasible {}, {:.3f} s",
                      std::abs(a.x(0) - 0.3), b.x(0), c.f, descent ? "yes" : "no", feasible ? "yes" : "no", secs)};
}

Outcome rk4_order() {
  const auto err = [](int steps) {
    const auto tr = indirect::rk4_integrate([](double, const VectorXd& y) { return y; }, VectorXd::Ones(1), steps);
    return std::abs(tr.y.back()(0) - std::exp(2.0));
  };
  const double factor = err(100) / err(200);
  return {factor >= 12 && factor <= 20, fmt::format("y'=y error ratio h=2e-2 vs h=1e-2: {:.3f} (need [12, 20])", factor)};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) expected.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--expect-fail i,j,...]\n", argv[0]);
      return 2;
    }
  }

  DefaultRuns runs;
  std::string runs_error;
  try {
    runs = default_runs();
  } catch (const std::exception& e) {
    runs_error = e.what();
  }
  const auto with_runs = [&](Outcome (*f)(const DefaultRuns&)) {
    return [&, f] { return runs_error.empty() ? f(runs) : Outcome{false, "default runs failed: " + runs_error}; };
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"spectral exactness", spectral_exactness},
      {"decoupled-limit oracle", decoupled_oracle},
      {"self-convergence", self_convergence},
      {"CPU scale", cpu_scale},
      {"cross-method agreement", with_runs(cross_method)},
      {"bang-bang structure", with_runs(bang_bang)},
      {"control effect", control_effect},
      {"SQP suite", sqp_suite},
      {"RK4 order", rk4_order},
  };

  std::set<int> failing;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const Outcome o = guarded(criteria[i].second);
    const int id = static_cast<int>(i + 1);
    if (!o.pass) failing.insert(id);
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - failing.size(), criteria.size());
  if (!expected.empty()) {
    const bool same = failing == expected;
    std::printf("failing set %s the expected set\n", same ? "matches" : "differs from");
    return same ? 0 : 1;
  }
  return failing.empty() ? 0 : 1;
}
