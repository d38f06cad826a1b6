#include "athero/nlp.hpp"

#include "athero/errors.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace athero::nlp {

void NlpProblem::validate() const {
  if (dimension < 0) throw InvalidInput("NlpProblem: negative dimension");
  if (lower.size() != dimension || upper.size() != dimension)
    throw InvalidInput("NlpProblem: bound vectors must match the dimension");
  for (int i = 0; i < dimension; ++i)
    if (!(lower(i) <= upper(i))) throw InvalidInput("NlpProblem: lower > upper at coordinate " + std::to_string(i));
  if (!(options.fd_step > 0)) throw InvalidInput("NlpProblem: gradient step h must be > 0");
  if (!(options.tol > 0)) throw InvalidInput("NlpProblem: tolerance must be > 0");
  if (!objective) throw InvalidInput("NlpProblem: objective oracle missing");
}

Eigen::VectorXd NlpProblem::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

namespace {

double coordinate_step(const NlpProblem& pb, int i) {
  const double width = pb.upper(i) - pb.lower(i);
  const double scale = (std::isfinite(width) && width > 0) ? width : 1.0;
  return pb.options.fd_step * scale;
}

// One gradient component; f0 is the objective at x.
double partial(const NlpProblem& pb, const Eigen::VectorXd& x, int i, double f0) {
  const double h = coordinate_step(pb, i);
  auto at = [&](double offset) {
    Eigen::VectorXd y = x;
    y(i) += offset;
    return pb.objective(y);
  };
  const double lo = pb.lower(i), hi = pb.upper(i);
  if (x(i) - h >= lo && x(i) + h <= hi) return (at(h) - at(-h)) / (2.0 * h);
  // Written in differences so that a flat direction gives exactly zero.
  if (x(i) + 2.0 * h <= hi) return (4.0 * (at(h) - f0) - (at(2.0 * h) - f0)) / (2.0 * h);
  if (x(i) - 2.0 * h >= lo) return -(4.0 * (at(-h) - f0) - (at(-2.0 * h) - f0)) / (2.0 * h);
  return 0.0;  // box narrower than the stencil: coordinate is effectively fixed
}

}  // namespace

Eigen::VectorXd fd_gradient(const NlpProblem& pb, const Eigen::VectorXd& x) {
  const int n = pb.dimension;
  Eigen::VectorXd g(n);
  const double f0 = pb.objective(x);
  if (pb.options.concurrent_gradient && n > 1) {
    std::vector<std::future<double>> parts;
    parts.reserve(n);
    for (int i = 0; i < n; ++i)
      parts.push_back(std::async(std::launch::async, [&, i] { return partial(pb, x, i, f0); }));
    for (int i = 0; i < n; ++i) g(i) = parts[i].get();
  } else {
    for (int i = 0; i < n; ++i) g(i) = partial(pb, x, i, f0);
  }
  return g;
}

QpResult qp_subproblem(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                       const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int max_iter) {
  const int n = static_cast<int>(g.size());
  if (H.rows() != n || H.cols() != n || lo.size() != n || hi.size() != n)
    throw InvalidInput("qp_subproblem: dimension mismatch");
  if (max_iter <= 0) max_iter = 20 * n + 50;

  // 0 free, -1 on lower bound, +1 on upper bound
  std::vector<int> state(n, 0);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n).cwiseMax(lo).cwiseMin(hi);
  for (int i = 0; i < n; ++i) {
    if (lo(i) == hi(i)) state[i] = -1;
  }

  QpResult out;
  bool on_face_minimum = false;
  bool done = false;
  for (int it = 0; it < max_iter && !done; ++it) {
    out.iterations = it + 1;
    if (on_face_minimum) {
      // Minimizer on the current face: release the worst-signed multiplier.
      const Eigen::VectorXd grad = H * d + g;
      // Multipliers at rounding level would release and re-block forever.
      const double release_tol = 1e-13 * std::max(1.0, g.lpNorm<Eigen::Infinity>());
      int worst = -1;
      double worst_val = release_tol;
      for (int i = 0; i < n; ++i) {
        if (lo(i) == hi(i)) continue;
        double violation = 0.0;
        if (state[i] == -1 && grad(i) < 0) violation = -grad(i);
        if (state[i] == +1 && grad(i) > 0) violation = grad(i);
        if (violation > worst_val) {
          worst_val = violation;
          worst = i;
        }
      }
      if (worst < 0) {
        done = true;
        break;
      }
      state[worst] = 0;
      on_face_minimum = false;
      continue;
    }

    std::vector<int> free;
    for (int i = 0; i < n; ++i)
      if (state[i] == 0) free.push_back(i);
    const int nf = static_cast<int>(free.size());
    if (nf == 0) {
      on_face_minimum = true;
      continue;
    }

    Eigen::MatrixXd Hff(nf, nf);
    Eigen::VectorXd rhs(nf);
    const Eigen::VectorXd grad = H * d + g;
    for (int a = 0; a < nf; ++a) {
      rhs(a) = -grad(free[a]);
      for (int b = 0; b < nf; ++b) Hff(a, b) = H(free[a], free[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Hff);
    if (llt.info() != Eigen::Success) throw InvalidInput("qp_subproblem: Hessian not positive definite");
    const Eigen::VectorXd p = llt.solve(rhs);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < nf; ++a) dir(free[a]) = p(a);

    double step = 1.0;
    int blocking = -1;
    int blocking_side = 0;
    for (int i = 0; i < n; ++i) {
      if (state[i] != 0 || dir(i) == 0.0) continue;
      if (dir(i) > 0) {
        const double room = (hi(i) - d(i)) / dir(i);
        if (room < step) { step = room; blocking = i; blocking_side = +1; }
      } else {
        const double room = (lo(i) - d(i)) / dir(i);
        if (room < step) { step = room; blocking = i; blocking_side = -1; }
      }
    }
    step = std::max(step, 0.0);
    d += step * dir;
    d = d.cwiseMax(lo).cwiseMin(hi);
    if (blocking >= 0) {
      state[blocking] = blocking_side;
      d(blocking) = blocking_side > 0 ? hi(blocking) : lo(blocking);
    } else {
      on_face_minimum = true;
    }
  }
  if (!done) throw NonConvergence("qp_subproblem: active-set iteration cap", max_iter, 0.0);

  const Eigen::VectorXd grad = H * d + g;
  out.kkt_residual = (d - (d - grad).cwiseMax(lo).cwiseMin(hi)).lpNorm<Eigen::Infinity>();
  out.step = d;
  return out;
}

NlpResult sqp_minimize(const NlpProblem& pb, const Eigen::VectorXd& x0) {
  pb.validate();
  if (x0.size() != pb.dimension) throw InvalidInput("sqp_minimize: x0 has the wrong dimension");
  const NlpOptions& opt = pb.options;
  const int n = pb.dimension;

  NlpResult res;
  Eigen::VectorXd x = pb.project(x0);
  double f = pb.objective(x);
  res.evaluations = 1;
  res.trace.push_back({x, f});
  res.x = x;
  res.f = f;
  res.hessian = Eigen::MatrixXd::Identity(n, n);
  if (opt.max_iter <= 0 || n == 0) {
    res.converged = n == 0;
    res.message = n == 0 ? "empty problem" : "iteration limit 0";
    return res;
  }

  Eigen::VectorXd g = fd_gradient(pb, x);
  res.evaluations += 2 * n + 1;
  // Scale the objective so the first gradient has unit size; the tolerance
  // and the identity Hessian seed then act on comparable magnitudes.
  const double gmax = g.lpNorm<Eigen::Infinity>();
  const double sigma = gmax > 0 ? gmax : 1.0;
  g /= sigma;
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);

  auto projected_gradient = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
    return (xv - pb.project(xv - gv)).lpNorm<Eigen::Infinity>();
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.projected_gradient = projected_gradient(x, g);
    if (res.projected_gradient < opt.tol) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      break;
    }
    const Eigen::VectorXd lo = pb.lower - x, hi = pb.upper - x;
    Eigen::VectorXd d = qp_subproblem(B, g, lo, hi).step;
    double slope = g.dot(d);
    if (!(slope < 0)) {
      B.setIdentity();
      d = qp_subproblem(B, g, lo, hi).step;
      slope = g.dot(d);
      if (!(slope < 0)) {
        res.converged = true;
        res.message = "no descent direction";
        break;
      }
    }

    bool accepted = false;
    double alpha = 1.0;
    Eigen::VectorXd x_new;
    double f_new = f;
    for (int k = 0; k <= opt.max_backtracks; ++k) {
      x_new = pb.project(x + alpha * d);
      f_new = pb.objective(x_new);
      ++res.evaluations;
      if (f_new < f && f_new / sigma <= f / sigma + opt.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    res.iterations = iter + 1;
    if (!accepted) {
      if (!B.isIdentity()) {
        B.setIdentity();
        continue;
      }
      res.message = "line search failed";
      break;
    }

    Eigen::VectorXd g_new = fd_gradient(pb, x_new) / sigma;
    res.evaluations += 2 * n + 1;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const Eigen::VectorXd Bs = B * s;
    const double sBs = s.dot(Bs);
    if (sBs > 1e-300) {
      const double sy = s.dot(y);
      const double theta = sy >= opt.damping * sBs ? 1.0 : (1.0 - opt.damping) * sBs / (sBs - sy);
      const Eigen::VectorXd r = theta * y + (1.0 - theta) * Bs;
      const double sr = s.dot(r);
      if (sr > 1e-300) B += -Bs * Bs.transpose() / sBs + r * r.transpose() / sr;
    }
    x = x_new;
    f = f_new;
    g = g_new;
    res.trace.push_back({x, f});
    if (iter == opt.max_iter - 1) res.message = "iteration limit";
  }

  res.x = x;
  res.f = f;
  res.projected_gradient = projected_gradient(x, g);
  res.hessian = B;
  if (res.message.empty()) res.message = "iteration limit";
  return res;
}

}  // namespace athero::nlp
