#include "nslfa/optim.hpp"

#include <cmath>
#include <limits>

namespace nslfa {

namespace {

void check_inputs(const Vector& x0, const Vector& mask,
                  const OptimOptions& opts) {
  opts.validate();
  if (x0.size() != mask.size()) {
    throw ShapeMismatch("mask length does not match parameter length");
  }
}

Vector masked(const Vector& g, const Vector& mask) {
  return g.cwiseProduct(mask);
}

void restore_masked(Vector& x, const Vector& x0, const Vector& mask) {
  for (Index i = 0; i < x.size(); ++i) {
    if (mask(i) == 0.0) x(i) = x0(i);
  }
}

}  // namespace

void OptimOptions::validate() const {
  if (max_iters < 1) throw Error("max_iters must be >= 1");
  if (grad_tol <= 0.0 || obj_tol <= 0.0 || gd_step <= 0.0 ||
      scg_sigma0 <= 0.0 || scg_lambda0 <= 0.0) {
    throw Error("optimizer tolerances must be strictly positive");
  }
}

OptimOutcome scg_minimize(const ObjFn& obj, const GradFn& grad,
                          const Vector& x0, const Vector& mask,
                          const OptimOptions& opts) {
  check_inputs(x0, mask, opts);

  OptimOutcome out;
  out.x_final = x0;
  const Index n_free = static_cast<Index>((mask.array() != 0.0).count());

  double f = obj(x0);
  if (!std::isfinite(f)) {
    throw NonFiniteObjective("objective non-finite at the starting point");
  }
  out.trace.push_back(f);
  out.objective_final = f;
  if (n_free == 0) {
    out.converged = StopReason::grad_tol;
    return out;
  }

  Vector x = x0;
  Vector g = masked(grad(x), mask);
  if (!g.allFinite()) {
    throw NonFiniteObjective("gradient non-finite at the starting point");
  }
  if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
    out.converged = StopReason::grad_tol;
    return out;
  }

  // Moller's scaled conjugate gradient with r = -grad.
  Vector r = -g;
  Vector p = r;
  double lambda = opts.scg_lambda0;
  double lambda_bar = 0.0;
  double delta = 0.0;
  bool success = true;
  int fails_in_row = 0;

  for (int k = 1; k <= opts.max_iters; ++k) {
    out.iterations = k;

    const double kappa = p.squaredNorm();
    if (kappa < std::numeric_limits<double>::min()) {
      out.converged = StopReason::grad_tol;
      break;
    }
    double mu = p.dot(r);
    if (mu <= 0.0) {  // direction lost descent; restart on steepest descent
      p = r;
      mu = p.dot(r);
      success = true;
      if (mu <= 0.0) {
        out.converged = StopReason::grad_tol;
        break;
      }
    }

    if (success) {
      const double sigma = opts.scg_sigma0 / std::sqrt(kappa);
      const Vector g_plus = masked(grad(x + sigma * p), mask);
      if (g_plus.allFinite()) {
        delta = p.dot(g_plus - g) / sigma;
      } else {
        delta = std::numeric_limits<double>::quiet_NaN();
      }
    }

    double delta_k = delta + (lambda - lambda_bar) * kappa;
    if (!std::isfinite(delta_k) || delta_k <= 0.0) {
      if (std::isfinite(delta_k)) {
        lambda_bar = 2.0 * (lambda - delta_k / kappa);
        delta_k = -delta_k + lambda * kappa;
        lambda = lambda_bar;
      } else {
        // non-finite curvature estimate: force a failure step
        delta_k = lambda * kappa;
      }
    }

    const double alpha = mu / delta_k;
    Vector x_try = x + alpha * p;
    restore_masked(x_try, x0, mask);
    const double f_try = obj(x_try);

    const double big_delta =
        std::isfinite(f_try)
            ? 2.0 * delta_k * (f - f_try) / (mu * mu)
            : -1.0;

    if (big_delta >= 0.0) {
      const double f_prev = f;
      x = x_try;
      f = f_try;
      out.trace.push_back(f);
      Vector r_new = -masked(grad(x), mask);
      if (!r_new.allFinite()) {
        throw NonFiniteObjective("gradient non-finite at an accepted point");
      }
      g = -r_new;
      lambda_bar = 0.0;
      success = true;
      fails_in_row = 0;

      if (k % static_cast<int>(n_free) == 0) {
        p = r_new;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + beta * p;
      }
      r = r_new;
      if (big_delta >= 0.75) lambda *= 0.25;

      if (r.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
        out.converged = StopReason::grad_tol;
        break;
      }
      if (f_prev - f <= opts.obj_tol * std::max(1.0, std::abs(f_prev))) {
        out.converged = StopReason::obj_tol;
        break;
      }
    } else {
      lambda_bar = lambda;
      success = false;
      ++fails_in_row;
    }

    if (big_delta < 0.25) {
      lambda += delta_k * (1.0 - big_delta) / kappa;
    }

    if (fails_in_row >= 50 || lambda > 1e20) {
      if (!std::isfinite(f_try) && fails_in_row >= 50) {
        throw NonFiniteObjective(
            "objective stayed non-finite during step-size recovery");
      }
      out.converged = StopReason::obj_tol;
      break;
    }
    if (k == opts.max_iters) out.converged = StopReason::max_iters;
  }

  out.x_final = x;
  out.objective_final = f;
  return out;
}

OptimOutcome gd_minimize(const ObjFn& obj, const GradFn& grad,
                         const Vector& x0, const Vector& mask,
                         const OptimOptions& opts) {
  check_inputs(x0, mask, opts);

  OptimOutcome out;
  out.x_final = x0;

  double f = obj(x0);
  if (!std::isfinite(f)) {
    throw NonFiniteObjective("objective non-finite at the starting point");
  }
  out.trace.push_back(f);
  out.objective_final = f;
  if ((mask.array() != 0.0).count() == 0) {
    out.converged = StopReason::grad_tol;
    return out;
  }

  Vector x = x0;
  double step = opts.gd_step;
  constexpr double kMinStep = 1e-18;

  for (int k = 1; k <= opts.max_iters; ++k) {
    out.iterations = k;
    const Vector g = masked(grad(x), mask);
    if (!g.allFinite()) {
      throw NonFiniteObjective("gradient non-finite during descent");
    }
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      out.converged = StopReason::grad_tol;
      break;
    }

    const double g2 = g.squaredNorm();
    double t = step;
    bool accepted = false;
    bool saw_finite = false;
    while (t >= kMinStep) {
      Vector x_try = x - t * g;
      restore_masked(x_try, x0, mask);
      const double f_try = obj(x_try);
      if (std::isfinite(f_try)) {
        saw_finite = true;
        if (f_try <= f - opts.gd_armijo_c * t * g2) {
          const double f_prev = f;
          x = x_try;
          f = f_try;
          out.trace.push_back(f);
          step = t * 2.0;
          accepted = true;
          if (f_prev - f <= opts.obj_tol * std::max(1.0, std::abs(f_prev))) {
            out.converged = StopReason::obj_tol;
          }
          break;
        }
      }
      t *= opts.gd_backtrack;
    }

    if (!accepted) {
      if (!saw_finite) {
        throw NonFiniteObjective(
            "objective non-finite along the whole backtracking ray");
      }
      out.converged = StopReason::obj_tol;  // no decrease possible
      break;
    }
    if (out.converged == StopReason::obj_tol) break;
    if (k == opts.max_iters) out.converged = StopReason::max_iters;
  }

  out.x_final = x;
  out.objective_final = f;
  return out;
}

OptimOutcome minimize(const ObjFn& obj, const GradFn& grad, const Vector& x0,
                      const Vector& mask, const OptimOptions& opts) {
  return opts.algorithm == OptimOptions::Algorithm::scg
             ? scg_minimize(obj, grad, x0, mask, opts)
             : gd_minimize(obj, grad, x0, mask, opts);
}

}  // namespace nslfa
