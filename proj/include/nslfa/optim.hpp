#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nslfa/errors.hpp"
#include "nslfa/types.hpp"

namespace nslfa {

struct OptimOptions {
  enum class Algorithm { scg, gd };

  Algorithm algorithm = Algorithm::scg;
  int max_iters = 500;
  double grad_tol = 1e-5;  // infinity norm of the masked gradient
  double obj_tol = 1e-9;   // relative objective change between accepted steps
  double gd_step = 1e-2;   // initial step, grown/backtracked adaptively
  double gd_backtrack = 0.5;
  double gd_armijo_c = 1e-4;
  double scg_sigma0 = 1e-4;
  double scg_lambda0 = 1e-6;
  std::uint64_t seed = 0;  // reserved for stochastic restarts at call sites

  void validate() const;
};

enum class StopReason { grad_tol, obj_tol, max_iters };

struct OptimOutcome {
  Vector x_final;
  double objective_final = 0.0;
  int iterations = 0;
  StopReason converged = StopReason::max_iters;
  std::vector<double> trace;  // objective at x0 then after each accepted step
};

using ObjFn = std::function<double(const Vector&)>;
using GradFn = std::function<Vector(const Vector&)>;

// Scaled conjugate gradient minimization restricted to the coordinates
// where mask != 0; masked coordinates of the result are bit-identical to
// x0. Throws NonFiniteObjective when the objective or gradient is
// non-finite at the start, or turns non-finite and no recovery succeeds.
OptimOutcome scg_minimize(const ObjFn& obj, const GradFn& grad,
                          const Vector& x0, const Vector& mask,
                          const OptimOptions& opts);

// Backtracking (Armijo) gradient descent under the same masking contract.
OptimOutcome gd_minimize(const ObjFn& obj, const GradFn& grad,
                         const Vector& x0, const Vector& mask,
                         const OptimOptions& opts);

// Dispatch on opts.algorithm.
OptimOutcome minimize(const ObjFn& obj, const GradFn& grad, const Vector& x0,
                      const Vector& mask, const OptimOptions& opts);

}  // namespace nslfa
