#pragma once

#include "nslfa/estimator.hpp"

namespace nslfa {

struct LinearFaOptions {
  double ridge = 1e-6;   // on X for uniqueness of the alternating solves
  double obj_tol = 1e-8;
  int max_iters = 500;
  bool center = true;    // column-center Y before the alternating solves
};

struct LinearFaFit {
  FactorScores x_hat;
  Loadings a_hat;
  double sigma2_hat = 0.0;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

// Constrained linear factor analysis by alternating least squares;
// loading rows are solved only over their free coordinates.
LinearFaFit fit_linear_fa(const Dataset& y, const DesignMatrix& q,
                          const LinearFaOptions& opts = {});

// GPLVM-equivalent comparator: the joint MAP with an all-ones design.
FitResult fit_unconstrained(const Dataset& y, Index k, const FitConfig& cfg);

struct VarimaxResult {
  Matrix rotated;   // A R
  Matrix rotation;  // orthogonal K x K
  double criterion = 0.0;
  int iterations = 0;
};

// Orthogonal rotation maximizing the varimax simplicity criterion
// sum_k [ sum_j a_jk^4 - (sum_j a_jk^2)^2 / J ] by pairwise rotations.
VarimaxResult varimax(const Matrix& a, double tol = 1e-10,
                      int max_sweeps = 200);

double varimax_criterion(const Matrix& a);

// Row-wise threshold used to derive a design from rotated loadings:
// q(j,k) = 1 iff |a_jk| >= threshold * max_k |a_jk|.
DesignMatrix threshold_design(const Matrix& a, double threshold);

}  // namespace nslfa
