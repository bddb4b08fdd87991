#pragma once

#include <vector>

#include "nslfa/kernel.hpp"

namespace nslfa {

// Prior choices entering the joint log posterior. Loadings and
// hyperparameters always carry flat priors (zero contribution); the
// factor-score prior is switchable because a flat X prior leaves the
// objective scale-degenerate in (w, X).
enum class XPrior { standard_normal, uniform };

struct PriorSpec {
  XPrior x_prior = XPrior::standard_normal;

  double log_density(const Matrix& x) const {
    return x_prior == XPrior::standard_normal ? -0.5 * x.squaredNorm() : 0.0;
  }
};

// Sum over items of the full marginal Gaussian log likelihood, including
// the -(N/2) log 2pi constant per item.
double marginal_loglik(const Dataset& y, const GramSet& g);

// Joint log posterior of (X, A, theta): per-item terms
// -log|K_j|/2 - y_j' K_j^{-1} y_j / 2, plus log p(X). No 2pi constant.
double joint_log_posterior(const FactorScores& x, const Loadings& a,
                           const Hyperparams& h, const Dataset& y,
                           const DesignMatrix& q, const PriorSpec& prior);

// Gradient blocks of the joint log posterior. grad_a is exactly zero at
// every constrained position; theta_log is the gradient in log-parameter
// coordinates (log w, log tau, log sigma2).
struct JointGrad {
  Matrix x;
  Matrix a;
  Eigen::Vector3d theta_log;
};
JointGrad grad_joint(const FactorScores& x, const Loadings& a,
                     const Hyperparams& h, const Dataset& y,
                     const DesignMatrix& q, const PriorSpec& prior);

// Joint value + gradient sharing one Gram build; `g` must have been built
// from exactly (x, a, h, y).
double joint_value_from_gram(const Dataset& y, const GramSet& g,
                             const FactorScores& x, const PriorSpec& prior);
JointGrad grad_joint_from_gram(const FactorScores& x, const Loadings& a,
                               const Dataset& y, const DesignMatrix& q,
                               const PriorSpec& prior, const GramSet& g);

// Gradient of the Step-1 marginal likelihood w.r.t. (log w, log tau,
// log sigma2); the per-item 2pi constants drop out.
Eigen::Vector3d grad_marginal_theta_log(const GramSet& g);

// GP posterior mean of f_j at an arbitrary index value t*.
double posterior_f_mean(double t_star, Index j, const GramSet& g);

// Posterior mean vector at the training indices: mu_j = C_j alpha_j.
Vector posterior_f_train(Index j, const GramSet& g);

// Posterior covariance at the training indices:
// sigma^2 C_j (C_j + sigma^2 I)^{-1}.
Matrix posterior_f_cov_train(Index j, const GramSet& g,
                             const Hyperparams& h);

// Frozen evaluator for an estimated link f_j, with its derivative in t.
// Copies the per-item state so the source GramSet can be discarded.
class LinkEvaluator {
 public:
  LinkEvaluator(const GramSet& g, Index j);

  double value(double t_star) const;
  double deriv(double t_star) const;

 private:
  Vector t_;
  Vector alpha_;
  double w_;
  double tau_;
};

// Step-2 objective for the scores of one row i:
// l_i(x) = sum_j y_ij f_j(a_j' x) - f_j(a_j' x)^2 / 2.
double step2_objective_scores(const Vector& x_cand, Index i,
                              const std::vector<LinkEvaluator>& links,
                              const Loadings& a, const Dataset& y);
Vector step2_grad_scores(const Vector& x_cand, Index i,
                         const std::vector<LinkEvaluator>& links,
                         const Loadings& a, const Dataset& y);

// Step-2 objective for the loadings of one item j, restricted to the free
// coordinates of row j:
// l_j(a) = sum_i y_ij f_j(a' x_i) - f_j(a' x_i)^2 / 2.
double step2_objective_loadings(const Vector& a_cand, Index j,
                                const LinkEvaluator& link,
                                const FactorScores& x, const Dataset& y,
                                const DesignMatrix& q);
Vector step2_grad_loadings(const Vector& a_cand, Index j,
                           const LinkEvaluator& link, const FactorScores& x,
                           const Dataset& y, const DesignMatrix& q);

}  // namespace nslfa
