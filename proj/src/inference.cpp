#include "nslfa/inference.hpp"

#include <cmath>
#include <numbers>

namespace nslfa {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_consistent(const Dataset& y, const GramSet& g) {
  if (g.item_count() != y.items() || g.n() != y.n()) {
    throw ShapeMismatch("GramSet does not match dataset dimensions");
  }
}

}  // namespace

double marginal_loglik(const Dataset& y, const GramSet& g) {
  check_consistent(y, g);
  const double n = static_cast<double>(y.n());
  double ll = 0.0;
  for (Index j = 0; j < y.items(); ++j) {
    const ItemGram& item = g.items[static_cast<std::size_t>(j)];
    ll += -0.5 * n * kLog2Pi - 0.5 * item.log_det() -
          0.5 * y.col(j).dot(item.alpha);
  }
  return ll;
}

double joint_value_from_gram(const Dataset& y, const GramSet& g,
                             const FactorScores& x, const PriorSpec& prior) {
  check_consistent(y, g);
  double ll = prior.log_density(x.x);
  for (Index j = 0; j < y.items(); ++j) {
    const ItemGram& item = g.items[static_cast<std::size_t>(j)];
    ll += -0.5 * item.log_det() - 0.5 * y.col(j).dot(item.alpha);
  }
  return ll;
}

double joint_log_posterior(const FactorScores& x, const Loadings& a,
                           const Hyperparams& h, const Dataset& y,
                           const DesignMatrix& q, const PriorSpec& prior) {
  require_zero_pattern(a.a, q);
  const GramSet g = build_gram_set(x, a, h, y);
  return joint_value_from_gram(y, g, x, prior);
}

JointGrad grad_joint_from_gram(const FactorScores& x, const Loadings& a,
                               const Dataset& y, const DesignMatrix& q,
                               const PriorSpec& prior, const GramSet& g) {
  check_consistent(y, g);
  const Index n = y.n();
  const Index nj = y.items();
  const Index nk = x.factors();
  const Hyperparams& h = g.h;

  JointGrad grad;
  grad.x = Matrix::Zero(n, nk);
  grad.a = Matrix::Zero(nj, nk);
  grad.theta_log.setZero();

  double dw = 0.0, dtau = 0.0, dsigma2 = 0.0;
  const Matrix identity = Matrix::Identity(n, n);
  for (Index j = 0; j < nj; ++j) {
    const ItemGram& item = g.items[static_cast<std::size_t>(j)];
    // B_j = alpha_j alpha_j' - K_j^{-1}; every block is a trace against it.
    Matrix b = -item.solve(identity);
    b.noalias() += item.alpha * item.alpha.transpose();

    const Matrix bc = b.cwiseProduct(item.c);
    dtau += 0.5 * bc.sum() / h.tau;
    dsigma2 += 0.5 * b.trace();

    // tr(B dK/dw) = -sum_{il} bc_il (t_i - t_l)^2 / 2
    //            = t' BC t - (t.^2)' (BC 1).
    const Vector bc_row_sums = bc.rowwise().sum();
    const Vector bc_t = bc * item.t;
    dw += 0.5 * (item.t.dot(bc_t) -
                 item.t.array().square().matrix().dot(bc_row_sums));

    // Shared per-item vector for the score and loading blocks:
    // v_i = sum_l bc_il (t_i - t_l). Then
    //   dl/dx_ik = -w a_jk v_i   and   dl/da_jk = -w v' x_k.
    const Vector v =
        item.t.cwiseProduct(bc_row_sums) - bc_t;
    grad.x.noalias() += (-h.w) * v * a.a.row(j);
    grad.a.row(j).noalias() = (-h.w) * (x.x.transpose() * v).transpose();
  }

  // Mask the constrained loadings to exact zeros.
  for (Index j = 0; j < nj; ++j) {
    for (Index k = 0; k < nk; ++k) {
      if (!q.loads(j, k)) grad.a(j, k) = 0.0;
    }
  }

  if (prior.x_prior == XPrior::standard_normal) grad.x -= x.x;

  grad.theta_log << h.w * dw, h.tau * dtau, h.sigma2 * dsigma2;
  return grad;
}

JointGrad grad_joint(const FactorScores& x, const Loadings& a,
                     const Hyperparams& h, const Dataset& y,
                     const DesignMatrix& q, const PriorSpec& prior) {
  require_zero_pattern(a.a, q);
  const GramSet g = build_gram_set(x, a, h, y);
  return grad_joint_from_gram(x, a, y, q, prior, g);
}

Eigen::Vector3d grad_marginal_theta_log(const GramSet& g) {
  const Index n = g.n();
  const Hyperparams& h = g.h;
  double dw = 0.0, dtau = 0.0, dsigma2 = 0.0;
  const Matrix identity = Matrix::Identity(n, n);
  for (const ItemGram& item : g.items) {
    Matrix b = -item.solve(identity);
    b.noalias() += item.alpha * item.alpha.transpose();
    const Matrix bc = b.cwiseProduct(item.c);
    dtau += 0.5 * bc.sum() / h.tau;
    dsigma2 += 0.5 * b.trace();
    const Vector bc_row_sums = bc.rowwise().sum();
    const Vector bc_t = bc * item.t;
    dw += 0.5 * (item.t.dot(bc_t) -
                 item.t.array().square().matrix().dot(bc_row_sums));
  }
  Eigen::Vector3d out;
  out << h.w * dw, h.tau * dtau, h.sigma2 * dsigma2;
  return out;
}

double posterior_f_mean(double t_star, Index j, const GramSet& g) {
  if (j < 0 || j >= g.item_count()) {
    throw IndexOutOfRange("item index " + std::to_string(j));
  }
  const ItemGram& item = g.items[static_cast<std::size_t>(j)];
  return se_kernel_vector(t_star, item.t, g.h).dot(item.alpha);
}

Vector posterior_f_train(Index j, const GramSet& g) {
  if (j < 0 || j >= g.item_count()) {
    throw IndexOutOfRange("item index " + std::to_string(j));
  }
  const ItemGram& item = g.items[static_cast<std::size_t>(j)];
  return item.c * item.alpha;
}

Matrix posterior_f_cov_train(Index j, const GramSet& g,
                             const Hyperparams& h) {
  if (j < 0 || j >= g.item_count()) {
    throw IndexOutOfRange("item index " + std::to_string(j));
  }
  const ItemGram& item = g.items[static_cast<std::size_t>(j)];
  return h.sigma2 * (item.solve(item.c)).transpose();
}

LinkEvaluator::LinkEvaluator(const GramSet& g, Index j)
    : t_(g.items.at(static_cast<std::size_t>(j)).t),
      alpha_(g.items.at(static_cast<std::size_t>(j)).alpha),
      w_(g.h.w),
      tau_(g.h.tau) {}

double LinkEvaluator::value(double t_star) const {
  return (tau_ * (-0.5 * w_ * (t_.array() - t_star).square()).exp())
      .matrix()
      .dot(alpha_);
}

double LinkEvaluator::deriv(double t_star) const {
  // d psi_l / dt* = -w (t* - t_l) k(t*, t_l)
  const auto psi = tau_ * (-0.5 * w_ * (t_.array() - t_star).square()).exp();
  return (-w_ * (t_star - t_.array()) * psi).matrix().dot(alpha_);
}

double step2_objective_scores(const Vector& x_cand, Index i,
                              const std::vector<LinkEvaluator>& links,
                              const Loadings& a, const Dataset& y) {
  if (i < 0 || i >= y.n()) throw IndexOutOfRange("row index");
  double obj = 0.0;
  for (Index j = 0; j < y.items(); ++j) {
    const double t = a.a.row(j).dot(x_cand);
    const double f = links[static_cast<std::size_t>(j)].value(t);
    obj += y.y()(i, j) * f - 0.5 * f * f;
  }
  return obj;
}

Vector step2_grad_scores(const Vector& x_cand, Index i,
                         const std::vector<LinkEvaluator>& links,
                         const Loadings& a, const Dataset& y) {
  if (i < 0 || i >= y.n()) throw IndexOutOfRange("row index");
  Vector grad = Vector::Zero(x_cand.size());
  for (Index j = 0; j < y.items(); ++j) {
    const double t = a.a.row(j).dot(x_cand);
    const LinkEvaluator& link = links[static_cast<std::size_t>(j)];
    const double f = link.value(t);
    const double fp = link.deriv(t);
    grad += (y.y()(i, j) - f) * fp * a.a.row(j).transpose();
  }
  return grad;
}

double step2_objective_loadings(const Vector& a_cand, Index j,
                                const LinkEvaluator& link,
                                const FactorScores& x, const Dataset& y,
                                const DesignMatrix& q) {
  if (j < 0 || j >= y.items()) throw IndexOutOfRange("item index");
  for (Index k = 0; k < q.factors(); ++k) {
    if (!q.loads(j, k) && a_cand(k) != 0.0) {
      throw ZeroPatternViolated("candidate row violates design zeros");
    }
  }
  double obj = 0.0;
  for (Index i = 0; i < y.n(); ++i) {
    const double t = x.x.row(i).dot(a_cand);
    const double f = link.value(t);
    obj += y.y()(i, j) * f - 0.5 * f * f;
  }
  return obj;
}

Vector step2_grad_loadings(const Vector& a_cand, Index j,
                           const LinkEvaluator& link, const FactorScores& x,
                           const Dataset& y, const DesignMatrix& q) {
  if (j < 0 || j >= y.items()) throw IndexOutOfRange("item index");
  Vector grad = Vector::Zero(a_cand.size());
  for (Index i = 0; i < y.n(); ++i) {
    const double t = x.x.row(i).dot(a_cand);
    const double f = link.value(t);
    const double fp = link.deriv(t);
    grad += (y.y()(i, j) - f) * fp * x.x.row(i).transpose();
  }
  for (Index k = 0; k < q.factors(); ++k) {
    if (!q.loads(j, k)) grad(k) = 0.0;
  }
  return grad;
}

}  // namespace nslfa
