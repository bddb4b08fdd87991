#include <doctest.h>

#include <cmath>

#include <Eigen/LU>
#include <numbers>

#include "nslfa/inference.hpp"
#include "test_helpers.hpp"

using namespace nslfa;
using nslfa::testing::rel_err;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// dense oracle: explicit inverse and determinant, no Cholesky reuse
double dense_marginal(const Matrix& y, const FactorScores& x,
                      const Loadings& a, const Hyperparams& h) {
  const Index n = y.rows();
  double ll = 0.0;
  const Matrix t = x.x * a.a.transpose();
  for (Index j = 0; j < y.cols(); ++j) {
    Matrix k(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index l = 0; l < n; ++l) {
        k(i, l) = se_kernel(t(i, j), t(l, j), h);
      }
    }
    k.diagonal().array() += h.sigma2;
    const Matrix kinv = k.inverse();
    ll += -0.5 * static_cast<double>(n) * kLog2Pi -
          0.5 * std::log(k.determinant()) -
          0.5 * (y.col(j).transpose() * kinv * y.col(j))(0, 0);
  }
  return ll;
}

}  // namespace

TEST_CASE("marginal_loglik scalar and dense oracles") {
  // single-point closed form through the per-item gram
  const Hyperparams h{1.0, 0.9, 0.3};
  {
    Vector t(1), y(1);
    t << 0.2;
    y << 1.1;
    const ItemGram g = build_item_gram(t, h, y);
    const double k = h.sigma2 + h.tau;
    const double expected = -0.5 * std::log(2 * std::numbers::pi * k) -
                            1.1 * 1.1 / (2 * k);
    const double got =
        -0.5 * kLog2Pi - 0.5 * g.log_det() - 0.5 * y.dot(g.alpha);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }

  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const auto cfg = testing::random_config(rng, 6, 3, 2);
    const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
    const double fast = marginal_loglik(cfg.y, g);
    const double dense = dense_marginal(cfg.y.y(), cfg.x, cfg.a, cfg.h);
    CHECK(rel_err(fast, dense) <= 1e-10);
  }
}

TEST_CASE("marginal_loglik on zero data keeps only the determinant terms") {
  Rng rng(32);
  auto cfg = testing::random_config(rng, 5, 2, 2);
  const Dataset zero(Matrix::Zero(5, 2));
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, zero);
  double expected = 0.0;
  for (const auto& item : g.items) {
    expected += -0.5 * 5 * kLog2Pi - 0.5 * item.log_det();
  }
  CHECK(marginal_loglik(zero, g) == doctest::Approx(expected));
}

TEST_CASE("large w approaches the independent-Gaussian limit") {
  Rng rng(33);
  auto cfg = testing::random_config(rng, 6, 2, 2);
  cfg.h.w = 1e6;
  // distinct indices almost surely; rebuild grams at the huge lengthscale
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
  const double got = marginal_loglik(cfg.y, g);
  double limit = 0.0;
  const double v = cfg.h.sigma2 + cfg.h.tau;
  for (Index j = 0; j < 2; ++j) {
    for (Index i = 0; i < 6; ++i) {
      limit += -0.5 * std::log(2 * std::numbers::pi * v) -
               cfg.y.y()(i, j) * cfg.y.y()(i, j) / (2 * v);
    }
  }
  CHECK(rel_err(got, limit) <= 1e-4);
}

TEST_CASE("joint posterior equals marginal minus the 2pi constant") {
  Rng rng(34);
  const auto cfg = testing::random_config(rng, 5, 3, 2);
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
  const PriorSpec uniform{XPrior::uniform};
  const double joint =
      joint_log_posterior(cfg.x, cfg.a, cfg.h, cfg.y, cfg.q, uniform);
  const double marginal = marginal_loglik(cfg.y, g);
  CHECK(joint - marginal ==
        doctest::Approx(3 * (5.0 / 2.0) * kLog2Pi).epsilon(1e-10));

  // standard-normal prior at X = 0 contributes exactly zero
  FactorScores zero_x{Matrix::Zero(5, 2)};
  const PriorSpec normal{XPrior::standard_normal};
  const double with_prior = joint_log_posterior(zero_x, cfg.a, cfg.h, cfg.y,
                                                cfg.q, normal);
  const double without = joint_log_posterior(zero_x, cfg.a, cfg.h, cfg.y,
                                             cfg.q, uniform);
  CHECK(with_prior == doctest::Approx(without));
}

TEST_CASE("joint posterior rejects zero-pattern violations") {
  Rng rng(35);
  const auto cfg = testing::random_config(rng, 4, 3, 2);
  Matrix bad = cfg.a.a;
  bool flipped = false;
  for (Index j = 0; j < 3 && !flipped; ++j) {
    for (Index k = 0; k < 2 && !flipped; ++k) {
      if (!cfg.q.loads(j, k)) {
        bad(j, k) = 0.5;
        flipped = true;
      }
    }
  }
  REQUIRE(flipped);
  CHECK_THROWS_AS(joint_log_posterior(cfg.x, Loadings{bad}, cfg.h, cfg.y,
                                      cfg.q, PriorSpec{}),
                  ZeroPatternViolated);
}

TEST_CASE("grad_joint blocks match finite differences") {
  Rng rng(36);
  const PriorSpec prior{XPrior::standard_normal};
  for (int rep = 0; rep < 4; ++rep) {
    const auto cfg = testing::random_config(rng, 6, 3, 2);
    const JointGrad g =
        grad_joint(cfg.x, cfg.a, cfg.h, cfg.y, cfg.q, prior);

    const double step = 1e-5;
    for (Index i = 0; i < 6; ++i) {
      for (Index k = 0; k < 2; ++k) {
        FactorScores xp = cfg.x, xm = cfg.x;
        xp.x(i, k) += step;
        xm.x(i, k) -= step;
        const double fd =
            (joint_log_posterior(xp, cfg.a, cfg.h, cfg.y, cfg.q, prior) -
             joint_log_posterior(xm, cfg.a, cfg.h, cfg.y, cfg.q, prior)) /
            (2 * step);
        CHECK(rel_err(g.x(i, k), fd, 1e-3) <= 1e-5);
      }
    }
    for (Index j = 0; j < 3; ++j) {
      for (Index k = 0; k < 2; ++k) {
        if (!cfg.q.loads(j, k)) {
          CHECK(g.a(j, k) == 0.0);
          continue;
        }
        Matrix ap = cfg.a.a, am = cfg.a.a;
        ap(j, k) += step;
        am(j, k) -= step;
        const double fd =
            (joint_log_posterior(cfg.x, Loadings{ap}, cfg.h, cfg.y, cfg.q,
                                 prior) -
             joint_log_posterior(cfg.x, Loadings{am}, cfg.h, cfg.y, cfg.q,
                                 prior)) /
            (2 * step);
        CHECK(rel_err(g.a(j, k), fd, 1e-3) <= 1e-5);
      }
    }
    // log-theta coordinates
    for (int p = 0; p < 3; ++p) {
      auto at_log = [&](double delta) {
        Hyperparams h = cfg.h;
        double* field = p == 0 ? &h.w : p == 1 ? &h.tau : &h.sigma2;
        *field = std::exp(std::log(*field) + delta);
        return joint_log_posterior(cfg.x, cfg.a, h, cfg.y, cfg.q, prior);
      };
      const double fd = (at_log(step) - at_log(-step)) / (2 * step);
      CHECK(rel_err(g.theta_log(p), fd, 1e-3) <= 1e-5);
    }
  }
}

TEST_CASE("grad on zero data reduces to the trace term") {
  Rng rng(37);
  const auto cfg = testing::random_config(rng, 5, 2, 2);
  const Dataset zero(Matrix::Zero(5, 2));
  const PriorSpec uniform{XPrior::uniform};
  const JointGrad g = grad_joint(cfg.x, cfg.a, cfg.h, zero, cfg.q, uniform);

  const GramSet gs = build_gram_set(cfg.x, cfg.a, cfg.h, zero);
  Eigen::Vector3d direct = Eigen::Vector3d::Zero();
  for (Index j = 0; j < 2; ++j) {
    const ThetaDerivs d = dk_dtheta(gs, cfg.h, j);
    const Matrix kinv =
        gs.items[static_cast<std::size_t>(j)].solve(Matrix::Identity(5, 5));
    direct(0) += -0.5 * (kinv.cwiseProduct(d.dw)).sum();
    direct(1) += -0.5 * (kinv.cwiseProduct(d.dtau)).sum();
    direct(2) += -0.5 * (kinv.cwiseProduct(d.dsigma2)).sum();
  }
  CHECK(rel_err(g.theta_log(0), cfg.h.w * direct(0)) <= 1e-9);
  CHECK(rel_err(g.theta_log(1), cfg.h.tau * direct(1)) <= 1e-9);
  CHECK(rel_err(g.theta_log(2), cfg.h.sigma2 * direct(2)) <= 1e-9);
}

TEST_CASE("sign-flip covariance of the objective") {
  Rng rng(38);
  for (int rep = 0; rep < 5; ++rep) {
    const auto cfg = testing::random_config(rng, 5, 3, 2);
    for (const XPrior xp : {XPrior::standard_normal, XPrior::uniform}) {
      const PriorSpec prior{xp};
      const double base =
          joint_log_posterior(cfg.x, cfg.a, cfg.h, cfg.y, cfg.q, prior);
      FactorScores xf = cfg.x;
      Loadings af = cfg.a;
      xf.x.col(1) *= -1.0;
      af.a.col(1) *= -1.0;
      const double flipped =
          joint_log_posterior(xf, af, cfg.h, cfg.y, cfg.q, prior);
      CHECK(rel_err(base, flipped) <= 1e-12);
    }
  }
}

TEST_CASE("posterior link mean: limits and interpolation") {
  Rng rng(39);
  auto cfg = testing::random_config(rng, 6, 2, 2);

  // tau -> 0 pulls the prediction to the prior mean
  {
    Hyperparams h = cfg.h;
    h.tau = 1e-14;
    const GramSet g = build_gram_set(cfg.x, cfg.a, h, cfg.y);
    CHECK(std::abs(posterior_f_mean(0.3, 0, g)) <= 1e-10);
  }

  // far queries decay to zero
  {
    const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
    const double far =
        g.items[0].t.cwiseAbs().maxCoeff() + 10.0 / std::sqrt(cfg.h.w);
    CHECK(std::abs(posterior_f_mean(far, 0, g)) <=
          1e-6 * cfg.y.y().cwiseAbs().maxCoeff());
  }

  // near-noiseless GP interpolates well-separated training values
  {
    const Hyperparams h{1.0, 1.0, 1e-8};
    const Vector t = Vector::LinSpaced(6, -2.0, 2.0);
    const Vector y = cfg.y.col(0);
    GramSet g;
    g.h = h;
    g.items.push_back(build_item_gram(t, h, y));
    const double tol = 1e-3 * y.cwiseAbs().maxCoeff();
    for (Index i = 0; i < 6; ++i) {
      CHECK(std::abs(posterior_f_mean(t(i), 0, g) - y(i)) <= tol);
    }
  }
}

TEST_CASE("posterior_f_train consistency, limits, and dense oracle") {
  Rng rng(40);
  const auto cfg = testing::random_config(rng, 6, 2, 2);
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);

  const Vector mu = posterior_f_train(0, g);
  for (Index i = 0; i < 6; ++i) {
    CHECK(rel_err(mu(i), posterior_f_mean(g.items[0].t(i), 0, g)) <= 1e-12);
  }

  // dense oracle C (C + s2 I)^-1 y
  const Matrix& c = g.items[0].c;
  Matrix k = c;
  k.diagonal().array() += cfg.h.sigma2;
  const Vector dense = c * k.inverse() * cfg.y.col(0);
  CHECK((mu - dense).norm() <= 1e-8 * std::max(1.0, dense.norm()));

  // huge noise flattens the estimate
  Hyperparams noisy = cfg.h;
  noisy.sigma2 = 1e12;
  const GramSet g2 = build_gram_set(cfg.x, cfg.a, noisy, cfg.y);
  CHECK(posterior_f_train(0, g2).cwiseAbs().maxCoeff() <= 1e-9);

  // linearity in y
  const Dataset scaled(3.0 * cfg.y.y());
  const GramSet g3 = build_gram_set(cfg.x, cfg.a, cfg.h, scaled);
  CHECK((posterior_f_train(0, g3) - 3.0 * mu).cwiseAbs().maxCoeff() <=
        1e-10);
}

TEST_CASE("posterior_f_cov_train closed forms") {
  const Hyperparams h{1.0, 0.8, 0.4};
  Vector t(1), y(1);
  t << 0.0;
  y << 1.0;
  GramSet g;
  g.h = h;
  g.items.push_back(build_item_gram(t, h, y));
  const Matrix cov = posterior_f_cov_train(0, g, h);
  CHECK(cov(0, 0) ==
        doctest::Approx(h.sigma2 * h.tau / (h.sigma2 + h.tau)));

  Rng rng(41);
  const auto cfg = testing::random_config(rng, 6, 2, 2);
  const GramSet gs = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
  const Matrix c2 = posterior_f_cov_train(1, gs, cfg.h);
  CHECK((c2 - c2.transpose()).cwiseAbs().maxCoeff() <= 1e-10);

  Hyperparams tiny = cfg.h;
  tiny.sigma2 = 1e-300;
  const GramSet g0 = build_gram_set(cfg.x, cfg.a, tiny, cfg.y);
  CHECK(posterior_f_cov_train(0, g0, tiny).cwiseAbs().maxCoeff() <= 1e-290);
}

TEST_CASE("step-2 objectives and gradients") {
  Rng rng(42);
  const auto cfg = testing::random_config(rng, 6, 3, 2);
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
  std::vector<LinkEvaluator> links;
  for (Index j = 0; j < 3; ++j) links.emplace_back(g, j);

  // vanishing links make both objectives identically zero
  {
    Hyperparams h0 = cfg.h;
    h0.tau = 1e-14;
    const GramSet gz = build_gram_set(cfg.x, cfg.a, h0, cfg.y);
    std::vector<LinkEvaluator> zero_links;
    for (Index j = 0; j < 3; ++j) zero_links.emplace_back(gz, j);
    Vector xc(2);
    xc << 0.4, -0.2;
    CHECK(std::abs(step2_objective_scores(xc, 0, zero_links, cfg.a, cfg.y)) <=
          1e-12);
    Vector ac = cfg.a.a.row(0).transpose();
    CHECK(std::abs(step2_objective_loadings(ac, 0, zero_links[0], cfg.x,
                                            cfg.y, cfg.q)) <= 1e-12);
  }

  // finite-difference gradients
  const double step = 1e-6;
  for (Index i = 0; i < 3; ++i) {
    const Vector xc = cfg.x.x.row(i).transpose();
    const Vector grad = step2_grad_scores(xc, i, links, cfg.a, cfg.y);
    for (Index k = 0; k < 2; ++k) {
      Vector xp = xc, xm = xc;
      xp(k) += step;
      xm(k) -= step;
      const double fd =
          (step2_objective_scores(xp, i, links, cfg.a, cfg.y) -
           step2_objective_scores(xm, i, links, cfg.a, cfg.y)) /
          (2 * step);
      CHECK(rel_err(grad(k), fd, 1e-3) <= 1e-5);
    }
  }
  for (Index j = 0; j < 3; ++j) {
    const Vector ac = cfg.a.a.row(j).transpose();
    const Vector grad =
        step2_grad_loadings(ac, j, links[static_cast<std::size_t>(j)], cfg.x,
                            cfg.y, cfg.q);
    for (Index k = 0; k < 2; ++k) {
      if (!cfg.q.loads(j, k)) {
        CHECK(grad(k) == 0.0);
        continue;
      }
      Vector ap = ac, am = ac;
      ap(k) += step;
      am(k) -= step;
      const double fd =
          (step2_objective_loadings(ap, j, links[static_cast<std::size_t>(j)],
                                    cfg.x, cfg.y, cfg.q) -
           step2_objective_loadings(am, j, links[static_cast<std::size_t>(j)],
                                    cfg.x, cfg.y, cfg.q)) /
          (2 * step);
      CHECK(rel_err(grad(k), fd, 1e-3) <= 1e-5);
    }
  }
}

TEST_CASE("step-2 score update drives the link to the observation") {
  // one item, one factor: the maximizer of y f - f^2/2 sits where f = y
  const Index n = 12;
  Matrix x(n, 1);
  x.col(0) = Vector::LinSpaced(n, -2.0, 2.0);
  Matrix a(1, 1);
  a << 1.0;
  const DesignMatrix q(IntMatrix::Ones(1, 1));
  Matrix y(n, 1);
  y.col(0) = 0.8 * x.col(0);  // near-linear response, no noise
  const Dataset data(y);
  const Hyperparams h{1.0, 1.0, 1e-4};
  const FactorScores xs{x};
  const Loadings al{a};
  const GramSet g = build_gram_set(xs, al, h, data);
  std::vector<LinkEvaluator> links{LinkEvaluator(g, 0)};

  const Index i = 4;
  double best_val = -1e300;
  double best_x = 0.0;
  for (double cand = -2.0; cand <= 2.0; cand += 1e-3) {
    Vector xc(1);
    xc << cand;
    const double v = step2_objective_scores(xc, i, links, al, data);
    if (v > best_val) {
      best_val = v;
      best_x = cand;
    }
  }
  CHECK(std::abs(links[0].value(best_x) - y(i, 0)) <= 0.02);
}
