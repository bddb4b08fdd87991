#include <doctest.h>

#include <cmath>

#include "nslfa/kernel.hpp"
#include "test_helpers.hpp"

using namespace nslfa;
using nslfa::testing::rel_err;

TEST_CASE("se_kernel closed forms") {
  const Hyperparams h{1.0, 1.0, 0.1};
  CHECK(se_kernel(0.7, 0.7, h) == doctest::Approx(1.0));
  CHECK(se_kernel(3.0, -5.0, Hyperparams{0.0, 2.5, 0.1}) ==
        doctest::Approx(2.5));  // w = 0 kills the exponent
  CHECK(se_kernel(1.0, 3.0, h) == doctest::Approx(std::exp(-2.0)));
  CHECK(se_kernel(1.0, 3.0, h) == doctest::Approx(0.135335).epsilon(1e-5));
}

TEST_CASE("scalar gram: single training point") {
  const Hyperparams h{1.3, 0.8, 0.4};
  Vector t(1), y(1);
  t << 0.5;
  y << 2.0;
  const ItemGram g = build_item_gram(t, h, y);
  CHECK(g.k(0, 0) == doctest::Approx(h.sigma2 + h.tau));
  CHECK(g.alpha(0) == doctest::Approx(2.0 / (h.sigma2 + h.tau)));
}

TEST_CASE("identical rows give the constant covariance") {
  const Hyperparams h{1.0, 0.7, 0.3};
  Vector t = Vector::Constant(4, 1.25);
  Vector y = Vector::LinSpaced(4, -1.0, 1.0);
  const ItemGram g = build_item_gram(t, h, y);
  CHECK((g.c.array() == h.tau).all());
  CHECK(g.chol.info() == Eigen::Success);  // rank-1 plus diagonal stays PD
}

TEST_CASE("gram set solves K alpha = y") {
  Rng rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto cfg = testing::random_config(rng, 5, 3, 2);
    const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
    REQUIRE(g.item_count() == 3);
    for (Index j = 0; j < 3; ++j) {
      const ItemGram& item = g.items[static_cast<std::size_t>(j)];
      CHECK(item.c.diagonal().isConstant(cfg.h.tau, 1e-15));
      CHECK(item.c.isApprox(item.c.transpose()));
      const double resid = (item.k * item.alpha - cfg.y.col(j)).norm() /
                           std::max(1.0, cfg.y.col(j).norm());
      CHECK(resid <= 1e-8);
    }
  }
}

TEST_CASE("stationarity: shifted indices give bit-equal covariance") {
  const Hyperparams h{0.8, 1.2, 0.2};
  Vector t(4), y(4);
  t << 0.5, 1.25, 2.0, -3.75;  // exactly representable
  y << 1, 2, 3, 4;
  const ItemGram a = build_item_gram(t, h, y);
  const ItemGram b = build_item_gram((t.array() + 8.0).matrix(), h, y);
  CHECK(a.c == b.c);
}

TEST_CASE("jitter escalation and failure") {
  // severely scaled inputs force the factorization into the jitter path
  const Hyperparams h{1.0, 1.0, 1e-300};
  Vector t = Vector::Constant(3, 0.0);
  Vector y = Vector::Ones(3);
  const ItemGram g = build_item_gram(t, h, y);
  CHECK(g.chol.info() == Eigen::Success);
  CHECK(g.jitter > 0.0);

  Vector t_bad(2), y2(2);
  t_bad << 0.0, std::numeric_limits<double>::quiet_NaN();
  y2 << 1.0, 1.0;
  CHECK_THROWS_AS(build_item_gram(t_bad, h, y2), FactorizationFailed);
}

TEST_CASE("dk_dtheta matches structure and finite differences") {
  Rng rng(22);
  for (int t = 0; t < 20; ++t) {
    const auto cfg = testing::random_config(rng, 6, 2, 2);
    const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
    for (Index j = 0; j < 2; ++j) {
      const ThetaDerivs d = dk_dtheta(g, cfg.h, j);
      CHECK(d.dw.diagonal().isZero(0.0));
      CHECK(d.dsigma2.isIdentity(0.0));

      // finite differences of the Gram matrix entries
      auto gram_at = [&](const Hyperparams& hh) {
        return build_gram_set(cfg.x, cfg.a, hh, cfg.y)
            .items[static_cast<std::size_t>(j)]
            .k;
      };
      const double hw = 1e-5 * std::max(1.0, std::abs(cfg.h.w));
      Hyperparams hp = cfg.h, hm = cfg.h;
      hp.w += hw;
      hm.w -= hw;
      const Matrix fd_w = (gram_at(hp) - gram_at(hm)) / (2 * hw);
      CHECK((d.dw - fd_w).cwiseAbs().maxCoeff() <=
            1e-6 * std::max(1.0, fd_w.cwiseAbs().maxCoeff()));

      const double ht = 1e-5 * std::max(1.0, std::abs(cfg.h.tau));
      hp = cfg.h;
      hm = cfg.h;
      hp.tau += ht;
      hm.tau -= ht;
      const Matrix fd_t = (gram_at(hp) - gram_at(hm)) / (2 * ht);
      CHECK((d.dtau - fd_t).cwiseAbs().maxCoeff() <=
            1e-6 * std::max(1.0, fd_t.cwiseAbs().maxCoeff()));

      const double hs = 1e-5 * std::max(1.0, std::abs(cfg.h.sigma2));
      hp = cfg.h;
      hm = cfg.h;
      hp.sigma2 += hs;
      hm.sigma2 -= hs;
      const Matrix fd_s = (gram_at(hp) - gram_at(hm)) / (2 * hs);
      CHECK((d.dsigma2 - fd_s).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("dk_dtau at unit signal variance equals the covariance") {
  Rng rng(25);
  auto cfg = testing::random_config(rng, 5, 2, 2);
  cfg.h.tau = 1.0;
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);
  for (Index j = 0; j < 2; ++j) {
    CHECK(dk_dtheta(g, cfg.h, j).dtau ==
          g.items[static_cast<std::size_t>(j)].c);
  }
}

TEST_CASE("dk_dx sparsity and finite differences") {
  Rng rng(23);
  const auto cfg = testing::random_config(rng, 5, 3, 2);
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);

  for (Index j = 0; j < 3; ++j) {
    for (Index i = 0; i < 5; ++i) {
      for (Index k = 0; k < 2; ++k) {
        const RowColSym d = dk_dx(g, cfg.h, cfg.a, cfg.x, i, k, j);
        CHECK(d.c(i) == 0.0);
        if (cfg.a.a(j, k) == 0.0) CHECK(d.c.isZero(0.0));

        const double step = 1e-5;
        FactorScores xp = cfg.x, xm = cfg.x;
        xp.x(i, k) += step;
        xm.x(i, k) -= step;
        const Matrix fd =
            (build_gram_set(xp, cfg.a, cfg.h, cfg.y)
                 .items[static_cast<std::size_t>(j)]
                 .k -
             build_gram_set(xm, cfg.a, cfg.h, cfg.y)
                 .items[static_cast<std::size_t>(j)]
                 .k) /
            (2 * step);
        const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        CHECK((d.dense() - fd).cwiseAbs().maxCoeff() <= 1e-6 * scale);
      }
    }
  }
  CHECK_THROWS_AS(dk_dx(g, cfg.h, cfg.a, cfg.x, 99, 0, 0), IndexOutOfRange);
}

TEST_CASE("dk_da structure, finite differences, and the constraint guard") {
  Rng rng(24);
  const auto cfg = testing::random_config(rng, 5, 3, 2);
  const GramSet g = build_gram_set(cfg.x, cfg.a, cfg.h, cfg.y);

  bool saw_constrained = false;
  for (Index m = 0; m < 3; ++m) {
    for (Index k = 0; k < 2; ++k) {
      if (!cfg.q.loads(m, k)) {
        saw_constrained = true;
        CHECK_THROWS_AS(dk_da(g, cfg.h, cfg.x, cfg.q, m, k),
                        ConstrainedLoading);
        continue;
      }
      const Matrix d = dk_da(g, cfg.h, cfg.x, cfg.q, m, k);
      CHECK(d.diagonal().isZero(0.0));
      CHECK(d.isApprox(d.transpose()));

      const double step = 1e-5;
      Matrix ap = cfg.a.a, am = cfg.a.a;
      ap(m, k) += step;
      am(m, k) -= step;
      const Matrix fd =
          (build_gram_set(cfg.x, Loadings{ap}, cfg.h, cfg.y)
               .items[static_cast<std::size_t>(m)]
               .k -
           build_gram_set(cfg.x, Loadings{am}, cfg.h, cfg.y)
               .items[static_cast<std::size_t>(m)]
               .k) /
          (2 * step);
      const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      CHECK((d - fd).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    }
  }
  CHECK(saw_constrained);  // the random design should have some zeros

  // constant factor column kills the derivative
  FactorScores flat = cfg.x;
  flat.x.col(0).setConstant(0.4);
  const GramSet g2 = build_gram_set(flat, cfg.a, cfg.h, cfg.y);
  for (Index m = 0; m < 3; ++m) {
    if (!cfg.q.loads(m, 0)) continue;
    CHECK(dk_da(g2, cfg.h, flat, cfg.q, m, 0).isZero(0.0));
  }
}
