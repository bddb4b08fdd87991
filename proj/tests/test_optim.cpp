#include <doctest.h>

#include <cmath>

#include "nslfa/optim.hpp"
#include "nslfa/rng.hpp"

using namespace nslfa;

namespace {

OptimOptions tight() {
  OptimOptions o;
  o.grad_tol = 1e-12;
  o.obj_tol = 1e-30;
  return o;
}

}  // namespace

TEST_CASE("scg solves a quadratic in at most dim+5 iterations") {
  const Index dim = 8;
  Vector c(dim);
  for (Index i = 0; i < dim; ++i) c(i) = 0.5 * static_cast<double>(i) - 2.0;
  const ObjFn obj = [&c](const Vector& x) {
    return 0.5 * (x - c).squaredNorm();
  };
  const GradFn grad = [&c](const Vector& x) { return Vector(x - c); };

  OptimOptions opts = tight();
  const OptimOutcome out =
      scg_minimize(obj, grad, Vector::Zero(dim), Vector::Ones(dim), opts);
  CHECK((out.x_final - c).norm() <= 1e-8);
  CHECK(out.iterations <= static_cast<int>(dim) + 5);
  CHECK(out.converged == StopReason::grad_tol);
}

TEST_CASE("all-masked problems return the start unchanged") {
  const ObjFn obj = [](const Vector& x) { return x.squaredNorm(); };
  const GradFn grad = [](const Vector& x) { return Vector(2.0 * x); };
  Vector x0(3);
  x0 << 1.0, -2.0, 3.0;

  for (const auto alg :
       {OptimOptions::Algorithm::scg, OptimOptions::Algorithm::gd}) {
    OptimOptions opts;
    opts.algorithm = alg;
    const OptimOutcome out =
        minimize(obj, grad, x0, Vector::Zero(3), opts);
    CHECK(out.x_final == x0);
    CHECK(out.iterations == 0);
  }
}

TEST_CASE("scg reaches the rosenbrock valley floor") {
  const ObjFn obj = [](const Vector& v) {
    const double x = v(0), y = v(1);
    return 100.0 * (y - x * x) * (y - x * x) + (1 - x) * (1 - x);
  };
  const GradFn grad = [](const Vector& v) {
    const double x = v(0), y = v(1);
    Vector g(2);
    g << -400.0 * x * (y - x * x) - 2.0 * (1 - x), 200.0 * (y - x * x);
    return g;
  };
  Vector x0(2);
  x0 << -1.2, 1.0;
  OptimOptions opts = tight();
  opts.max_iters = 500;
  const OptimOutcome out =
      scg_minimize(obj, grad, x0, Vector::Ones(2), opts);
  CHECK(out.objective_final <= 1e-6);
}

TEST_CASE("gd descends a quadratic monotonically") {
  Vector c(4);
  c << 1, -1, 2, 0.5;
  const ObjFn obj = [&c](const Vector& x) {
    return 0.5 * (x - c).squaredNorm();
  };
  const GradFn grad = [&c](const Vector& x) { return Vector(x - c); };
  OptimOptions opts = tight();
  opts.algorithm = OptimOptions::Algorithm::gd;
  opts.max_iters = 2000;
  const OptimOutcome out =
      gd_minimize(obj, grad, Vector::Zero(4), Vector::Ones(4), opts);
  CHECK((out.x_final - c).norm() <= 1e-6);
  for (std::size_t i = 1; i < out.trace.size(); ++i) {
    CHECK(out.trace[i] <= out.trace[i - 1]);
  }
}

TEST_CASE("masked coordinates stay bit-identical") {
  Rng rng(51);
  const Index dim = 10;
  Vector c(dim), x0(dim), mask(dim);
  for (Index i = 0; i < dim; ++i) {
    c(i) = rng.normal();
    x0(i) = rng.normal();
    mask(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  mask(0) = 1.0;  // keep at least one free coordinate
  const ObjFn obj = [&c](const Vector& x) {
    return 0.5 * (x - c).squaredNorm() + 0.1 * x.sum();
  };
  const GradFn grad = [&c](const Vector& x) {
    return Vector(x - c + 0.1 * Vector::Ones(x.size()));
  };

  for (const auto alg :
       {OptimOptions::Algorithm::scg, OptimOptions::Algorithm::gd}) {
    OptimOptions opts;
    opts.algorithm = alg;
    const OptimOutcome out = minimize(obj, grad, x0, mask, opts);
    for (Index i = 0; i < dim; ++i) {
      if (mask(i) == 0.0) {
        CHECK(out.x_final(i) == x0(i));
      }
    }
  }
}

TEST_CASE("accepted objective values never increase") {
  // a mildly nasty nonconvex objective
  const ObjFn obj = [](const Vector& v) {
    return std::sin(3.0 * v(0)) + 0.5 * v(0) * v(0) + 0.2 * v(1) * v(1) +
           0.3 * std::cos(2.0 * v(1));
  };
  const GradFn grad = [](const Vector& v) {
    Vector g(2);
    g << 3.0 * std::cos(3.0 * v(0)) + v(0),
        0.4 * v(1) - 0.6 * std::sin(2.0 * v(1));
    return g;
  };
  Vector x0(2);
  x0 << 2.0, -3.0;
  const OptimOutcome out =
      scg_minimize(obj, grad, x0, Vector::Ones(2), OptimOptions{});
  for (std::size_t i = 1; i < out.trace.size(); ++i) {
    CHECK(out.trace[i] <= out.trace[i - 1] + 1e-15);
  }
}

TEST_CASE("identical inputs produce identical traces") {
  const ObjFn obj = [](const Vector& v) {
    return (v.array().square() * (v.array() - 1.0).square()).sum();
  };
  const GradFn grad = [](const Vector& v) {
    return Vector((2.0 * v.array() * (v.array() - 1.0) *
                   (2.0 * v.array() - 1.0))
                      .matrix());
  };
  Vector x0(3);
  x0 << 0.3, 0.7, -0.4;
  const OptimOutcome a =
      scg_minimize(obj, grad, x0, Vector::Ones(3), OptimOptions{});
  const OptimOutcome b =
      scg_minimize(obj, grad, x0, Vector::Ones(3), OptimOptions{});
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i] == b.trace[i]);
  }
  CHECK(a.x_final == b.x_final);
}

TEST_CASE("non-finite starts are rejected") {
  const ObjFn obj = [](const Vector&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  const GradFn grad = [](const Vector& v) { return Vector(v); };
  CHECK_THROWS_AS(
      scg_minimize(obj, grad, Vector::Ones(2), Vector::Ones(2),
                   OptimOptions{}),
      NonFiniteObjective);
  OptimOptions gd;
  gd.algorithm = OptimOptions::Algorithm::gd;
  CHECK_THROWS_AS(
      gd_minimize(obj, grad, Vector::Ones(2), Vector::Ones(2), gd),
      NonFiniteObjective);
}

TEST_CASE("scg recovers when the objective is non-finite off the start") {
  // finite near the origin, +inf outside a band; forces failed steps
  const ObjFn obj = [](const Vector& v) {
    if (v.cwiseAbs().maxCoeff() > 2.0) {
      return std::numeric_limits<double>::infinity();
    }
    return 0.5 * v.squaredNorm();
  };
  const GradFn grad = [](const Vector& v) { return Vector(v); };
  Vector x0(2);
  x0 << 1.5, -1.5;
  const OptimOutcome out =
      scg_minimize(obj, grad, x0, Vector::Ones(2), OptimOptions{});
  CHECK(out.objective_final <= 1e-8);
}

TEST_CASE("options are validated") {
  OptimOptions bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = OptimOptions{};
  bad.grad_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
