#include <doctest.h>

#include "nslfa/model.hpp"
#include "nslfa/rng.hpp"
#include "test_helpers.hpp"

using namespace nslfa;

namespace {

IntMatrix make_int(std::initializer_list<std::initializer_list<int>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(rows.begin()->size());
  IntMatrix m(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (const int v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix make_mat(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(rows.begin()->size());
  Matrix m(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (const double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("validate_design accepts the identity pattern") {
  const DesignMatrix q = validate_design(make_int({{1, 0}, {0, 1}}));
  CHECK(q.items() == 2);
  CHECK(q.factors() == 2);
  CHECK(q.loads(0, 0));
  CHECK_FALSE(q.loads(0, 1));
}

TEST_CASE("validate_design rejects bad input") {
  CHECK_THROWS_AS(validate_design(make_int({{1, 2}})), NonBinaryEntry);
  CHECK_THROWS_AS(validate_design(make_int({{0, 0}, {1, 1}})), AllZeroRow);
  CHECK_THROWS_AS(validate_design(IntMatrix(0, 0)), EmptyMatrix);
  CHECK_THROWS_AS(validate_design(make_int({{-1, 1}})), NonBinaryEntry);
}

TEST_CASE("apply_zero_pattern masks exactly") {
  const DesignMatrix q1 = validate_design(make_int({{1, 0}}));
  CHECK(apply_zero_pattern(make_mat({{3, 4}}), q1).a == make_mat({{3, 0}}));

  const DesignMatrix q2 = validate_design(make_int({{1, 1}}));
  CHECK(apply_zero_pattern(make_mat({{3, 4}}), q2).a == make_mat({{3, 4}}));

  const DesignMatrix q3 = validate_design(make_int({{1, 0}, {0, 1}}));
  CHECK(apply_zero_pattern(make_mat({{1, 1}, {1, 1}}), q3).a ==
        make_mat({{1, 0}, {0, 1}}));

  CHECK_THROWS_AS(apply_zero_pattern(make_mat({{1, 2, 3}}), q1),
                  ShapeMismatch);
}

TEST_CASE("apply_zero_pattern is idempotent and exact") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto cfg = testing::random_config(rng, 4, 5, 3);
    Matrix raw(cfg.q.items(), cfg.q.factors());
    for (Index j = 0; j < raw.rows(); ++j) {
      for (Index k = 0; k < raw.cols(); ++k) raw(j, k) = rng.normal();
    }
    const Loadings once = apply_zero_pattern(raw, cfg.q);
    const Loadings twice = apply_zero_pattern(once.a, cfg.q);
    CHECK(once.a == twice.a);
    for (Index j = 0; j < cfg.q.items(); ++j) {
      for (Index k = 0; k < cfg.q.factors(); ++k) {
        if (!cfg.q.loads(j, k)) CHECK(once.a(j, k) == 0.0);
      }
    }
    CHECK_NOTHROW(require_zero_pattern(once.a, cfg.q));
  }
}

TEST_CASE("require_zero_pattern flags violations") {
  const DesignMatrix q = validate_design(make_int({{1, 0}, {0, 1}}));
  Matrix a = make_mat({{1, 1e-300}, {0, 1}});
  CHECK_THROWS_AS(require_zero_pattern(a, q), ZeroPatternViolated);
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS((Dataset{Matrix::Zero(1, 3)}), TooFewRows);
  Matrix bad = Matrix::Zero(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((Dataset{bad}), NonFiniteData);
  CHECK_THROWS_AS((Dataset{Matrix::Zero(3, 2), std::vector<int>{1, 2}}),
                  ShapeMismatch);

  const Dataset ok(Matrix::Ones(3, 2), {0, 1, 0});
  CHECK(ok.n() == 3);
  CHECK(ok.items() == 2);
  CHECK(ok.has_labels());
}

TEST_CASE("row-norm bounds are reported") {
  FactorScores x{make_mat({{3, 4}, {0, 1}})};
  CHECK(x.max_row_norm() == doctest::Approx(5.0));
  Loadings a{make_mat({{0.3, 0.4}})};
  CHECK(a.max_row_norm() == doctest::Approx(0.5));
  CHECK(a.bound == doctest::Approx(2.5));
}
