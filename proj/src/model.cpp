#include "nslfa/model.hpp"

#include <cmath>

namespace nslfa {

DesignMatrix::DesignMatrix(IntMatrix q) : q_(std::move(q)) {
  if (q_.rows() < 1 || q_.cols() < 1) {
    throw EmptyMatrix("design matrix must have at least one row and column");
  }
  for (Index j = 0; j < q_.rows(); ++j) {
    bool any = false;
    for (Index k = 0; k < q_.cols(); ++k) {
      const int v = q_(j, k);
      if (v != 0 && v != 1) {
        throw NonBinaryEntry("design entry (" + std::to_string(j) + "," +
                             std::to_string(k) + ") is " + std::to_string(v));
      }
      any = any || v == 1;
    }
    if (!any) {
      throw AllZeroRow("design row " + std::to_string(j) +
                       " loads on no factor");
    }
  }
}

std::uint32_t DesignMatrix::row_mask(Index j) const {
  std::uint32_t m = 0;
  for (Index k = 0; k < q_.cols(); ++k) {
    if (q_(j, k) != 0) m |= std::uint32_t{1} << k;
  }
  return m;
}

DesignMatrix validate_design(const IntMatrix& raw) { return DesignMatrix(raw); }

double Loadings::max_row_norm() const {
  return a.rows() == 0 ? 0.0 : a.rowwise().norm().maxCoeff();
}

Loadings apply_zero_pattern(const Matrix& a, const DesignMatrix& q) {
  if (a.rows() != q.items() || a.cols() != q.factors()) {
    throw ShapeMismatch("loading matrix is " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + ", design is " +
                        std::to_string(q.items()) + "x" +
                        std::to_string(q.factors()));
  }
  Loadings out;
  out.a = a;
  for (Index j = 0; j < a.rows(); ++j) {
    for (Index k = 0; k < a.cols(); ++k) {
      if (!q.loads(j, k)) out.a(j, k) = 0.0;
    }
  }
  return out;
}

void require_zero_pattern(const Matrix& a, const DesignMatrix& q) {
  if (a.rows() != q.items() || a.cols() != q.factors()) {
    throw ShapeMismatch("loadings/design shape mismatch");
  }
  for (Index j = 0; j < a.rows(); ++j) {
    for (Index k = 0; k < a.cols(); ++k) {
      if (!q.loads(j, k) && a(j, k) != 0.0) {
        throw ZeroPatternViolated("loading (" + std::to_string(j) + "," +
                                  std::to_string(k) +
                                  ") must be 0 by design");
      }
    }
  }
}

double FactorScores::max_row_norm() const {
  return x.rows() == 0 ? 0.0 : x.rowwise().norm().maxCoeff();
}

Dataset::Dataset(Matrix y, std::vector<int> labels,
                 std::vector<std::string> names)
    : y_(std::move(y)), labels_(std::move(labels)), names_(std::move(names)) {
  if (y_.rows() < 2) {
    throw TooFewRows("dataset needs at least 2 rows, got " +
                     std::to_string(y_.rows()));
  }
  if (!y_.allFinite()) {
    throw NonFiniteData("dataset contains non-finite entries");
  }
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != y_.rows()) {
    throw ShapeMismatch("label count does not match row count");
  }
  if (!names_.empty() && static_cast<Index>(names_.size()) != y_.cols()) {
    throw ShapeMismatch("column name count does not match column count");
  }
}

}  // namespace nslfa
