#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "nslfa/errors.hpp"
#include "nslfa/types.hpp"

namespace nslfa {

// sin of the angle between two vectors, clamped to [0,1]. Scale and sign
// invariant in both arguments.
template <typename DU, typename DV>
double sin_angle(const Eigen::MatrixBase<DU>& u,
                 const Eigen::MatrixBase<DV>& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    throw ZeroVector("sin_angle needs two nonzero vectors");
  }
  const double c = u.dot(v) / (nu * nv);
  const double s2 = 1.0 - c * c;
  return std::sqrt(std::clamp(s2, 0.0, 1.0));
}

// absolute Pearson correlation
template <typename DU, typename DV>
double abs_corr(const Eigen::MatrixBase<DU>& u,
                const Eigen::MatrixBase<DV>& v) {
  const Index n = u.size();
  if (v.size() != n) throw ShapeMismatch("abs_corr length mismatch");
  const auto uc = (u.array() - u.array().mean()).eval();
  const auto vc = (v.array() - v.array().mean()).eval();
  const double su = uc.matrix().norm();
  const double sv = vc.matrix().norm();
  if (su == 0.0 || sv == 0.0) {
    throw DegenerateVariance("abs_corr needs nonzero sample variance");
  }
  return std::abs(uc.matrix().dot(vc.matrix()) / (su * sv));
}

// || X* A*' - Xh Ah' ||_F^2 / (N J)
inline double d_xa(const Matrix& x_true, const Matrix& a_true,
                   const Matrix& x_hat, const Matrix& a_hat) {
  if (x_true.rows() != x_hat.rows() || a_true.rows() != a_hat.rows() ||
      x_true.cols() != a_true.cols() || x_hat.cols() != a_hat.cols()) {
    throw ShapeMismatch("d_xa shape mismatch");
  }
  const Matrix diff =
      x_true * a_true.transpose() - x_hat * a_hat.transpose();
  return diff.squaredNorm() /
         static_cast<double>(x_true.rows() * a_true.rows());
}

// sum_j ||fh_j - f*_j||^2 / (N J)
inline double d_f(const Matrix& f_hat, const Matrix& f_true) {
  if (f_hat.rows() != f_true.rows() || f_hat.cols() != f_true.cols()) {
    throw ShapeMismatch("d_f shape mismatch");
  }
  return (f_hat - f_true).squaredNorm() /
         static_cast<double>(f_hat.rows() * f_hat.cols());
}

// Leave-one-out nearest-neighbor label mismatches in a latent embedding.
// Ties broken by the lowest index.
inline int nn_class_error(const Matrix& z, const std::vector<int>& labels) {
  const Index n = z.rows();
  if (labels.empty()) throw MissingLabels("labels required");
  if (static_cast<Index>(labels.size()) != n || n < 2) {
    throw ShapeMismatch("nn_class_error needs one label per row, n >= 2");
  }
  int errors = 0;
  for (Index i = 0; i < n; ++i) {
    Index best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Index l = 0; l < n; ++l) {
      if (l == i) continue;
      const double d2 = (z.row(i) - z.row(l)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = l;
      }
    }
    if (labels[static_cast<std::size_t>(best)] !=
        labels[static_cast<std::size_t>(i)]) {
      ++errors;
    }
  }
  return errors;
}

// Per-replication evaluation bundle used by the simulation tables.
struct EvalSummary {
  Vector corr;  // per-factor |corr(x_k, xh_k)|
  Vector sin;   // per-factor sin angle
  double d_xa = 0.0;
  double d_f = 0.0;
  std::optional<int> nn_error;
};

inline EvalSummary evaluate_fit(const Matrix& x_true, const Matrix& a_true,
                                const Matrix& f_true, const Matrix& x_hat,
                                const Matrix& a_hat, const Matrix& f_hat) {
  EvalSummary s;
  const Index k = x_true.cols();
  s.corr.resize(k);
  s.sin.resize(k);
  for (Index c = 0; c < k; ++c) {
    s.corr(c) = abs_corr(x_true.col(c), x_hat.col(c));
    s.sin(c) = sin_angle(x_true.col(c), x_hat.col(c));
  }
  s.d_xa = d_xa(x_true, a_true, x_hat, a_hat);
  s.d_f = d_f(f_hat, f_true);
  return s;
}

}  // namespace nslfa
