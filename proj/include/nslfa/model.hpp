#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nslfa/errors.hpp"
#include "nslfa/types.hpp"

namespace nslfa {

// Binary J x K design matrix Q. q(j,k) = 1 means manifest variable j may
// load on factor k; q(j,k) = 0 constrains the loading to zero.
class DesignMatrix {
 public:
  // Validates on construction: entries in {0,1}, J >= 1, K >= 1, no
  // all-zero row.
  explicit DesignMatrix(IntMatrix q);

  Index items() const { return q_.rows(); }    // J
  Index factors() const { return q_.cols(); }  // K
  const IntMatrix& q() const { return q_; }
  bool loads(Index j, Index k) const { return q_(j, k) != 0; }

  // Bitmask of the factors item j loads on (bit k set iff q(j,k)=1).
  std::uint32_t row_mask(Index j) const;

 private:
  IntMatrix q_;
};

DesignMatrix validate_design(const IntMatrix& raw);

// J x K loading matrix respecting the zero pattern of a design matrix.
// The row-norm bound is reported, never projected.
struct Loadings {
  Matrix a;
  double bound = 2.5;

  Index items() const { return a.rows(); }
  Index factors() const { return a.cols(); }
  double max_row_norm() const;
};

// Masks `a` by the zero pattern of `q`: entries at q(j,k)=0 are set to
// exactly 0, all others are copied through unchanged.
Loadings apply_zero_pattern(const Matrix& a, const DesignMatrix& q);

// Throws ZeroPatternViolated unless every entry of `a` at a zero of `q`
// is exactly 0.
void require_zero_pattern(const Matrix& a, const DesignMatrix& q);

// N x K factor score matrix, one row per individual.
struct FactorScores {
  Matrix x;
  double bound = 2.5;

  Index n() const { return x.rows(); }
  Index factors() const { return x.cols(); }
  double max_row_norm() const;
};

// Squared-exponential kernel hyperparameters and the noise variance.
struct Hyperparams {
  double w = 1.0;       // inverse squared lengthscale
  double tau = 1.0;     // signal variance
  double sigma2 = 1.0;  // noise variance

  bool positive() const { return w > 0.0 && tau > 0.0 && sigma2 > 0.0; }
};

// Observed N x J data matrix with optional class labels and column names.
class Dataset {
 public:
  explicit Dataset(Matrix y, std::vector<int> labels = {},
                   std::vector<std::string> names = {});

  Index n() const { return y_.rows(); }
  Index items() const { return y_.cols(); }
  const Matrix& y() const { return y_; }
  Vector col(Index j) const { return y_.col(j); }

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  Matrix y_;
  std::vector<int> labels_;
  std::vector<std::string> names_;
};

// Everything a fit produces. Keeps a copy of the training data so link
// prediction can rebuild the per-item Gram matrices.
struct FitResult {
  FactorScores x_hat;
  Loadings a_hat;
  Hyperparams theta_hat;
  Matrix f_hat;  // N x J posterior link means at the training indices
  std::vector<std::pair<int, double>> objective_trace;
  bool converged = false;
  int iterations = 0;
  Matrix train_y;
  std::uint64_t seed = 0;
  std::string method;
};

}  // namespace nslfa
