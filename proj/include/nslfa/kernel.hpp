#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "nslfa/model.hpp"

namespace nslfa {

// Squared-exponential kernel on scalar projection indices:
// k(t,t') = tau * exp(-w (t-t')^2 / 2).
template <typename Scalar>
Scalar se_kernel(Scalar t0, Scalar t1, Scalar w, Scalar tau) {
  const Scalar d = t0 - t1;
  return tau * std::exp(Scalar(-0.5) * w * d * d);
}

inline double se_kernel(double t0, double t1, const Hyperparams& h) {
  return se_kernel(t0, t1, h.w, h.tau);
}

// Covariance vector between f_j(t_star) and the training values f_j(t_i).
template <typename Derived>
Vector se_kernel_vector(double t_star, const Eigen::MatrixBase<Derived>& t,
                        const Hyperparams& h) {
  return (h.tau *
          (-0.5 * h.w * (t.array() - t_star).square()).exp())
      .matrix();
}

// Per-item covariance state: index vector t_j, kernel matrix C_j, noisy
// Gram K_j = sigma^2 I + C_j (plus any jitter that was needed to
// factorize), its Cholesky factor, and alpha_j = K_j^{-1} y_j.
struct ItemGram {
  Vector t;
  Matrix c;
  Matrix k;
  Eigen::LLT<Matrix> chol;
  Vector alpha;
  double jitter = 0.0;

  Index n() const { return t.size(); }
  double log_det() const;
  // K_j^{-1} m via the cached factorization.
  Matrix solve(const Matrix& m) const { return chol.solve(m); }
};

struct GramSet {
  std::vector<ItemGram> items;
  Hyperparams h;

  Index n() const { return items.empty() ? 0 : items.front().n(); }
  Index item_count() const { return static_cast<Index>(items.size()); }
};

// Builds every per-item Gram matrix for the current parameters and caches
// the factorizations. If a Cholesky fails, jitter eps*tau is added to the
// diagonal with eps escalating 1e-10 -> 1e-6 before FactorizationFailed.
GramSet build_gram_set(const FactorScores& x, const Loadings& a,
                       const Hyperparams& h, const Dataset& y);

// Gram state for a single item from a raw index vector; used wherever a
// single column is refit on its own.
ItemGram build_item_gram(const Vector& t, const Hyperparams& h,
                         const Vector& y_col);

// dK_j/dw, dK_j/dtau, dK_j/dsigma2 for one item. The squared-distance
// matrix is formed on demand from t_j.
struct ThetaDerivs {
  Matrix dw;
  Matrix dtau;
  Matrix dsigma2;
};
ThetaDerivs dk_dtheta(const GramSet& g, const Hyperparams& h, Index j);

// dK_j/dx_ik is zero outside row/column i and zero at (i,i); only the
// shared row/column is materialized.
struct RowColSym {
  Index i = 0;
  Vector c;  // length N, c(i) == 0

  Matrix dense() const;
};
RowColSym dk_dx(const GramSet& g, const Hyperparams& h, const Loadings& a,
                const FactorScores& x, Index i, Index k, Index j);

// dK_m/da_mk for a free loading (q(m,k)=1); the derivative w.r.t. a_mk of
// any other item's Gram matrix is identically zero.
Matrix dk_da(const GramSet& g, const Hyperparams& h, const FactorScores& x,
             const DesignMatrix& q, Index m, Index k);

}  // namespace nslfa
