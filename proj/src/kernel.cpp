#include "nslfa/kernel.hpp"

namespace nslfa {

double ItemGram::log_det() const {
  // |K| from the triangular factor: 2 * sum(log diag(L)).
  return 2.0 * chol.matrixLLT().diagonal().array().log().sum();
}

namespace {

Matrix se_cov_matrix(const Vector& t, const Hyperparams& h) {
  const Index n = t.size();
  Matrix c(n, n);
  for (Index i = 0; i < n; ++i) {
    c(i, i) = h.tau;
    for (Index l = i + 1; l < n; ++l) {
      const double v = se_kernel(t(i), t(l), h);
      c(i, l) = v;
      c(l, i) = v;
    }
  }
  return c;
}

}  // namespace

ItemGram build_item_gram(const Vector& t, const Hyperparams& h,
                         const Vector& y_col) {
  ItemGram g;
  g.t = t;
  g.c = se_cov_matrix(t, h);
  g.k = g.c;
  g.k.diagonal().array() += h.sigma2;
  if (!g.k.allFinite()) {
    // LLT does not reliably flag NaN/Inf input, and no jitter can fix it
    throw FactorizationFailed("K_j has non-finite entries");
  }

  g.chol.compute(g.k);
  double eps = 1e-10;
  while (g.chol.info() != Eigen::Success && eps <= 1e-6) {
    g.jitter = eps * h.tau;
    g.k = g.c;
    g.k.diagonal().array() += h.sigma2 + g.jitter;
    g.chol.compute(g.k);
    eps *= 10.0;
  }
  if (g.chol.info() != Eigen::Success) {
    throw FactorizationFailed(
        "Cholesky of K_j failed after jitter escalation to 1e-6*tau");
  }
  g.alpha = g.chol.solve(y_col);
  return g;
}

GramSet build_gram_set(const FactorScores& x, const Loadings& a,
                       const Hyperparams& h, const Dataset& y) {
  if (x.n() != y.n() || a.items() != y.items() ||
      x.factors() != a.factors()) {
    throw ShapeMismatch("scores/loadings/data shapes are inconsistent");
  }
  GramSet g;
  g.h = h;
  g.items.reserve(static_cast<std::size_t>(y.items()));
  const Matrix t_all = x.x * a.a.transpose();  // N x J projection indices
  for (Index j = 0; j < y.items(); ++j) {
    g.items.push_back(build_item_gram(t_all.col(j), h, y.col(j)));
  }
  return g;
}

ThetaDerivs dk_dtheta(const GramSet& g, const Hyperparams& h, Index j) {
  if (j < 0 || j >= g.item_count()) {
    throw IndexOutOfRange("item index " + std::to_string(j));
  }
  const ItemGram& item = g.items[static_cast<std::size_t>(j)];
  const Index n = item.n();
  ThetaDerivs d;
  d.dtau = item.c / h.tau;
  d.dsigma2 = Matrix::Identity(n, n);
  d.dw.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    d.dw(i, i) = 0.0;
    for (Index l = i + 1; l < n; ++l) {
      const double diff = item.t(i) - item.t(l);
      const double v = -0.5 * diff * diff * item.c(i, l);
      d.dw(i, l) = v;
      d.dw(l, i) = v;
    }
  }
  return d;
}

Matrix RowColSym::dense() const {
  const Index n = c.size();
  Matrix m = Matrix::Zero(n, n);
  m.row(i) = c.transpose();
  m.col(i) = c;
  return m;
}

RowColSym dk_dx(const GramSet& g, const Hyperparams& h, const Loadings& a,
                const FactorScores& x, Index i, Index k, Index j) {
  if (j < 0 || j >= g.item_count() || i < 0 || i >= x.n() || k < 0 ||
      k >= x.factors()) {
    throw IndexOutOfRange("dk_dx index out of range");
  }
  const ItemGram& item = g.items[static_cast<std::size_t>(j)];
  RowColSym out;
  out.i = i;
  out.c = -h.w * a.a(j, k) *
          ((item.t(i) - item.t.array()) * item.c.col(i).array()).matrix();
  out.c(i) = 0.0;
  return out;
}

Matrix dk_da(const GramSet& g, const Hyperparams& h, const FactorScores& x,
             const DesignMatrix& q, Index m, Index k) {
  if (m < 0 || m >= g.item_count() || k < 0 || k >= q.factors()) {
    throw IndexOutOfRange("dk_da index out of range");
  }
  if (!q.loads(m, k)) {
    throw ConstrainedLoading("a(" + std::to_string(m) + "," +
                             std::to_string(k) + ") is fixed to 0 by design");
  }
  const ItemGram& item = g.items[static_cast<std::size_t>(m)];
  const Index n = item.n();
  Matrix d(n, n);
  for (Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Index l = i + 1; l < n; ++l) {
      const double d2 =
          h.w * (item.t(i) - item.t(l)) * (x.x(i, k) - x.x(l, k));
      const double v = -d2 * item.c(i, l);
      d(i, l) = v;
      d(l, i) = v;
    }
  }
  return d;
}

}  // namespace nslfa
