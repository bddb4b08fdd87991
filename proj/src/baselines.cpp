#include "nslfa/baselines.hpp"

#include <cmath>

#include <Eigen/Cholesky>

namespace nslfa {

namespace {

// Free-coordinate least squares for one loading row:
// min_a ||y_j - X_F a_F||^2 with the constrained coordinates pinned at 0.
Vector solve_loading_row(const Matrix& x, const Vector& yj,
                         const DesignMatrix& q, Index j) {
  const Index nk = q.factors();
  std::vector<Index> free;
  for (Index k = 0; k < nk; ++k) {
    if (q.loads(j, k)) free.push_back(k);
  }
  const Index nf = static_cast<Index>(free.size());
  Matrix xf(x.rows(), nf);
  for (Index c = 0; c < nf; ++c) xf.col(c) = x.col(free[c]);

  const Matrix gram = xf.transpose() * xf;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success ||
      (ldlt.vectorD().array() <=
       1e-12 * std::max(1.0, gram.diagonal().maxCoeff()))
          .any()) {
    throw SingularSubproblem("loading row " + std::to_string(j) +
                             " has a singular normal matrix");
  }
  const Vector af = ldlt.solve(xf.transpose() * yj);
  Vector row = Vector::Zero(nk);
  for (Index c = 0; c < nf; ++c) row(free[c]) = af(c);
  return row;
}

}  // namespace

LinearFaFit fit_linear_fa(const Dataset& y, const DesignMatrix& q,
                          const LinearFaOptions& opts) {
  if (y.items() != q.items()) {
    throw ShapeMismatch("dataset items do not match design rows");
  }
  const Index n = y.n();
  const Index nk = q.factors();

  Matrix yw = y.y();
  if (opts.center) yw.rowwise() -= y.y().colwise().mean();

  // Start from the masked PCA loadings/scores of the (centered) data.
  Matrix x;
  Matrix a;
  {
    const Dataset centered(yw);
    auto [x0, a0] = pca_init(centered, q);
    x = x0.x;
    a = a0.a;
  }

  LinearFaFit out;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iters; ++it) {
    out.iterations = it;

    // X-step: ridge least squares, all rows at once.
    Matrix ata = a.transpose() * a;
    ata.diagonal().array() += opts.ridge;
    Eigen::LDLT<Matrix> ldlt(ata);
    if (ldlt.info() != Eigen::Success) {
      throw SingularSubproblem("score update failed");
    }
    x = ldlt.solve(a.transpose() * yw.transpose()).transpose();

    // A-step: per-row masked least squares.
    for (Index j = 0; j < q.items(); ++j) {
      a.row(j) = solve_loading_row(x, yw.col(j), q, j).transpose();
    }

    const double obj = (yw - x * a.transpose()).squaredNorm() +
                       opts.ridge * x.squaredNorm();
    out.objective_trace.push_back(obj);
    if (std::abs(prev - obj) <= opts.obj_tol * std::max(1.0, prev)) {
      out.converged = true;
      break;
    }
    prev = obj;
  }

  out.x_hat = FactorScores{x};
  out.a_hat = apply_zero_pattern(a, q);
  out.sigma2_hat = (yw - x * a.transpose()).squaredNorm() /
                   static_cast<double>(n * y.items());
  return out;
}

FitResult fit_unconstrained(const Dataset& y, Index k, const FitConfig& cfg) {
  const DesignMatrix ones(IntMatrix::Ones(y.items(), k));
  FitConfig c = cfg;
  c.k = k;
  FitResult fit = fit_joint_map(y, ones, c);
  fit.method = "unconstrained";
  return fit;
}

double varimax_criterion(const Matrix& a) {
  const double j = static_cast<double>(a.rows());
  double v = 0.0;
  for (Index k = 0; k < a.cols(); ++k) {
    const auto sq = a.col(k).array().square();
    v += sq.square().sum() - sq.sum() * sq.sum() / j;
  }
  return v;
}

VarimaxResult varimax(const Matrix& a, double tol, int max_sweeps) {
  if (a.cols() < 2) {
    throw ShapeMismatch("varimax needs at least two columns");
  }
  const Index nj = a.rows();
  const Index nk = a.cols();

  VarimaxResult out;
  out.rotated = a;
  out.rotation = Matrix::Identity(nk, nk);
  double crit = varimax_criterion(out.rotated);

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    out.iterations = sweep;
    for (Index p = 0; p < nk - 1; ++p) {
      for (Index s = p + 1; s < nk; ++s) {
        const Vector u = out.rotated.col(p).array().square().matrix() -
                         out.rotated.col(s).array().square().matrix();
        const Vector v =
            2.0 * out.rotated.col(p).cwiseProduct(out.rotated.col(s));
        const double su = u.sum();
        const double sv = v.sum();
        const double c = (u.squaredNorm() - v.squaredNorm()) -
                         (su * su - sv * sv) / static_cast<double>(nj);
        const double d =
            2.0 * (u.dot(v) - su * sv / static_cast<double>(nj));
        const double phi = 0.25 * std::atan2(d, c);
        if (std::abs(phi) < 1e-14) continue;
        const double cs = std::cos(phi);
        const double sn = std::sin(phi);
        const Vector cp = out.rotated.col(p);
        out.rotated.col(p) = cs * cp + sn * out.rotated.col(s);
        out.rotated.col(s) = -sn * cp + cs * out.rotated.col(s);
        const Vector rp = out.rotation.col(p);
        out.rotation.col(p) = cs * rp + sn * out.rotation.col(s);
        out.rotation.col(s) = -sn * rp + cs * out.rotation.col(s);
      }
    }
    const double next = varimax_criterion(out.rotated);
    if (next - crit <= tol) {
      crit = std::max(crit, next);
      break;
    }
    crit = next;
  }
  out.criterion = crit;
  return out;
}

DesignMatrix threshold_design(const Matrix& a, double threshold) {
  IntMatrix q(a.rows(), a.cols());
  for (Index j = 0; j < a.rows(); ++j) {
    const double rowmax = a.row(j).cwiseAbs().maxCoeff();
    for (Index k = 0; k < a.cols(); ++k) {
      q(j, k) = std::abs(a(j, k)) >= threshold * rowmax ? 1 : 0;
    }
  }
  return DesignMatrix(q);
}

}  // namespace nslfa
