#include "nslfa/estimator.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "nslfa/rng.hpp"

namespace nslfa {

namespace {

double pooled_variance(const Matrix& y) {
  const double mean = y.mean();
  return (y.array() - mean).square().sum() /
         static_cast<double>(y.size() - 1);
}

Hyperparams default_theta(const Dataset& y) {
  const double v = pooled_variance(y.y());
  return Hyperparams{1.0, 0.5 * v, 0.5 * v};
}

// sigma2 = floor + exp(s) keeps the noise variance positive and bounded
// away from interpolation collapse; w and tau are plain log-parameters.
struct ThetaCoords {
  double floor = 0.0;

  Eigen::Vector3d to_coords(const Hyperparams& h) const {
    return {std::log(h.w), std::log(h.tau),
            std::log(std::max(h.sigma2 - floor,
                              std::numeric_limits<double>::min()))};
  }
  Hyperparams from_coords(const Eigen::Vector3d& s) const {
    return Hyperparams{std::exp(s(0)), std::exp(s(1)),
                       floor + std::exp(s(2))};
  }
  // maps d/dlog-theta gradients to d/ds
  Eigen::Vector3d chain(const Eigen::Vector3d& grad_log,
                        const Hyperparams& h) const {
    Eigen::Vector3d g = grad_log;
    g(2) = grad_log(2) / h.sigma2 * (h.sigma2 - floor);
    return g;
  }
};

// Packed joint-MAP parameter vector: [vec(X), vec(A), theta coords].
// Caches the Gram set per evaluation point so objective and gradient
// calls at the same point share one build.
class JointObjective {
 public:
  JointObjective(const Dataset& y, const DesignMatrix& q, PriorSpec prior,
                 double sigma2_floor)
      : y_(y), q_(q), prior_(prior), coords_{sigma2_floor} {}

  Index dim() const {
    return y_.n() * q_.factors() + q_.items() * q_.factors() + 3;
  }

  Vector pack(const FactorScores& x, const Loadings& a,
              const Hyperparams& h) const {
    Vector v(dim());
    const Index nx = y_.n() * q_.factors();
    const Index na = q_.items() * q_.factors();
    v.head(nx) = Eigen::Map<const Vector>(x.x.data(), nx);
    v.segment(nx, na) = Eigen::Map<const Vector>(a.a.data(), na);
    v.tail(3) = coords_.to_coords(h);
    return v;
  }

  void unpack(const Vector& v, FactorScores& x, Loadings& a,
              Hyperparams& h) const {
    const Index nx = y_.n() * q_.factors();
    const Index na = q_.items() * q_.factors();
    x.x = Eigen::Map<const Matrix>(v.data(), y_.n(), q_.factors());
    a.a = Eigen::Map<const Matrix>(v.data() + nx, q_.items(), q_.factors());
    h = coords_.from_coords(v.segment(nx + na, 3));
  }

  Vector mask() const {
    Vector m = Vector::Ones(dim());
    const Index nx = y_.n() * q_.factors();
    Eigen::Map<Matrix> ma(m.data() + nx, q_.items(), q_.factors());
    for (Index j = 0; j < q_.items(); ++j) {
      for (Index k = 0; k < q_.factors(); ++k) {
        ma(j, k) = q_.loads(j, k) ? 1.0 : 0.0;
      }
    }
    return m;
  }

  double obj(const Vector& v) {
    if (!ensure_gram(v)) return std::numeric_limits<double>::infinity();
    return -joint_value_from_gram(y_, gram_, x_, prior_);
  }

  Vector grad(const Vector& v) {
    if (!ensure_gram(v)) {
      return Vector::Constant(dim(),
                              std::numeric_limits<double>::quiet_NaN());
    }
    const JointGrad jg = grad_joint_from_gram(x_, a_, y_, q_, prior_, gram_);
    Vector g(dim());
    const Index nx = y_.n() * q_.factors();
    const Index na = q_.items() * q_.factors();
    g.head(nx) = Eigen::Map<const Vector>(jg.x.data(), nx);
    g.segment(nx, na) = Eigen::Map<const Vector>(jg.a.data(), na);
    g.tail(3) = coords_.chain(jg.theta_log, h_);
    return -g;
  }

  GramSet release_gram(const Vector& v) {
    ensure_gram(v);
    cached_ = false;
    return std::move(gram_);
  }

 private:
  bool ensure_gram(const Vector& v) {
    if (cached_ && v_cache_.size() == v.size() && v_cache_ == v) {
      return gram_ok_;
    }
    v_cache_ = v;
    cached_ = true;
    unpack(v, x_, a_, h_);
    try {
      gram_ = build_gram_set(x_, a_, h_, y_);
      gram_ok_ = true;
    } catch (const FactorizationFailed&) {
      gram_ok_ = false;
    }
    return gram_ok_;
  }

  const Dataset& y_;
  const DesignMatrix& q_;
  PriorSpec prior_;
  ThetaCoords coords_;

  bool cached_ = false;
  bool gram_ok_ = false;
  Vector v_cache_;
  FactorScores x_;
  Loadings a_;
  Hyperparams h_;
  GramSet gram_;
};

Matrix posterior_links_all(const GramSet& g) {
  const Index n = g.n();
  const Index nj = g.item_count();
  Matrix f(n, nj);
  for (Index j = 0; j < nj; ++j) f.col(j) = posterior_f_train(j, g);
  return f;
}

// Minimizes `obj` from `x0` and, when the move is essentially zero, retries
// from a few perturbed starts and keeps the best.
OptimOutcome minimize_with_restarts(const ObjFn& obj, const GradFn& grad,
                                    const Vector& x0, const Vector& mask,
                                    const OptimOptions& opts, int restarts,
                                    Rng& rng) {
  OptimOutcome best = minimize(obj, grad, x0, mask, opts);
  const double gain = best.trace.front() - best.objective_final;
  if (gain > 1e-12 * std::max(1.0, std::abs(best.trace.front()))) {
    return best;
  }
  for (int r = 0; r < restarts; ++r) {
    Vector start = x0;
    for (Index i = 0; i < start.size(); ++i) {
      if (mask(i) != 0.0) start(i) += 0.5 * rng.normal();
    }
    try {
      OptimOutcome alt = minimize(obj, grad, start, mask, opts);
      if (alt.objective_final < best.objective_final) best = std::move(alt);
    } catch (const NonFiniteObjective&) {
      // a wild restart may start in a non-finite region; keep the best
    }
  }
  return best;
}

}  // namespace

namespace {

// Orthogonal rotation of the principal basis that minimizes the loading
// mass sitting on the design's zero pattern (pairwise sweeps; each pair
// solves a 2x2 eigenproblem). The principal subspace is rotation
// invariant, so this only removes the arbitrariness of the PC basis
// before the zeros are imposed.
Matrix design_aligned_rotation(const Matrix& loadings,
                               const DesignMatrix& q) {
  const Index nk = loadings.cols();
  Matrix rot = Matrix::Identity(nk, nk);
  if (nk < 2) return rot;
  Matrix l = loadings;
  double prev = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 50; ++sweep) {
    for (Index p = 0; p < nk - 1; ++p) {
      for (Index s = p + 1; s < nk; ++s) {
        Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
        for (Index j = 0; j < q.items(); ++j) {
          if (!q.loads(j, p)) {
            const Eigen::Vector2d v(l(j, p), l(j, s));
            m += v * v.transpose();
          }
          if (!q.loads(j, s)) {
            const Eigen::Vector2d v(l(j, s), -l(j, p));
            m += v * v.transpose();
          }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
        const Eigen::Vector2d cs = eig.eigenvectors().col(0);
        const double c = cs(0);
        const double sn = cs(1);
        const Vector lp = l.col(p);
        l.col(p) = c * lp + sn * l.col(s);
        l.col(s) = -sn * lp + c * l.col(s);
        const Vector rp = rot.col(p);
        rot.col(p) = c * rp + sn * rot.col(s);
        rot.col(s) = -sn * rp + c * rot.col(s);
      }
    }
    double off = 0.0;
    for (Index j = 0; j < q.items(); ++j) {
      for (Index k = 0; k < nk; ++k) {
        if (!q.loads(j, k)) off += l(j, k) * l(j, k);
      }
    }
    if (prev - off <= 1e-12 * std::max(1.0, prev)) break;
    prev = off;
  }
  return rot;
}

std::pair<FactorScores, Loadings> aligned_pca_init(const Dataset& y,
                                                   const DesignMatrix& q) {
  auto [x0, a0] = pca_init(y, q, /*align_to_design=*/true);
  return {std::move(x0), std::move(a0)};
}

}  // namespace

std::pair<FactorScores, Loadings> pca_init(const Dataset& y,
                                           const DesignMatrix& q,
                                           bool align_to_design) {
  const Index n = y.n();
  const Index nk = q.factors();
  if (n <= nk) throw TooFewRows("PCA initialization needs N > K");
  if (y.items() != q.items()) {
    throw ShapeMismatch("dataset items do not match design rows");
  }

  Matrix yc = y.y();
  yc.rowwise() -= y.y().colwise().mean();

  Eigen::BDCSVD<Matrix> svd(yc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(n, y.items())) *
                     std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol && sv(i) > 0.0) ++rank;
  }
  if (rank < nk) {
    throw RankDeficient("data has numerical rank " + std::to_string(rank) +
                        " < K = " + std::to_string(nk));
  }

  const double scale = std::sqrt(static_cast<double>(n - 1));
  Matrix x0(n, nk);
  Matrix a0(y.items(), nk);
  for (Index k = 0; k < nk; ++k) {
    Vector v = svd.matrixV().col(k);
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const double sign = v(imax) < 0.0 ? -1.0 : 1.0;
    v *= sign;
    x0.col(k) = sign * svd.matrixU().col(k) * scale;  // u_k s_k / sd
    a0.col(k) = v * (sv(k) / scale);
  }

  if (align_to_design) {
    const Matrix rot = design_aligned_rotation(a0, q);
    a0 = a0 * rot;
    x0 = x0 * rot;
    for (Index k = 0; k < nk; ++k) {
      Index imax = 0;
      a0.col(k).cwiseAbs().maxCoeff(&imax);
      if (a0(imax, k) < 0.0) {
        a0.col(k) *= -1.0;
        x0.col(k) *= -1.0;
      }
    }
  }

  Loadings a = apply_zero_pattern(a0, q);
  for (Index j = 0; j < a.items(); ++j) {
    for (Index k = 0; k < nk; ++k) {
      if (q.loads(j, k) && a.a(j, k) == 0.0) a.a(j, k) = 0.1;
    }
  }
  return {FactorScores{x0}, a};
}

FitResult fit_joint_map(const Dataset& y, const DesignMatrix& q,
                        const FitConfig& cfg) {
  if (cfg.k != q.factors()) {
    throw ShapeMismatch("config K does not match design width");
  }
  if (q.factors() > q.items()) {
    throw ShapeMismatch("K must not exceed J");
  }

  auto [x0, a0] = cfg.init.value_or(aligned_pca_init(y, q));
  require_zero_pattern(a0.a, q);
  const Hyperparams h0 = cfg.theta_init.value_or(default_theta(y));
  const double floor = cfg.sigma2_floor_factor * pooled_variance(y.y());

  JointObjective fn(y, q, cfg.prior, floor);
  const ObjFn obj = [&fn](const Vector& v) { return fn.obj(v); };
  const GradFn grad = [&fn](const Vector& v) { return fn.grad(v); };

  const Vector mask_all = fn.mask();
  Vector mask_theta = Vector::Zero(mask_all.size());
  mask_theta.tail(3).setOnes();
  Vector mask_xa = mask_all;
  mask_xa.tail(3).setZero();

  FitResult fit;
  Vector v = fn.pack(x0, a0, h0);
  int total_iters = 0;
  bool converged = false;
  const auto run_phase = [&](const Vector& mask, int iters) {
    if (iters <= 0) return;
    OptimOptions opts = cfg.optim;
    opts.max_iters = iters;
    const OptimOutcome res = minimize(obj, grad, v, mask, opts);
    v = res.x_final;
    const std::size_t skip = fit.objective_trace.empty() ? 0 : 1;
    for (std::size_t i = skip; i < res.trace.size(); ++i) {
      fit.objective_trace.emplace_back(total_iters + static_cast<int>(i),
                                       res.trace[i]);
    }
    total_iters += res.iterations;
    converged = res.converged != StopReason::max_iters;
  };
  run_phase(mask_theta, cfg.theta_warmup_iters);
  run_phase(mask_xa, cfg.xa_phase_iters);
  run_phase(mask_all, cfg.joint_phase_iters);

  fn.unpack(v, fit.x_hat, fit.a_hat, fit.theta_hat);
  const GramSet g = fn.release_gram(v);
  fit.f_hat = posterior_links_all(g);
  fit.converged = converged;
  fit.iterations = total_iters;
  fit.train_y = y.y();
  fit.seed = cfg.seed;
  fit.method = "joint-map";
  return fit;
}

namespace {

// Step 1 of the iterative scheme: marginal likelihood over theta coords
// with (X, A) frozen. Shares Gram builds between obj and grad.
class Step1Objective {
 public:
  Step1Objective(const Dataset& y, const FactorScores& x, const Loadings& a,
                 ThetaCoords coords)
      : y_(y), x_(x), a_(a), coords_(coords) {}

  double obj(const Vector& s) {
    if (!ensure_gram(s)) return std::numeric_limits<double>::infinity();
    return -marginal_loglik(y_, gram_);
  }

  Vector grad(const Vector& s) {
    if (!ensure_gram(s)) {
      return Vector::Constant(3, std::numeric_limits<double>::quiet_NaN());
    }
    return -coords_.chain(grad_marginal_theta_log(gram_), h_);
  }

 private:
  bool ensure_gram(const Vector& s) {
    if (cached_ && s_cache_.size() == s.size() && s_cache_ == s) {
      return gram_ok_;
    }
    s_cache_ = s;
    cached_ = true;
    h_ = coords_.from_coords(s);
    try {
      gram_ = build_gram_set(x_, a_, h_, y_);
      gram_ok_ = true;
    } catch (const FactorizationFailed&) {
      gram_ok_ = false;
    }
    return gram_ok_;
  }

  const Dataset& y_;
  const FactorScores& x_;
  const Loadings& a_;
  ThetaCoords coords_;

  bool cached_ = false;
  bool gram_ok_ = false;
  Vector s_cache_;
  Hyperparams h_;
  GramSet gram_;
};

}  // namespace

FitResult fit_iterative(const Dataset& y, const DesignMatrix& q,
                        const FitConfig& cfg) {
  if (cfg.k != q.factors()) {
    throw ShapeMismatch("config K does not match design width");
  }
  if (q.factors() > q.items()) {
    throw ShapeMismatch("K must not exceed J");
  }

  auto [x, a] = cfg.init.value_or(aligned_pca_init(y, q));
  require_zero_pattern(a.a, q);
  Hyperparams h = cfg.theta_init.value_or(default_theta(y));

  // Step 2 maximizes over the bounded parameter space: rows outside the
  // radius are pulled back onto it. Without the bound the flat
  // (c X, A / c) direction inflates the projection indices across outer
  // loops until the lengthscale collapses.
  const auto project_rows = [](Matrix& m, double radius) {
    for (Index r = 0; r < m.rows(); ++r) {
      const double nrm = m.row(r).norm();
      if (nrm > radius) m.row(r) *= radius / nrm;
    }
  };
  project_rows(x.x, x.bound);
  project_rows(a.a, a.bound);
  const ThetaCoords coords{cfg.sigma2_floor_factor * pooled_variance(y.y())};

  OptimOptions inner = cfg.optim;
  inner.max_iters = std::min(cfg.optim.max_iters, 100);

  FitResult fit;
  fit.converged = false;
  double prev_marginal = std::numeric_limits<double>::quiet_NaN();

  int outer = 0;
  for (; outer < cfg.outer_max; ++outer) {
    // Step 1: hyperparameters from the marginal likelihood.
    Step1Objective s1(y, x, a, coords);
    {
      const GramSet g_before = build_gram_set(x, a, h, y);
      fit.objective_trace.emplace_back(outer, -marginal_loglik(y, g_before));
    }
    const OptimOutcome res =
        minimize([&s1](const Vector& s) { return s1.obj(s); },
                 [&s1](const Vector& s) { return s1.grad(s); },
                 coords.to_coords(h), Vector::Ones(3), inner);
    h = coords.from_coords(res.x_final);
    fit.objective_trace.emplace_back(outer, res.objective_final);

    // Step 2: scores then loadings against frozen link estimates.
    const GramSet g = build_gram_set(x, a, h, y);
    std::vector<LinkEvaluator> links;
    links.reserve(static_cast<std::size_t>(y.items()));
    for (Index j = 0; j < y.items(); ++j) links.emplace_back(g, j);

    Rng rng(mix_seed(cfg.seed, 0x5745u + static_cast<std::uint64_t>(outer)));
    for (Index i = 0; i < y.n(); ++i) {
      const Vector xi = x.x.row(i).transpose();
      const auto obj = [&](const Vector& v) {
        return -step2_objective_scores(v, i, links, a, y);
      };
      const auto grad = [&](const Vector& v) {
        return Vector(-step2_grad_scores(v, i, links, a, y));
      };
      const OptimOutcome r = minimize_with_restarts(
          obj, grad, xi, Vector::Ones(xi.size()), inner,
          cfg.step2_multistart, rng);
      x.x.row(i) = r.x_final.transpose();
      const double nrm = x.x.row(i).norm();
      if (nrm > x.bound) x.x.row(i) *= x.bound / nrm;
    }
    for (Index j = 0; j < y.items(); ++j) {
      Vector aj = a.a.row(j).transpose();
      Vector maskj(q.factors());
      for (Index k = 0; k < q.factors(); ++k) {
        maskj(k) = q.loads(j, k) ? 1.0 : 0.0;
      }
      const LinkEvaluator& link = links[static_cast<std::size_t>(j)];
      const auto obj = [&](const Vector& v) {
        return -step2_objective_loadings(v, j, link, x, y, q);
      };
      const auto grad = [&](const Vector& v) {
        return Vector(-step2_grad_loadings(v, j, link, x, y, q));
      };
      const OptimOutcome r = minimize_with_restarts(
          obj, grad, aj, maskj, inner, cfg.step2_multistart, rng);
      a.a.row(j) = r.x_final.transpose();
      const double nrm = a.a.row(j).norm();
      if (nrm > a.bound) a.a.row(j) *= a.bound / nrm;
    }

    // Step 3: convergence on the marginal likelihood.
    const GramSet g_new = build_gram_set(x, a, h, y);
    const double marginal = marginal_loglik(y, g_new);
    if (std::getenv("NSLFA_DEBUG_ITER")) {
      std::fprintf(stderr,
                   "outer=%d marginal=%.3f w=%.4g tau=%.4g s2=%.4g "
                   "|X|=%.3f |A|=%.3f tmax=%.3f\n",
                   outer, marginal, h.w, h.tau, h.sigma2, x.x.norm(),
                   a.a.norm(), (x.x * a.a.transpose()).cwiseAbs().maxCoeff());
    }
    if (outer > 0 &&
        std::abs(marginal - prev_marginal) <=
            cfg.outer_tol * std::max(1.0, std::abs(prev_marginal))) {
      fit.converged = true;
      prev_marginal = marginal;
      ++outer;
      break;
    }
    prev_marginal = marginal;
  }

  fit.x_hat = x;
  fit.a_hat = a;
  fit.theta_hat = h;
  const GramSet g_final = build_gram_set(x, a, h, y);
  fit.f_hat = posterior_links_all(g_final);
  fit.iterations = outer;
  fit.train_y = y.y();
  fit.seed = cfg.seed;
  fit.method = "iterative";
  return fit;
}

FitResult fit(const Dataset& y, const DesignMatrix& q, const FitConfig& cfg) {
  return cfg.method == FitConfig::Method::joint_map
             ? fit_joint_map(y, q, cfg)
             : fit_iterative(y, q, cfg);
}

GramSet gram_from_fit(const FitResult& fit) {
  const Dataset y(fit.train_y);
  return build_gram_set(fit.x_hat, fit.a_hat, fit.theta_hat, y);
}

Vector predict_links(const FitResult& fit, const Vector& grid, Index j) {
  if (j < 0 || j >= fit.train_y.cols()) {
    throw IndexOutOfRange("item index " + std::to_string(j));
  }
  if (grid.size() == 0) return Vector();
  const GramSet g = gram_from_fit(fit);
  Vector out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    out(i) = posterior_f_mean(grid(i), j, g);
  }
  return out;
}

}  // namespace nslfa
