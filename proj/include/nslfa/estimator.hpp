#pragma once

#include <optional>
#include <utility>

#include "nslfa/inference.hpp"
#include "nslfa/optim.hpp"

namespace nslfa {

struct FitConfig {
  enum class Method { joint_map, iterative };

  Method method = Method::joint_map;
  Index k = 2;
  PriorSpec prior{};
  OptimOptions optim{};
  int outer_max = 50;       // iterative outer loops
  double outer_tol = 1e-6;  // relative change of the marginal log likelihood
  std::optional<Hyperparams> theta_init;  // default: w=1, tau=sigma2=var(Y)/2
  double sigma2_floor_factor = 1e-6;      // floor = factor * var(Y)
  int step2_multistart = 4;               // fallback perturbed restarts
  std::uint64_t seed = 0;
  // warm start for (X, A); defaults to pca_init
  std::optional<std::pair<FactorScores, Loadings>> init;
  // joint-MAP schedule: hyperparameters alone, then scores/loadings at
  // frozen hyperparameters, then everything. Masks over one packed
  // objective; zero skips a phase.
  int theta_warmup_iters = 50;
  int xa_phase_iters = 300;
  int joint_phase_iters = 150;
};

// First-K principal components as starting values: scores scaled to unit
// sample variance, matching loadings masked by Q (free entries that land
// exactly at 0 are nudged to 0.1), sign fixed per loading column.
std::pair<FactorScores, Loadings> pca_init(const Dataset& y,
                                           const DesignMatrix& q,
                                           bool align_to_design = false);

// Joint MAP: one masked optimization over (X, free A entries, log theta).
FitResult fit_joint_map(const Dataset& y, const DesignMatrix& q,
                        const FitConfig& cfg);

// Two-step iteration: hyperparameters by marginal likelihood, then scores
// and loadings row by row against frozen posterior links.
FitResult fit_iterative(const Dataset& y, const DesignMatrix& q,
                        const FitConfig& cfg);

FitResult fit(const Dataset& y, const DesignMatrix& q, const FitConfig& cfg);

// Posterior link means for item j on a user grid, from the fitted state.
Vector predict_links(const FitResult& fit, const Vector& grid, Index j);

// Gram matrices rebuilt from a fitted state (training indices).
GramSet gram_from_fit(const FitResult& fit);

}  // namespace nslfa
