#pragma once

#include <cstdint>
#include <vector>

#include "sgmm/core.hpp"

namespace sgmm {

struct EmConfig {
  int max_iter = 200;
  // Stop once |LL_t - LL_{t-1}| <= tol * |LL_{t-1}|.
  double tol = 1e-6;
  int n_init = 4;
  // Variance floor in pixels^2, enforced in every M-step.
  double min_var = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Weight given to the spare components when every point coincides.
inline constexpr double kDegenerateWeight = 1e-6;
// Components whose total responsibility drops below this are re-seeded.
inline constexpr double kEmptyComponentMass = 1e-8;

struct FitResult {
  GmmParams gmm;
  double log_likelihood = 0.0;
  // Log-likelihood of the winning restart before each M-step; the last entry
  // belongs to the returned parameters.
  std::vector<double> trace;
  // Trace indices t where a component was re-seeded between t and t + 1.
  std::vector<std::size_t> rescues;
  int best_restart = 0;
  int iterations = 0;
  bool degenerate = false;
};

// Expectation-maximization with k-means++ seeding and one Lloyd pass.
// Throws TooFewPoints when |points| < C.
FitResult fit_gmm_detailed(const FixationPoints& points, int num_components, CovarianceMode mode,
                           const EmConfig& config);

inline GmmParams fit_gmm(const FixationPoints& points, int num_components, CovarianceMode mode,
                         const EmConfig& config) {
  return fit_gmm_detailed(points, num_components, mode, config).gmm;
}

// N x C posterior probabilities; rows sum to one.
Matrix responsibilities(const FixationPoints& points, const GmmParams& gmm);

// Sum over points of log sum_c weight_c N(p; mu_c, Sigma_c), in nats.
double log_likelihood(const FixationPoints& points, const GmmParams& gmm);

}  // namespace sgmm
