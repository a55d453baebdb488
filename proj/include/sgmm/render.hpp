#pragma once

#include <limits>
#include <vector>

#include "sgmm/core.hpp"

namespace sgmm {

enum class Normalization { None, SumToOne, MaxToOne };

const char* to_string(Normalization n);
Normalization parse_normalization(const std::string& text);

// Components are skipped at pixels whose Mahalanobis distance exceeds this
// (density below ~1e-8 of the peak).
inline constexpr double kDefaultMahalanobisCutoff = 6.0;
inline constexpr double kNoCutoff = std::numeric_limits<double>::infinity();

struct RenderConfig {
  int width = 0;
  int height = 0;
  // G_t: a component contributes iff weight > threshold_gt / C.
  double threshold_gt = 0.0;
  Normalization normalize = Normalization::None;
  double mahalanobis_cutoff = kDefaultMahalanobisCutoff;
};

// Precomputed Cholesky factorization of one component's covariance,
// Sigma = L L^T with L = [[a, 0], [b, d]].
class GaussianKernel {
 public:
  explicit GaussianKernel(const GaussianComponent& comp);

  // Squared Mahalanobis distance of p to the mean.
  double mahalanobis2(double u, double v) const noexcept {
    const double du = u - mu_u_;
    const double dv = v - mu_v_;
    const double y0 = du / a_;
    const double y1 = (dv - b_ * y0) / d_;
    return y0 * y0 + y1 * y1;
  }

  // Sigma^{-1} (p - mu), via the same factorization.
  void whitened(double u, double v, double& zu, double& zv) const noexcept {
    const double du = u - mu_u_;
    const double dv = v - mu_v_;
    const double y0 = du / a_;
    const double y1 = (dv - b_ * y0) / d_;
    // Solve L^T z = y.
    zv = y1 / d_;
    zu = (y0 - b_ * zv) / a_;
  }

  double density(double u, double v) const noexcept;
  double peak() const noexcept { return norm_; }

  // Pixel index bounds (inclusive lo, exclusive hi) of the axis-aligned box
  // holding the ellipse at the given Mahalanobis radius, clipped to the canvas.
  void pixel_box(double radius, int width, int height, int& row_lo, int& row_hi, int& col_lo,
                 int& col_hi) const noexcept;

 private:
  double mu_u_, mu_v_;
  double a_, b_, d_;
  double sd_u_, sd_v_;
  double norm_;
};

// Bivariate normal density at p. Throws NonPositiveDefinite if |Sigma| <= 0.
double eval_component(Point p, const GaussianComponent& comp);

// Indices of components with weight > threshold_gt / C, in order.
std::vector<std::size_t> selected_components(const GmmParams& gmm, double threshold_gt);

// Unnormalized mixture of selected components evaluated at pixel centers,
// row-major. Throws AllComponentsFiltered when nothing passes the threshold.
std::vector<double> render_values(const GmmParams& gmm, int width, int height, double threshold_gt,
                                  double mahalanobis_cutoff = kDefaultMahalanobisCutoff);

SaliencyMap render_map(const GmmParams& gmm, const RenderConfig& cfg);

// Impulses at floor(u), floor(v) (duplicates accumulate) convolved with an
// isotropic Gaussian truncated at 4 sigma and renormalized to unit sum.
// Mass that falls past the canvas border is dropped.
SaliencyMap blur_fixations(const FixationPoints& points, double sigma, const RenderConfig& cfg);

// The 1D kernel used by blur_fixations, taps -r..r with r = floor(4 sigma).
std::vector<double> blur_kernel_1d(double sigma);

SaliencyMap normalize_map(const SaliencyMap& map, Normalization mode);

}  // namespace sgmm
