#pragma once

#include <optional>
#include <vector>

#include "sgmm/core.hpp"
#include "sgmm/render.hpp"
#include "sgmm/transform.hpp"

namespace sgmm {

inline constexpr double kDefaultThresholdGt = 0.2;

struct LossReport {
  double loss = 0.0;  // 1 - cc
  double cc = 0.0;
  std::size_t selected_components = 0;
};

struct GradReport {
  LossReport value;
  // One entry per component; unselected components stay zero.
  std::vector<ComponentGrad> d_theta;
  std::optional<RawParamMap> d_raw;
};

// Reconstruction loss 1 - CC(render(gmm | weight > G_t/C), gt) over all
// pixels of gt. Throws ConstantMap if either map has zero variance.
LossReport cc_loss(const GmmParams& gmm, const SaliencyMap& gt, double threshold_gt = kDefaultThresholdGt,
                   double mahalanobis_cutoff = kDefaultMahalanobisCutoff);

// Analytic partials of cc_loss w.r.t. every component parameter. The
// selection set is held fixed (no gradient through the weight gate).
GradReport cc_loss_grad(const GmmParams& gmm, const SaliencyMap& gt, double threshold_gt = kDefaultThresholdGt,
                        double mahalanobis_cutoff = kDefaultMahalanobisCutoff);

// cc_loss_grad chained through transform_params; fills d_raw.
GradReport raw_grad(const RawParamMap& raw, const AnchorGrid& grid, const TransformConfig& tcfg,
                    const SaliencyMap& gt, double threshold_gt = kDefaultThresholdGt,
                    double mahalanobis_cutoff = kDefaultMahalanobisCutoff);

}  // namespace sgmm
