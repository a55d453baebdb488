#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgmm/core.hpp"

namespace sgmm {

struct MetricConfig {
  double kl_eps = 1e-12;
  // EMD inputs are area-downsampled until the longer side is at most this.
  int emd_max_side = 32;
  int auc_splits = 100;
  std::uint64_t seed = 0;
  // Information-gain baseline; defaults to center_prior().
  std::optional<SaliencyMap> baseline;

  void validate() const;
};

enum class AucVariant { Judd, Borji, Shuffled };

// Distribution-based.
double cc(const SaliencyMap& pred, const SaliencyMap& gt);
double sim(const SaliencyMap& pred, const SaliencyMap& gt);
double kl_div(const SaliencyMap& pred, const SaliencyMap& gt, const MetricConfig& cfg = {});
double emd(const SaliencyMap& pred, const SaliencyMap& gt, const MetricConfig& cfg = {});

// Location-based. Fixations are looked up at pixel (floor(v), floor(u)).
double nss(const SaliencyMap& pred, const FixationPoints& points);
double auc(const SaliencyMap& pred, const FixationPoints& points, AucVariant variant,
           const FixationPoints* negatives = nullptr, const MetricConfig& cfg = {});
double info_gain(const SaliencyMap& pred, const FixationPoints& points, const MetricConfig& cfg = {});

// Sum-normalized block-sum downsampling by an integer factor so that the
// longer side is at most max_side.
SaliencyMap area_downsample(const SaliencyMap& map, int max_side);

// Centered isotropic Gaussian with sigma = height / 3, summing to one.
SaliencyMap center_prior(int width, int height);

// Area under the ROC curve for positive vs negative scores with ties
// counted as one half.
double roc_auc(std::vector<double> positives, std::vector<double> negatives);

}  // namespace sgmm
