#pragma once

#include <cstdint>
#include <vector>

#include "sgmm/core.hpp"

namespace sgmm {

// Defaults mimic a SALICON-sized image: ~460 clicks in a few clusters.
struct SynthConfig {
  int n_images = 50;
  int width = 640;
  int height = 480;
  int modes_min = 3;
  int modes_max = 5;
  int points_per_image = 460;
  double var_min = 400.0;
  double var_max = 3600.0;
  // Means are kept this fraction of the canvas away from each border.
  double mean_margin = 0.15;
  // Cluster correlation drawn uniformly from [-max_corr, max_corr].
  double max_corr = 0.5;
  double blur_sigma = 19.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthImage {
  FixationPoints points;
  SaliencyMap gt;  // blurred points, SumToOne
  GmmParams truth;
};

// Image k uses its own generator seeded from (seed, k), so any image can be
// regenerated alone.
SynthImage synth_image(const SynthConfig& cfg, int index);
std::vector<SynthImage> synth_dataset(const SynthConfig& cfg);

// Samples a point set from a mixture, clipping to the canvas.
std::vector<Point> sample_mixture(const GmmParams& gmm, int count, std::uint64_t seed);

// Uniform sample without replacement of ceil(ratio * N) points, kept in their
// original order.
FixationPoints subsample_points(const FixationPoints& points, double ratio, std::uint64_t seed);

}  // namespace sgmm
