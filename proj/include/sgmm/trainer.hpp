#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sgmm/core.hpp"
#include "sgmm/loss_grad.hpp"
#include "sgmm/transform.hpp"

namespace sgmm {

struct OptConfig {
  double lr = 1e-2;
  // Gradient steps for direct_fit, passes over the data for train_toy.
  int epochs = 500;
  // Images averaged per step (train_toy).
  int batch = 1;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double threshold_gt = kDefaultThresholdGt;
  double mahalanobis_cutoff = kDefaultMahalanobisCutoff;

  void validate() const;
};

// A loss that is non-finite or above this aborts training.
inline constexpr double kDivergenceLoss = 10.0;

struct DirectFitResult {
  RawParamMap params;
  // Loss before every step, then the loss of the returned parameters.
  std::vector<double> loss_trace;
};

// Gradient descent with momentum on free per-cell parameters for one map.
DirectFitResult direct_fit(const RawParamMap& init, const AnchorGrid& grid, const TransformConfig& tcfg,
                           const SaliencyMap& gt, const OptConfig& opt);

// Two-stage head standing in for a feature network:
//   stage 1: kFilters 5x5 convolutions (zero padding) + bias + ReLU,
//   stage 2: average pooling over each grid cell, then one affine map from the
//            kFilters pooled features to the kRawParamsPerCell outputs,
//            shared by all cells.
// Parameters are stored flat in this order: conv weights [filter][dy][dx],
// conv biases [filter], head weights [output][filter], head biases [output].
class TinyPredictor {
 public:
  static constexpr int kFilters = 8;
  static constexpr int kKernel = 5;
  static constexpr std::size_t kConvWeights = static_cast<std::size_t>(kFilters) * kKernel * kKernel;
  static constexpr std::size_t kHeadWeights = static_cast<std::size_t>(kRawParamsPerCell) * kFilters;
  static constexpr std::size_t kParamCount = kConvWeights + kFilters + kHeadWeights + kRawParamsPerCell;

  TinyPredictor() : params_(kParamCount, 0.0) {}
  explicit TinyPredictor(std::vector<double> params);

  // Gaussian weights with the given standard deviations, zero biases.
  static TinyPredictor random(std::uint64_t seed, double conv_scale = 0.2, double head_scale = 0.1);

  double& conv_weight(int f, int dy, int dx) { return params_[(static_cast<std::size_t>(f) * kKernel + dy) * kKernel + dx]; }
  double conv_weight(int f, int dy, int dx) const {
    return params_[(static_cast<std::size_t>(f) * kKernel + dy) * kKernel + dx];
  }
  double& conv_bias(int f) { return params_[kConvWeights + f]; }
  double conv_bias(int f) const { return params_[kConvWeights + f]; }
  double& head_weight(int out, int f) { return params_[kConvWeights + kFilters + static_cast<std::size_t>(out) * kFilters + f]; }
  double head_weight(int out, int f) const {
    return params_[kConvWeights + kFilters + static_cast<std::size_t>(out) * kFilters + f];
  }
  double& head_bias(int out) { return params_[kConvWeights + kFilters + kHeadWeights + out]; }
  double head_bias(int out) const { return params_[kConvWeights + kFilters + kHeadWeights + out]; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  // Throws ShapeMismatch unless the input divides into rows x cols cells.
  RawParamMap forward(const SaliencyMap& input, int rows, int cols) const;

  // Gradient w.r.t. the parameters given dObjective/dRaw for forward(input).
  TinyPredictor backward(const SaliencyMap& input, const RawParamMap& d_raw) const;

  friend bool operator==(const TinyPredictor&, const TinyPredictor&) = default;

 private:
  std::vector<double> params_;
};

struct ToyExample {
  SaliencyMap feature;
  SaliencyMap gt;
};

struct ToyTrainResult {
  TinyPredictor predictor;
  // Mean loss over the dataset before training (index 0) and after each epoch.
  std::vector<double> epoch_loss;
};

ToyTrainResult train_toy(const std::vector<ToyExample>& dataset, const TinyPredictor& init, const AnchorGrid& grid,
                         const TransformConfig& tcfg, const OptConfig& opt);

GmmParams predict(const TinyPredictor& predictor, const SaliencyMap& feature, const AnchorGrid& grid,
                  const TransformConfig& tcfg);

// Loss and parameter gradient of one example through the whole pipeline.
std::pair<LossReport, TinyPredictor> toy_loss_grad(const TinyPredictor& predictor, const ToyExample& example,
                                                   const AnchorGrid& grid, const TransformConfig& tcfg,
                                                   double threshold_gt, double mahalanobis_cutoff);

inline constexpr char kCheckpointMagic[8] = {'S', 'G', 'M', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// "SGMMCKPT", u32 version, then kParamCount little-endian f64 in the flat
// parameter order documented on TinyPredictor.
std::string encode_checkpoint(const TinyPredictor& predictor);
TinyPredictor decode_checkpoint(std::string_view bytes);

}  // namespace sgmm
