#include "sgmm/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

namespace sgmm {

void OptConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::InvalidArgument, "lr must be finite and >= 0");
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (batch < 1) throw Error(ErrorKind::InvalidArgument, "batch must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::InvalidArgument, "momentum must be in [0,1)");
}

namespace {

void check_loss(double loss) {
  if (!std::isfinite(loss) || std::abs(loss) > kDivergenceLoss) {
    throw Error(ErrorKind::DivergenceDetected, "loss became " + std::to_string(loss) + "; lower the learning rate");
  }
}

}  // namespace

DirectFitResult direct_fit(const RawParamMap& init, const AnchorGrid& grid, const TransformConfig& tcfg,
                           const SaliencyMap& gt, const OptConfig& opt) {
  opt.validate();
  DirectFitResult out{init, {}};
  std::vector<double> velocity(init.values().size(), 0.0);
  for (int step = 0; step < opt.epochs; ++step) {
    const GradReport g = raw_grad(out.params, grid, tcfg, gt, opt.threshold_gt, opt.mahalanobis_cutoff);
    check_loss(g.value.loss);
    out.loss_trace.push_back(g.value.loss);
    auto params = out.params.values();
    const auto grad = g.d_raw->values();
    for (std::size_t k = 0; k < params.size(); ++k) {
      velocity[k] = opt.momentum * velocity[k] - opt.lr * grad[k];
      params[k] += velocity[k];
    }
    if (!out.params.all_finite()) throw Error(ErrorKind::DivergenceDetected, "parameters became non-finite");
  }
  const LossReport last =
      cc_loss(transform_params(out.params, grid, tcfg), gt, opt.threshold_gt, opt.mahalanobis_cutoff);
  check_loss(last.loss);
  out.loss_trace.push_back(last.loss);
  return out;
}

TinyPredictor::TinyPredictor(std::vector<double> params) : params_(std::move(params)) {
  if (params_.size() != kParamCount) throw Error(ErrorKind::ShapeMismatch, "wrong predictor parameter count");
}

TinyPredictor TinyPredictor::random(std::uint64_t seed, double conv_scale, double head_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> conv(0.0, conv_scale), head(0.0, head_scale);
  TinyPredictor p;
  for (std::size_t k = 0; k < kConvWeights; ++k) p.params_[k] = conv(rng);
  for (int o = 0; o < kRawParamsPerCell; ++o) {
    for (int f = 0; f < kFilters; ++f) p.head_weight(o, f) = head(rng);
  }
  return p;
}

namespace {

struct Activations {
  int rows = 0, cols = 0, cell_h = 0, cell_w = 0;
  std::vector<double> pre;     // [filter][pixel]
  std::vector<double> pooled;  // [cell][filter]
};

Activations run_stage1(const TinyPredictor& p, const SaliencyMap& input, int rows, int cols) {
  const int h = input.height(), w = input.width();
  if (rows < 1 || cols < 1 || h % rows != 0 || w % cols != 0) {
    throw Error(ErrorKind::ShapeMismatch, "input does not divide into the pooling grid");
  }
  constexpr int K = TinyPredictor::kKernel, F = TinyPredictor::kFilters, R = K / 2;
  Activations a;
  a.rows = rows;
  a.cols = cols;
  a.cell_h = h / rows;
  a.cell_w = w / cols;
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  a.pre.assign(F * pixels, 0.0);
  a.pooled.assign(static_cast<std::size_t>(rows) * cols * F, 0.0);
  const auto x = input.values();
  for (int f = 0; f < F; ++f) {
    double* pre = a.pre.data() + f * pixels;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        double s = p.conv_bias(f);
        for (int dy = 0; dy < K; ++dy) {
          const int y = i + dy - R;
          if (y < 0 || y >= h) continue;
          for (int dx = 0; dx < K; ++dx) {
            const int xx = j + dx - R;
            if (xx < 0 || xx >= w) continue;
            s += p.conv_weight(f, dy, dx) * x[static_cast<std::size_t>(y) * w + xx];
          }
        }
        pre[static_cast<std::size_t>(i) * w + j] = s;
        const int cell = (i / a.cell_h) * cols + j / a.cell_w;
        a.pooled[static_cast<std::size_t>(cell) * F + f] += std::max(s, 0.0);
      }
    }
  }
  const double area = static_cast<double>(a.cell_h) * a.cell_w;
  for (double& v : a.pooled) v /= area;
  return a;
}

}  // namespace

RawParamMap TinyPredictor::forward(const SaliencyMap& input, int rows, int cols) const {
  const Activations a = run_stage1(*this, input, rows, cols);
  RawParamMap raw(rows, cols);
  for (int cell = 0; cell < rows * cols; ++cell) {
    const double* feat = a.pooled.data() + static_cast<std::size_t>(cell) * kFilters;
    for (int o = 0; o < kRawParamsPerCell; ++o) {
      double s = head_bias(o);
      for (int f = 0; f < kFilters; ++f) s += head_weight(o, f) * feat[f];
      raw.at(cell, o) = s;
    }
  }
  return raw;
}

TinyPredictor TinyPredictor::backward(const SaliencyMap& input, const RawParamMap& d_raw) const {
  const Activations a = run_stage1(*this, input, d_raw.rows(), d_raw.cols());
  constexpr int K = kKernel, F = kFilters, R = K / 2;
  const int h = input.height(), w = input.width();
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  TinyPredictor g;

  std::vector<double> d_pooled(a.pooled.size(), 0.0);
  for (int cell = 0; cell < d_raw.cells(); ++cell) {
    const double* feat = a.pooled.data() + static_cast<std::size_t>(cell) * F;
    for (int o = 0; o < kRawParamsPerCell; ++o) {
      const double d = d_raw.at(cell, o);
      g.head_bias(o) += d;
      for (int f = 0; f < F; ++f) {
        g.head_weight(o, f) += d * feat[f];
        d_pooled[static_cast<std::size_t>(cell) * F + f] += d * head_weight(o, f);
      }
    }
  }

  const double inv_area = 1.0 / (static_cast<double>(a.cell_h) * a.cell_w);
  const auto x = input.values();
  for (int f = 0; f < F; ++f) {
    const double* pre = a.pre.data() + f * pixels;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        if (pre[static_cast<std::size_t>(i) * w + j] <= 0.0) continue;
        const int cell = (i / a.cell_h) * a.cols + j / a.cell_w;
        const double d = d_pooled[static_cast<std::size_t>(cell) * F + f] * inv_area;
        g.conv_bias(f) += d;
        for (int dy = 0; dy < K; ++dy) {
          const int y = i + dy - R;
          if (y < 0 || y >= h) continue;
          for (int dx = 0; dx < K; ++dx) {
            const int xx = j + dx - R;
            if (xx < 0 || xx >= w) continue;
            g.conv_weight(f, dy, dx) += d * x[static_cast<std::size_t>(y) * w + xx];
          }
        }
      }
    }
  }
  return g;
}

std::pair<LossReport, TinyPredictor> toy_loss_grad(const TinyPredictor& predictor, const ToyExample& example,
                                                   const AnchorGrid& grid, const TransformConfig& tcfg,
                                                   double threshold_gt, double mahalanobis_cutoff) {
  const RawParamMap raw = predictor.forward(example.feature, grid.rows, grid.cols);
  const GradReport g = raw_grad(raw, grid, tcfg, example.gt, threshold_gt, mahalanobis_cutoff);
  return {g.value, predictor.backward(example.feature, *g.d_raw)};
}

namespace {

double mean_loss(const std::vector<ToyExample>& dataset, const TinyPredictor& p, const AnchorGrid& grid,
                 const TransformConfig& tcfg, const OptConfig& opt) {
  double total = 0.0;
  for (const ToyExample& ex : dataset) {
    const GmmParams gmm = transform_params(p.forward(ex.feature, grid.rows, grid.cols), grid, tcfg);
    total += cc_loss(gmm, ex.gt, opt.threshold_gt, opt.mahalanobis_cutoff).loss;
  }
  const double mean = total / static_cast<double>(dataset.size());
  check_loss(mean);
  return mean;
}

}  // namespace

ToyTrainResult train_toy(const std::vector<ToyExample>& dataset, const TinyPredictor& init, const AnchorGrid& grid,
                         const TransformConfig& tcfg, const OptConfig& opt) {
  opt.validate();
  if (dataset.empty()) throw Error(ErrorKind::InvalidArgument, "training set is empty");
  ToyTrainResult out{init, {}};
  out.epoch_loss.push_back(mean_loss(dataset, out.predictor, grid, tcfg, opt));

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(TinyPredictor::kParamCount, 0.0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch));
      std::vector<double> grad(TinyPredictor::kParamCount, 0.0);
      for (std::size_t b = start; b < end; ++b) {
        auto [loss, g] = toy_loss_grad(out.predictor, dataset[order[b]], grid, tcfg, opt.threshold_gt,
                                       opt.mahalanobis_cutoff);
        check_loss(loss.loss);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g.params()[k];
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      auto params = out.predictor.params();
      for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = opt.momentum * velocity[k] - opt.lr * grad[k] * scale;
        params[k] += velocity[k];
      }
    }
    out.epoch_loss.push_back(mean_loss(dataset, out.predictor, grid, tcfg, opt));
  }
  return out;
}

GmmParams predict(const TinyPredictor& predictor, const SaliencyMap& feature, const AnchorGrid& grid,
                  const TransformConfig& tcfg) {
  return transform_params(predictor.forward(feature, grid.rows, grid.cols), grid, tcfg);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_f64(std::string& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return v;
}

}  // namespace

std::string encode_checkpoint(const TinyPredictor& predictor) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  for (double x : predictor.params()) put_f64(out, x);
  return out;
}

TinyPredictor decode_checkpoint(std::string_view bytes) {
  const std::size_t expected = sizeof kCheckpointMagic + 4 + 8 * TinyPredictor::kParamCount;
  if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw Error(ErrorKind::FormatError, "not a predictor checkpoint (bad magic)");
  }
  if (bytes.size() < 12) throw Error(ErrorKind::FormatError, "truncated checkpoint header");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::FormatError, "unsupported checkpoint version " + std::to_string(version));
  }
  if (bytes.size() != expected) throw Error(ErrorKind::FormatError, "checkpoint has the wrong size");
  std::vector<double> params(TinyPredictor::kParamCount);
  for (std::size_t k = 0; k < params.size(); ++k) params[k] = std::bit_cast<double>(get_le(bytes, 12 + 8 * k, 8));
  return TinyPredictor(std::move(params));
}

}  // namespace sgmm
