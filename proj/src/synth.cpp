#include "sgmm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sgmm/render.hpp"

namespace sgmm {

void SynthConfig::validate() const {
  if (n_images < 1 || points_per_image < 1) throw Error(ErrorKind::InvalidArgument, "counts must be >= 1");
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "canvas must be at least 1x1");
  if (modes_min < 1 || modes_max < modes_min) throw Error(ErrorKind::InvalidArgument, "bad modes range");
  if (!(var_min > 0.0) || !(var_max >= var_min) || !std::isfinite(var_max)) {
    throw Error(ErrorKind::InvalidArgument, "bad cluster variance range");
  }
  if (!(mean_margin >= 0.0 && mean_margin < 0.5)) throw Error(ErrorKind::InvalidArgument, "mean_margin must be in [0, 0.5)");
  if (!(max_corr >= 0.0 && max_corr < 1.0)) throw Error(ErrorKind::InvalidArgument, "max_corr must be in [0, 1)");
  if (!(blur_sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "blur_sigma must be > 0");
}

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double clip(double x, int extent) { return std::clamp(x, 0.0, std::nextafter(static_cast<double>(extent), 0.0)); }

}  // namespace

std::vector<Point> sample_mixture(const GmmParams& gmm, int count, std::uint64_t seed) {
  auto rng = seeded(seed, 0);
  std::vector<double> weights;
  for (const auto& c : gmm.components) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal;
  std::vector<Point> out;
  out.reserve(count);
  for (int n = 0; n < count; ++n) {
    const auto& c = gmm.components[pick(rng)];
    const double a = std::sqrt(c.var_u);
    const double b = c.cov_uv / a;
    const double d = std::sqrt(std::max(c.var_v - b * b, 0.0));
    const double z0 = normal(rng), z1 = normal(rng);
    out.push_back({clip(c.mu_u + a * z0, gmm.canvas_width), clip(c.mu_v + b * z0 + d * z1, gmm.canvas_height)});
  }
  return out;
}

SynthImage synth_image(const SynthConfig& cfg, int index) {
  cfg.validate();
  auto rng = seeded(cfg.seed, static_cast<std::uint64_t>(index));
  const int modes = std::uniform_int_distribution<int>(cfg.modes_min, cfg.modes_max)(rng);
  std::uniform_real_distribution<double> mu_u(cfg.mean_margin * cfg.width, (1.0 - cfg.mean_margin) * cfg.width);
  std::uniform_real_distribution<double> mu_v(cfg.mean_margin * cfg.height, (1.0 - cfg.mean_margin) * cfg.height);
  std::uniform_real_distribution<double> var(cfg.var_min, cfg.var_max);
  std::uniform_real_distribution<double> corr(-cfg.max_corr, cfg.max_corr);
  std::exponential_distribution<double> gamma1(1.0);  // Dirichlet(1, ..., 1) via normalized Exp(1)

  GmmParams truth;
  truth.canvas_width = cfg.width;
  truth.canvas_height = cfg.height;
  double total = 0.0;
  for (int m = 0; m < modes; ++m) {
    GaussianComponent c;
    c.weight = gamma1(rng);
    total += c.weight;
    c.mu_u = mu_u(rng);
    c.mu_v = mu_v(rng);
    c.var_u = var(rng);
    c.var_v = var(rng);
    c.cov_uv = corr(rng) * std::sqrt(c.var_u * c.var_v);
    truth.components.push_back(c);
  }
  for (auto& c : truth.components) c.weight /= total;

  FixationPoints points(sample_mixture(truth, cfg.points_per_image, rng()), cfg.width, cfg.height);
  RenderConfig rc;
  rc.width = cfg.width;
  rc.height = cfg.height;
  rc.normalize = Normalization::SumToOne;
  SaliencyMap gt = blur_fixations(points, cfg.blur_sigma, rc);
  return {std::move(points), std::move(gt), std::move(truth)};
}

std::vector<SynthImage> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthImage> out;
  out.reserve(cfg.n_images);
  for (int k = 0; k < cfg.n_images; ++k) out.push_back(synth_image(cfg, k));
  return out;
}

FixationPoints subsample_points(const FixationPoints& points, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorKind::InvalidArgument, "ratio must be in (0, 1]");
  const std::size_t n = points.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = seeded(seed, 0);
  for (std::size_t t = 0; t < k; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, n - 1);
    std::swap(idx[t], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<Point> kept;
  kept.reserve(k);
  for (std::size_t i : idx) kept.push_back(points.points()[i]);
  return FixationPoints(std::move(kept), points.width(), points.height());
}

}  // namespace sgmm
