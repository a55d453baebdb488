#include "sgmm/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sgmm {

const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::SumToOne: return "sum";
    case Normalization::MaxToOne: return "max";
  }
  return "unknown";
}

Normalization parse_normalization(const std::string& text) {
  if (text == "none") return Normalization::None;
  if (text == "sum") return Normalization::SumToOne;
  if (text == "max") return Normalization::MaxToOne;
  throw Error(ErrorKind::InvalidArgument, "unknown normalization '" + text + "'");
}

GaussianKernel::GaussianKernel(const GaussianComponent& comp) : mu_u_(comp.mu_u), mu_v_(comp.mu_v) {
  if (!comp.positive_definite()) {
    throw Error(ErrorKind::NonPositiveDefinite, "covariance determinant must be positive");
  }
  a_ = std::sqrt(comp.var_u);
  b_ = comp.cov_uv / a_;
  const double rest = comp.var_v - b_ * b_;
  if (!(rest > 0.0)) {
    throw Error(ErrorKind::NonPositiveDefinite, "covariance is numerically singular");
  }
  d_ = std::sqrt(rest);
  sd_u_ = a_;
  sd_v_ = std::sqrt(comp.var_v);
  norm_ = 1.0 / (2.0 * std::numbers::pi * a_ * d_);
}

double GaussianKernel::density(double u, double v) const noexcept {
  return norm_ * std::exp(-0.5 * mahalanobis2(u, v));
}

void GaussianKernel::pixel_box(double radius, int width, int height, int& row_lo, int& row_hi, int& col_lo,
                               int& col_hi) const noexcept {
  if (!std::isfinite(radius)) {
    row_lo = 0;
    row_hi = height;
    col_lo = 0;
    col_hi = width;
    return;
  }
  // Pixel centers j + 0.5 within [mu - r*sd, mu + r*sd].
  const auto lo_index = [](double lo) { return static_cast<int>(std::ceil(lo - 0.5)); };
  const auto hi_index = [](double hi) { return static_cast<int>(std::floor(hi - 0.5)) + 1; };
  const double ru = radius * sd_u_;
  const double rv = radius * sd_v_;
  col_lo = std::clamp(lo_index(mu_u_ - ru), 0, width);
  col_hi = std::clamp(hi_index(mu_u_ + ru), 0, width);
  row_lo = std::clamp(lo_index(mu_v_ - rv), 0, height);
  row_hi = std::clamp(hi_index(mu_v_ + rv), 0, height);
  if (col_hi < col_lo) col_hi = col_lo;
  if (row_hi < row_lo) row_hi = row_lo;
}

double eval_component(Point p, const GaussianComponent& comp) { return GaussianKernel(comp).density(p.u, p.v); }

std::vector<std::size_t> selected_components(const GmmParams& gmm, double threshold_gt) {
  std::vector<std::size_t> out;
  if (gmm.components.empty()) return out;
  const double cut = threshold_gt / static_cast<double>(gmm.components.size());
  for (std::size_t c = 0; c < gmm.components.size(); ++c) {
    if (gmm.components[c].weight > cut) out.push_back(c);
  }
  return out;
}

std::vector<double> render_values(const GmmParams& gmm, int width, int height, double threshold_gt,
                                  double mahalanobis_cutoff) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "render canvas must be at least 1x1");
  const auto selected = selected_components(gmm, threshold_gt);
  if (selected.empty()) {
    throw Error(ErrorKind::AllComponentsFiltered, "no component has weight above G_t/C");
  }
  std::vector<double> out(static_cast<std::size_t>(width) * height, 0.0);
  const double cut2 = mahalanobis_cutoff * mahalanobis_cutoff;
  for (std::size_t c : selected) {
    const GaussianComponent& comp = gmm.components[c];
    const GaussianKernel kernel(comp);
    int r0, r1, c0, c1;
    kernel.pixel_box(mahalanobis_cutoff, width, height, r0, r1, c0, c1);
    const double scale = comp.weight * kernel.peak();
    for (int i = r0; i < r1; ++i) {
      const double v = pixel_center(i);
      double* row = out.data() + static_cast<std::size_t>(i) * width;
      for (int j = c0; j < c1; ++j) {
        const double m2 = kernel.mahalanobis2(pixel_center(j), v);
        if (m2 > cut2) continue;
        row[j] += scale * std::exp(-0.5 * m2);
      }
    }
  }
  return out;
}

SaliencyMap render_map(const GmmParams& gmm, const RenderConfig& cfg) {
  if (cfg.threshold_gt < 0.0) throw Error(ErrorKind::InvalidArgument, "G_t must be nonnegative");
  SaliencyMap map(cfg.width, cfg.height,
                  render_values(gmm, cfg.width, cfg.height, cfg.threshold_gt, cfg.mahalanobis_cutoff));
  return normalize_map(map, cfg.normalize);
}

std::vector<double> blur_kernel_1d(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  const int radius = static_cast<int>(std::floor(4.0 * sigma));
  std::vector<double> k(2 * static_cast<std::size_t>(radius) + 1);
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double w = std::exp(-0.5 * (t * t) / (sigma * sigma));
    k[static_cast<std::size_t>(t + radius)] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

SaliencyMap blur_fixations(const FixationPoints& points, double sigma, const RenderConfig& cfg) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "blur needs at least one fixation");
  const int width = cfg.width > 0 ? cfg.width : points.width();
  const int height = cfg.height > 0 ? cfg.height : points.height();
  const auto kernel = blur_kernel_1d(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);

  // Sparse impulses: splat the separable kernel around each occupied pixel.
  std::vector<double> impulses(static_cast<std::size_t>(width) * height, 0.0);
  for (const Point& p : points.points()) {
    const int j = static_cast<int>(std::floor(p.u));
    const int i = static_cast<int>(std::floor(p.v));
    if (i < 0 || i >= height || j < 0 || j >= width) {
      throw Error(ErrorKind::BoundsError, "fixation outside the render canvas");
    }
    impulses[static_cast<std::size_t>(i) * width + j] += 1.0;
  }
  std::vector<double> out(impulses.size(), 0.0);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double h = impulses[static_cast<std::size_t>(i) * width + j];
      if (h == 0.0) continue;
      const int r0 = std::max(0, i - radius), r1 = std::min(height - 1, i + radius);
      const int c0 = std::max(0, j - radius), c1 = std::min(width - 1, j + radius);
      for (int r = r0; r <= r1; ++r) {
        const double wr = h * kernel[static_cast<std::size_t>(r - i + radius)];
        double* row = out.data() + static_cast<std::size_t>(r) * width;
        const double* kc = kernel.data() + (c0 - j + radius);
        for (int c = c0; c <= c1; ++c) row[c] += wr * kc[c - c0];
      }
    }
  }
  return normalize_map(SaliencyMap(width, height, std::move(out)), cfg.normalize);
}

SaliencyMap normalize_map(const SaliencyMap& map, Normalization mode) {
  if (mode == Normalization::None) return map;
  const double denom = mode == Normalization::SumToOne ? map.sum() : map.max();
  if (!(denom > 0.0)) throw Error(ErrorKind::ZeroMap, "cannot normalize an all-zero map");
  std::vector<double> values(map.values().begin(), map.values().end());
  for (double& x : values) x /= denom;
  return SaliencyMap(map.width(), map.height(), std::move(values));
}

}  // namespace sgmm
