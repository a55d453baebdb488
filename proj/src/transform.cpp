#include "sgmm/transform.hpp"

#include <algorithm>
#include <cmath>

namespace sgmm {

void TransformConfig::validate() const {
  if (!(var_activation > 0.0)) throw Error(ErrorKind::InvalidArgument, "softplus beta must be > 0");
  if (!(var_floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "var_floor must be > 0");
  if (!(corr_bound > 0.0 && corr_bound < 1.0)) throw Error(ErrorKind::InvalidArgument, "corr_bound must be in (0,1)");
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x, double beta) noexcept {
  const double t = beta * x;
  return (std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)))) / beta;
}

AnchorGrid make_anchor_grid(AnchorLayout layout, int rows, int cols, int canvas_width, int canvas_height) {
  if (rows < 1 || cols < 1) throw Error(ErrorKind::InvalidArgument, "anchor grid needs at least one cell");
  if (canvas_width < 1 || canvas_height < 1) throw Error(ErrorKind::InvalidArgument, "canvas must be at least 1x1");
  AnchorGrid grid;
  grid.layout = layout;
  grid.rows = rows;
  grid.cols = cols;
  grid.canvas_width = canvas_width;
  grid.canvas_height = canvas_height;
  // A constrained axis uses the whole canvas extent as its single cell.
  const bool free_u = layout == AnchorLayout::Square || layout == AnchorLayout::HorizontalOnly;
  const bool free_v = layout == AnchorLayout::Square || layout == AnchorLayout::VerticalOnly;
  grid.cell_width = free_u ? static_cast<double>(canvas_width) / cols : canvas_width;
  grid.cell_height = free_v ? static_cast<double>(canvas_height) / rows : canvas_height;
  grid.anchors.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      grid.anchors.push_back({free_u ? static_cast<double>(j) : 0.0, free_v ? static_cast<double>(i) : 0.0});
    }
  }
  return grid;
}

namespace {

void check_shapes(const RawParamMap& raw, const AnchorGrid& grid) {
  if (raw.rows() != grid.rows || raw.cols() != grid.cols ||
      grid.anchors.size() != static_cast<std::size_t>(grid.cells())) {
    throw Error(ErrorKind::ShapeMismatch, "raw parameter grid and anchor grid disagree");
  }
}

double clamped_offset(double x) { return std::clamp(sigmoid(x), kOffsetMargin, 1.0 - kOffsetMargin); }

double offset_slope(double x) {
  const double s = sigmoid(x);
  if (s <= kOffsetMargin || s >= 1.0 - kOffsetMargin) return 0.0;
  return s * (1.0 - s);
}

}  // namespace

GmmParams transform_params(const RawParamMap& raw, const AnchorGrid& grid, const TransformConfig& cfg) {
  cfg.validate();
  check_shapes(raw, grid);
  if (!raw.all_finite()) throw Error(ErrorKind::InvalidArgument, "raw parameters must be finite");
  const int cells = raw.cells();

  GmmParams gmm;
  gmm.canvas_width = grid.canvas_width;
  gmm.canvas_height = grid.canvas_height;
  gmm.components.resize(cells);

  double peak = raw.at(0, kRawWeight);
  for (int c = 1; c < cells; ++c) peak = std::max(peak, raw.at(c, kRawWeight));
  double total = 0.0;
  for (int c = 0; c < cells; ++c) {
    gmm.components[c].weight = std::exp(raw.at(c, kRawWeight) - peak);
    total += gmm.components[c].weight;
  }

  const double beta = cfg.var_activation;
  for (int c = 0; c < cells; ++c) {
    GaussianComponent& g = gmm.components[c];
    g.weight /= total;
    g.mu_u = (clamped_offset(raw.at(c, kRawMeanU)) + grid.anchors[c].u) * grid.cell_width;
    g.mu_v = (clamped_offset(raw.at(c, kRawMeanV)) + grid.anchors[c].v) * grid.cell_height;
    g.var_u = cfg.var_floor + softplus(raw.at(c, kRawScaleU), beta);
    switch (cfg.mode) {
      case CovarianceMode::Spherical:
        g.var_v = g.var_u;
        g.cov_uv = 0.0;
        break;
      case CovarianceMode::Diagonal:
        g.var_v = cfg.var_floor + softplus(raw.at(c, kRawScaleV), beta);
        g.cov_uv = 0.0;
        break;
      case CovarianceMode::Full: {
        g.var_v = cfg.var_floor + softplus(raw.at(c, kRawScaleV), beta);
        const double rho = cfg.corr_bound * std::tanh(raw.at(c, kRawScaleUV));
        g.cov_uv = rho * std::sqrt(g.var_u) * std::sqrt(g.var_v);
        break;
      }
    }
  }
  return gmm;
}

RawParamMap transform_backward(const RawParamMap& raw, const AnchorGrid& grid, const TransformConfig& cfg,
                               const std::vector<ComponentGrad>& d_theta) {
  cfg.validate();
  check_shapes(raw, grid);
  const int cells = raw.cells();
  if (d_theta.size() != static_cast<std::size_t>(cells)) {
    throw Error(ErrorKind::ShapeMismatch, "gradient length does not match grid cells");
  }
  const GmmParams gmm = transform_params(raw, grid, cfg);
  RawParamMap out(raw.rows(), raw.cols());

  // Softmax: d logit_c = pi_c (g_c - sum_k pi_k g_k).
  double mean_grad = 0.0;
  for (int c = 0; c < cells; ++c) mean_grad += gmm.components[c].weight * d_theta[c].weight;

  const double beta = cfg.var_activation;
  for (int c = 0; c < cells; ++c) {
    const GaussianComponent& g = gmm.components[c];
    const ComponentGrad& d = d_theta[c];
    out.at(c, kRawWeight) = g.weight * (d.weight - mean_grad);
    out.at(c, kRawMeanU) = d.mu_u * grid.cell_width * offset_slope(raw.at(c, kRawMeanU));
    out.at(c, kRawMeanV) = d.mu_v * grid.cell_height * offset_slope(raw.at(c, kRawMeanV));
    // softplus_beta'(x) = sigmoid(beta x).
    const double slope_u = sigmoid(beta * raw.at(c, kRawScaleU));
    switch (cfg.mode) {
      case CovarianceMode::Spherical:
        out.at(c, kRawScaleU) = (d.var_u + d.var_v) * slope_u;
        break;
      case CovarianceMode::Diagonal:
        out.at(c, kRawScaleU) = d.var_u * slope_u;
        out.at(c, kRawScaleV) = d.var_v * sigmoid(beta * raw.at(c, kRawScaleV));
        break;
      case CovarianceMode::Full: {
        // cov = rho sqrt(var_u var_v): dcov/dvar_u = cov / (2 var_u).
        const double eff_u = d.var_u + d.cov_uv * g.cov_uv / (2.0 * g.var_u);
        const double eff_v = d.var_v + d.cov_uv * g.cov_uv / (2.0 * g.var_v);
        out.at(c, kRawScaleU) = eff_u * slope_u;
        out.at(c, kRawScaleV) = eff_v * sigmoid(beta * raw.at(c, kRawScaleV));
        const double t = std::tanh(raw.at(c, kRawScaleUV));
        out.at(c, kRawScaleUV) =
            d.cov_uv * std::sqrt(g.var_u) * std::sqrt(g.var_v) * cfg.corr_bound * (1.0 - t * t);
        break;
      }
    }
  }
  return out;
}

}  // namespace sgmm
