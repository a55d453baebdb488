#include "sgmm/loss_grad.hpp"

#include <algorithm>
#include <functional>
#include <cmath>

namespace sgmm {

namespace {

struct Correlation {
  double cc = 0.0;
  double pred_mean = 0.0, gt_mean = 0.0;
  double sxx = 0.0, syy = 0.0;
};

Correlation correlate(const std::vector<double>& pred, std::span<const double> gt) {
  const std::size_t n = pred.size();
  Correlation r;
  for (std::size_t p = 0; p < n; ++p) {
    r.pred_mean += pred[p];
    r.gt_mean += gt[p];
  }
  r.pred_mean /= n;
  r.gt_mean /= n;
  double sxy = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double dx = pred[p] - r.pred_mean, dy = gt[p] - r.gt_mean;
    r.sxx += dx * dx;
    r.syy += dy * dy;
    sxy += dx * dy;
  }
  auto constant = [](auto first, auto last) {
    return std::adjacent_find(first, last, std::not_equal_to<>()) == last;
  };
  if (constant(pred.begin(), pred.end())) r.sxx = 0.0;
  if (constant(gt.begin(), gt.end())) r.syy = 0.0;
  if (!(r.sxx > 0.0)) throw Error(ErrorKind::ConstantMap, "reconstruction has zero variance");
  if (!(r.syy > 0.0)) throw Error(ErrorKind::ConstantMap, "ground truth has zero variance");
  r.cc = std::clamp(sxy / std::sqrt(r.sxx * r.syy), -1.0, 1.0);
  return r;
}

void check_canvas(const GmmParams& gmm, const SaliencyMap& gt) {
  if (gmm.canvas_width != 0 && (gmm.canvas_width != gt.width() || gmm.canvas_height != gt.height())) {
    throw Error(ErrorKind::ShapeMismatch, "GMM canvas and ground-truth map differ in size");
  }
}

}  // namespace

LossReport cc_loss(const GmmParams& gmm, const SaliencyMap& gt, double threshold_gt, double mahalanobis_cutoff) {
  check_canvas(gmm, gt);
  const auto pred = render_values(gmm, gt.width(), gt.height(), threshold_gt, mahalanobis_cutoff);
  const Correlation r = correlate(pred, gt.values());
  return {1.0 - r.cc, r.cc, selected_components(gmm, threshold_gt).size()};
}

GradReport cc_loss_grad(const GmmParams& gmm, const SaliencyMap& gt, double threshold_gt,
                        double mahalanobis_cutoff) {
  check_canvas(gmm, gt);
  const int width = gt.width(), height = gt.height();
  const auto pred = render_values(gmm, width, height, threshold_gt, mahalanobis_cutoff);
  const Correlation r = correlate(pred, gt.values());
  const auto selected = selected_components(gmm, threshold_gt);

  GradReport out;
  out.value = {1.0 - r.cc, r.cc, selected.size()};
  out.d_theta.assign(gmm.components.size(), ComponentGrad{});

  // dL/dx_p = -(y_p - y_mean) / sqrt(sxx syy) + cc (x_p - x_mean) / sxx.
  const std::span<const double> gt_values = gt.values();
  const double inv_norm = 1.0 / std::sqrt(r.sxx * r.syy);
  const double cc_over_sxx = r.cc / r.sxx;
  std::vector<double> pixel_grad(pred.size());
  for (std::size_t p = 0; p < pred.size(); ++p) {
    pixel_grad[p] = -(gt_values[p] - r.gt_mean) * inv_norm + cc_over_sxx * (pred[p] - r.pred_mean);
  }

  const double cut2 = mahalanobis_cutoff * mahalanobis_cutoff;
  for (std::size_t c : selected) {
    const GaussianComponent& comp = gmm.components[c];
    const GaussianKernel kernel(comp);
    const double det = comp.determinant();
    const double inv_uu = comp.var_v / det, inv_vv = comp.var_u / det, inv_uv = -comp.cov_uv / det;
    int r0, r1, c0, c1;
    kernel.pixel_box(mahalanobis_cutoff, width, height, r0, r1, c0, c1);

    double d_weight = 0.0, d_mu_u = 0.0, d_mu_v = 0.0, d_vu = 0.0, d_vv = 0.0, d_cov = 0.0;
    for (int i = r0; i < r1; ++i) {
      const double v = pixel_center(i);
      const double* grow = pixel_grad.data() + static_cast<std::size_t>(i) * width;
      for (int j = c0; j < c1; ++j) {
        const double u = pixel_center(j);
        const double m2 = kernel.mahalanobis2(u, v);
        if (m2 > cut2) continue;
        const double gn = grow[j] * kernel.peak() * std::exp(-0.5 * m2);
        double zu, zv;
        kernel.whitened(u, v, zu, zv);
        d_weight += gn;
        d_mu_u += gn * zu;
        d_mu_v += gn * zv;
        d_vu += gn * (zu * zu - inv_uu);
        d_vv += gn * (zv * zv - inv_vv);
        d_cov += gn * (zu * zv - inv_uv);
      }
    }
    // dN/dmu = N Sigma^{-1} d; dN/dSigma = N/2 (z z^T - Sigma^{-1}), with the
    // off-diagonal entry counted twice.
    ComponentGrad& g = out.d_theta[c];
    g.weight = d_weight;
    g.mu_u = comp.weight * d_mu_u;
    g.mu_v = comp.weight * d_mu_v;
    g.var_u = 0.5 * comp.weight * d_vu;
    g.var_v = 0.5 * comp.weight * d_vv;
    g.cov_uv = comp.weight * d_cov;
  }
  return out;
}

GradReport raw_grad(const RawParamMap& raw, const AnchorGrid& grid, const TransformConfig& tcfg,
                    const SaliencyMap& gt, double threshold_gt, double mahalanobis_cutoff) {
  const GmmParams gmm = transform_params(raw, grid, tcfg);
  GradReport out = cc_loss_grad(gmm, gt, threshold_gt, mahalanobis_cutoff);
  out.d_raw = transform_backward(raw, grid, tcfg, out.d_theta);
  return out;
}

}  // namespace sgmm
