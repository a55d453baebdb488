#pragma once

// Central finite-difference harness for the loss gradients.

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sgmm/loss_grad.hpp"
#include "sgmm/render.hpp"
#include "sgmm/transform.hpp"

namespace gradcheck {

inline constexpr double kRelStep = 1e-4;
inline constexpr double kBoundaryMargin = 1e-3;

// Fourth-order central difference: offsets -2h, -h, +h, +2h.
inline constexpr std::array<double, 4> kStencil = {-2.0, -1.0, 1.0, 2.0};

inline double derivative(const std::array<double, 4>& f, double h) {
  return (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
}

// Six classes over transformed parameters, three over raw parameters.
inline const std::array<const char*, 9> kClassNames = {"weight",     "mu_u",      "mu_v",
                                                       "var_u",      "var_v",     "cov_uv",
                                                       "raw_weight", "raw_mean",  "raw_scale"};

struct Stats {
  std::array<double, 9> max_rel{};
  std::array<int, 9> checked{};
  std::array<int, 9> excluded{};

  double worst() const {
    double w = 0;
    for (double x : max_rel) w = std::max(w, x);
    return w;
  }
  void record(int cls, double rel) {
    max_rel[cls] = std::max(max_rel[cls], rel);
    ++checked[cls];
  }
};

inline double theta_get(const sgmm::GaussianComponent& c, int k) {
  switch (k) {
    case 0: return c.weight;
    case 1: return c.mu_u;
    case 2: return c.mu_v;
    case 3: return c.var_u;
    case 4: return c.var_v;
    default: return c.cov_uv;
  }
}

inline double& theta_ref(sgmm::GaussianComponent& c, int k) {
  switch (k) {
    case 0: return c.weight;
    case 1: return c.mu_u;
    case 2: return c.mu_v;
    case 3: return c.var_u;
    case 4: return c.var_v;
    default: return c.cov_uv;
  }
}

inline double grad_get(const sgmm::ComponentGrad& g, int k) {
  switch (k) {
    case 0: return g.weight;
    case 1: return g.mu_u;
    case 2: return g.mu_v;
    case 3: return g.var_u;
    case 4: return g.var_v;
    default: return g.cov_uv;
  }
}

struct Instance {
  sgmm::RawParamMap raw;
  sgmm::AnchorGrid grid;
  sgmm::TransformConfig tcfg;
  sgmm::SaliencyMap gt;
};

// Random raw parameters on a 2x2 grid over a 32x24 canvas and a noisy
// smooth target.
inline Instance random_instance(std::mt19937_64& rng, sgmm::CovarianceMode mode) {
  constexpr int W = 32, H = 24;
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> scale(2.0, 40.0), unit(0.0, 1.0);
  Instance in{sgmm::RawParamMap(2, 2), sgmm::make_anchor_grid(sgmm::AnchorLayout::Square, 2, 2, W, H), {}, {}};
  in.tcfg.mode = mode;
  for (int c = 0; c < in.raw.cells(); ++c) {
    in.raw.at(c, sgmm::kRawWeight) = z(rng);
    in.raw.at(c, sgmm::kRawMeanU) = 1.5 * z(rng);
    in.raw.at(c, sgmm::kRawMeanV) = 1.5 * z(rng);
    in.raw.at(c, sgmm::kRawScaleU) = scale(rng);
    in.raw.at(c, sgmm::kRawScaleV) = scale(rng);
    in.raw.at(c, sgmm::kRawScaleUV) = z(rng);
  }
  sgmm::GmmParams target;
  target.canvas_width = W;
  target.canvas_height = H;
  for (int k = 0; k < 3; ++k) {
    sgmm::GaussianComponent g;
    g.weight = 1.0 / 3;
    g.mu_u = W * unit(rng);
    g.mu_v = H * unit(rng);
    g.var_u = scale(rng);
    g.var_v = scale(rng);
    g.cov_uv = 0.5 * (2 * unit(rng) - 1) * std::sqrt(g.var_u * g.var_v);
    target.components.push_back(g);
  }
  auto v = sgmm::render_values(target, W, H, 0.0, sgmm::kNoCutoff);
  double peak = 0;
  for (double x : v) peak = std::max(peak, x);
  for (double& x : v) x += 0.1 * peak * unit(rng);
  in.gt = sgmm::SaliencyMap(W, H, std::move(v));
  return in;
}

inline bool near_boundary(const sgmm::GmmParams& gmm, double threshold_gt) {
  const double cut = threshold_gt / static_cast<double>(gmm.size());
  for (const auto& c : gmm.components) {
    if (std::abs(c.weight - cut) < kBoundaryMargin) return true;
  }
  return false;
}

// Checks cc_loss_grad on the transformed parameters of the instance.
inline void check_theta(const Instance& in, double threshold_gt, Stats& stats) {
  const sgmm::GmmParams gmm = sgmm::transform_params(in.raw, in.grid, in.tcfg);
  const auto analytic = sgmm::cc_loss_grad(gmm, in.gt, threshold_gt, sgmm::kNoCutoff);
  const auto base_sel = sgmm::selected_components(gmm, threshold_gt);
  for (std::size_t c = 0; c < gmm.size(); ++c) {
    for (int k = 0; k < 6; ++k) {
      const double x = theta_get(gmm.components[c], k);
      const double h = kRelStep * std::max(std::abs(x), 1.0);
      std::array<sgmm::GmmParams, 4> shifted;
      bool same_selection = true;
      for (int s = 0; s < 4; ++s) {
        shifted[s] = gmm;
        theta_ref(shifted[s].components[c], k) += kStencil[s] * h;
        same_selection = same_selection && sgmm::selected_components(shifted[s], threshold_gt) == base_sel;
      }
      const bool boundary = k == 0 && std::abs(gmm.components[c].weight - threshold_gt / gmm.size()) < kBoundaryMargin;
      if (boundary || !same_selection) {
        ++stats.excluded[k];
        continue;
      }
      std::array<double, 4> f;
      for (int s = 0; s < 4; ++s) f[s] = sgmm::cc_loss(shifted[s], in.gt, threshold_gt, sgmm::kNoCutoff).loss;
      stats.record(k, oracle::rel_err(grad_get(analytic.d_theta[c], k), derivative(f, h)));
    }
  }
}

inline int raw_class(int slot) {
  if (slot == sgmm::kRawWeight) return 6;
  if (slot == sgmm::kRawMeanU || slot == sgmm::kRawMeanV) return 7;
  return 8;
}

// Checks raw_grad through the whole raw -> transform -> render -> loss path.
inline void check_raw(const Instance& in, double threshold_gt, Stats& stats) {
  const auto analytic = sgmm::raw_grad(in.raw, in.grid, in.tcfg, in.gt, threshold_gt, sgmm::kNoCutoff);
  const auto base_sel = sgmm::selected_components(sgmm::transform_params(in.raw, in.grid, in.tcfg), threshold_gt);
  const bool boundary = near_boundary(sgmm::transform_params(in.raw, in.grid, in.tcfg), threshold_gt);
  for (int c = 0; c < in.raw.cells(); ++c) {
    for (int slot = 0; slot < sgmm::kRawParamsPerCell; ++slot) {
      const int cls = raw_class(slot);
      const double x = in.raw.at(c, slot);
      const double h = kRelStep * std::max(std::abs(x), 1.0);
      std::array<sgmm::GmmParams, 4> shifted;
      bool same_selection = true;
      for (int s = 0; s < 4; ++s) {
        sgmm::RawParamMap r = in.raw;
        r.at(c, slot) += kStencil[s] * h;
        shifted[s] = sgmm::transform_params(r, in.grid, in.tcfg);
        same_selection = same_selection && sgmm::selected_components(shifted[s], threshold_gt) == base_sel;
      }
      if ((slot == sgmm::kRawWeight && boundary) || !same_selection) {
        ++stats.excluded[cls];
        continue;
      }
      std::array<double, 4> f;
      for (int s = 0; s < 4; ++s) f[s] = sgmm::cc_loss(shifted[s], in.gt, threshold_gt, sgmm::kNoCutoff).loss;
      stats.record(cls, oracle::rel_err(analytic.d_raw->at(c, slot), derivative(f, h)));
    }
  }
}

}  // namespace gradcheck
