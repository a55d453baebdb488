#pragma once

#include <vector>

#include "sgmm/core.hpp"

namespace sgmm {

struct TransformConfig {
  CovarianceMode mode = CovarianceMode::Diagonal;
  // beta in softplus_beta(x) = log(1 + exp(beta x)) / beta.
  double var_activation = 1.0;
  double var_floor = 1.0;
  // rho_max: correlation is corr_bound * tanh(raw) in Full mode.
  double corr_bound = 0.99;

  void validate() const;
};

// Offsets are clamped to [kOffsetMargin, 1 - kOffsetMargin] of a cell so the
// mean stays strictly inside the canvas even where the sigmoid saturates in
// floating point. The clamp is inactive for |raw| below ~20.
inline constexpr double kOffsetMargin = 1e-9;

AnchorGrid make_anchor_grid(AnchorLayout layout, int rows, int cols, int canvas_width, int canvas_height);

GmmParams transform_params(const RawParamMap& raw, const AnchorGrid& grid, const TransformConfig& cfg);

// Partials of a scalar objective w.r.t. one component's transformed parameters.
struct ComponentGrad {
  double weight = 0.0;
  double mu_u = 0.0;
  double mu_v = 0.0;
  double var_u = 0.0;
  double var_v = 0.0;
  double cov_uv = 0.0;
};

// Backward pass of transform_params: J^T d_theta, shaped like raw.
RawParamMap transform_backward(const RawParamMap& raw, const AnchorGrid& grid, const TransformConfig& cfg,
                               const std::vector<ComponentGrad>& d_theta);

double sigmoid(double x) noexcept;
double softplus(double x, double beta) noexcept;

}  // namespace sgmm
