#include "sgmm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace sgmm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorKind::AllComponentsFiltered: return "AllComponentsFiltered";
    case ErrorKind::ZeroMap: return "ZeroMap";
    case ErrorKind::ConstantMap: return "ConstantMap";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::MissingNegatives: return "MissingNegatives";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::BoundsError: return "BoundsError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

FixationPoints::FixationPoints(std::vector<Point> points, int width, int height)
    : points_(std::move(points)), width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidArgument, "canvas must be at least 1x1");
  }
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const Point& p = points_[k];
    if (!(p.u >= 0.0 && p.u < width && p.v >= 0.0 && p.v < height)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "point %zu (%g,%g) outside %dx%d canvas", k, p.u, p.v, width, height);
      throw Error(ErrorKind::BoundsError, buf);
    }
  }
}

SaliencyMap::SaliencyMap(int width, int height, double fill)
    : SaliencyMap(width, height, std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                                         static_cast<std::size_t>(std::max(height, 0)),
                                                     fill)) {}

SaliencyMap::SaliencyMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidArgument, "map must be at least 1x1");
  }
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorKind::InvalidArgument, "map value count does not match width*height");
  }
  for (double x : values_) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorKind::InvalidArgument, "map values must be finite and nonnegative");
    }
  }
}

double SaliencyMap::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double SaliencyMap::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

const char* to_string(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::Spherical: return "spherical";
    case CovarianceMode::Diagonal: return "diag";
    case CovarianceMode::Full: return "full";
  }
  return "unknown";
}

CovarianceMode parse_covariance_mode(const std::string& text) {
  if (text == "spherical" || text == "S") return CovarianceMode::Spherical;
  if (text == "diag" || text == "diagonal" || text == "D") return CovarianceMode::Diagonal;
  if (text == "full" || text == "F") return CovarianceMode::Full;
  throw Error(ErrorKind::InvalidArgument, "unknown covariance mode '" + text + "'");
}

const char* to_string(AnchorLayout layout) {
  switch (layout) {
    case AnchorLayout::Square: return "square";
    case AnchorLayout::HorizontalOnly: return "horizontal";
    case AnchorLayout::VerticalOnly: return "vertical";
    case AnchorLayout::None: return "none";
  }
  return "unknown";
}

AnchorLayout parse_anchor_layout(const std::string& text) {
  if (text == "square" || text == "AS") return AnchorLayout::Square;
  if (text == "horizontal" || text == "AH") return AnchorLayout::HorizontalOnly;
  if (text == "vertical" || text == "AV") return AnchorLayout::VerticalOnly;
  if (text == "none" || text == "AN") return AnchorLayout::None;
  throw Error(ErrorKind::InvalidArgument, "unknown anchor layout '" + text + "'");
}

double GmmParams::weight_sum() const {
  double s = 0.0;
  for (const auto& c : components) s += c.weight;
  return s;
}

std::vector<std::string> validate_gmm(const GmmParams& gmm) {
  std::vector<std::string> out;
  char buf[160];
  if (gmm.components.empty()) {
    out.emplace_back("no components (C must be >= 1)");
    return out;
  }
  for (std::size_t c = 0; c < gmm.components.size(); ++c) {
    const GaussianComponent& g = gmm.components[c];
    const bool finite = std::isfinite(g.weight) && std::isfinite(g.mu_u) && std::isfinite(g.mu_v) &&
                        std::isfinite(g.var_u) && std::isfinite(g.var_v) && std::isfinite(g.cov_uv);
    if (!finite) {
      std::snprintf(buf, sizeof buf, "component %zu has non-finite parameters", c);
      out.emplace_back(buf);
      continue;
    }
    if (g.weight < 0.0) {
      std::snprintf(buf, sizeof buf, "component %zu negative weight %g", c, g.weight);
      out.emplace_back(buf);
    }
    if (!g.positive_definite()) {
      std::snprintf(buf, sizeof buf, "component %zu not positive definite", c);
      out.emplace_back(buf);
    }
  }
  const double total = gmm.weight_sum();
  if (!(std::abs(total - 1.0) <= kWeightSumTolerance)) {
    std::snprintf(buf, sizeof buf, "weights sum %.12g ≠ 1", total);
    out.emplace_back(buf);
  }
  return out;
}

RawParamMap::RawParamMap(int rows, int cols, double fill)
    : RawParamMap(rows, cols,
                  std::vector<double>(static_cast<std::size_t>(std::max(rows * cols, 0)) * kRawParamsPerCell, fill)) {}

RawParamMap::RawParamMap(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows < 1 || cols < 1) throw Error(ErrorKind::InvalidArgument, "raw parameter grid must be at least 1x1");
  if (values_.size() != static_cast<std::size_t>(rows) * cols * kRawParamsPerCell) {
    throw Error(ErrorKind::ShapeMismatch, "raw parameter count does not match rows*cols*6");
  }
}

bool RawParamMap::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace sgmm
