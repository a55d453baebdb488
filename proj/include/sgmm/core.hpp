#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgmm/error.hpp"

namespace sgmm {

// Continuous image coordinates: u runs along the width (columns), v along
// the height (rows). Pixel (row i, col j) has its center at (j + 0.5, i + 0.5).
struct Point {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr double pixel_center(int index) { return index + 0.5; }

class FixationPoints {
 public:
  FixationPoints() = default;
  // Throws BoundsError if a point falls outside [0, width) x [0, height).
  FixationPoints(std::vector<Point> points, int width, int height);

  const std::vector<Point>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  friend bool operator==(const FixationPoints&, const FixationPoints&) = default;

 private:
  std::vector<Point> points_;
  int width_ = 0;
  int height_ = 0;
};

// Dense nonnegative field, row-major, height x width.
class SaliencyMap {
 public:
  SaliencyMap() = default;
  SaliencyMap(int width, int height, double fill = 0.0);
  // Throws InvalidArgument on size mismatch or negative/non-finite values.
  SaliencyMap(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  double at(int row, int col) const { return values_[static_cast<std::size_t>(row) * width_ + col]; }
  std::span<const double> values() const noexcept { return values_; }

  double sum() const;
  double max() const;

  bool same_shape(const SaliencyMap& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

enum class CovarianceMode { Spherical, Diagonal, Full };

const char* to_string(CovarianceMode mode);
CovarianceMode parse_covariance_mode(const std::string& text);

// One weighted bivariate normal. Covariance entries are second moments in
// pixels^2 (variances and covariance, not standard deviations).
struct GaussianComponent {
  double weight = 1.0;
  double mu_u = 0.0;
  double mu_v = 0.0;
  double var_u = 1.0;
  double var_v = 1.0;
  double cov_uv = 0.0;

  double determinant() const noexcept { return var_u * var_v - cov_uv * cov_uv; }
  bool positive_definite() const noexcept { return var_u > 0.0 && var_v > 0.0 && determinant() > 0.0; }

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct GmmParams {
  std::vector<GaussianComponent> components;
  int canvas_width = 0;
  int canvas_height = 0;

  std::size_t size() const noexcept { return components.size(); }
  double weight_sum() const;

  friend bool operator==(const GmmParams&, const GmmParams&) = default;
};

inline constexpr double kWeightSumTolerance = 1e-9;

// Empty result iff every GmmParams / GaussianComponent invariant holds.
std::vector<std::string> validate_gmm(const GmmParams& gmm);

// Number of unconstrained outputs per grid cell.
inline constexpr int kRawParamsPerCell = 6;

enum RawSlot : int {
  kRawWeight = 0,
  kRawMeanU = 1,
  kRawMeanV = 2,
  kRawScaleU = 3,
  kRawScaleV = 4,
  kRawScaleUV = 5,
};

// H x W grid of cells, each with kRawParamsPerCell unconstrained reals.
// Cell (i, j) maps to component index i * W + j.
class RawParamMap {
 public:
  RawParamMap() = default;
  RawParamMap(int rows, int cols, double fill = 0.0);
  RawParamMap(int rows, int cols, std::vector<double> values);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int cells() const noexcept { return rows_ * cols_; }

  double& at(int cell, int slot) { return values_[static_cast<std::size_t>(cell) * kRawParamsPerCell + slot]; }
  double at(int cell, int slot) const { return values_[static_cast<std::size_t>(cell) * kRawParamsPerCell + slot]; }
  double& at(int row, int col, int slot) { return at(row * cols_ + col, slot); }
  double at(int row, int col, int slot) const { return at(row * cols_ + col, slot); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const;

  friend bool operator==(const RawParamMap&, const RawParamMap&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

enum class AnchorLayout { Square, HorizontalOnly, VerticalOnly, None };

const char* to_string(AnchorLayout layout);
AnchorLayout parse_anchor_layout(const std::string& text);

// Reference points for the offset parameterization. Anchors are in cell
// units; a component mean is (offset + anchor) * cell_size per axis.
struct AnchorGrid {
  AnchorLayout layout = AnchorLayout::Square;
  int rows = 1;
  int cols = 1;
  int canvas_width = 0;
  int canvas_height = 0;
  std::vector<Point> anchors;  // one per cell, row-major
  double cell_width = 0.0;
  double cell_height = 0.0;

  int cells() const noexcept { return rows * cols; }
};

// Small dense row-major matrix for results like N x C responsibilities.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

}  // namespace sgmm
