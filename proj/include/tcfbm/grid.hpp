#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tcfbm/error.hpp"

namespace tcfbm {

/**
 * @brief Strictly increasing mesh starting at 0 with at least two points.
 */
class TimeGrid {
 public:
  TimeGrid() = default;

  explicit TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    require(points_.size() >= 2, "TimeGrid needs at least two points");
    require(points_.front() == 0.0, "TimeGrid must start at 0");
    for (std::size_t i = 1; i < points_.size(); ++i)
      require(points_[i] > points_[i - 1], "TimeGrid points must be strictly increasing");
  }

  static TimeGrid uniform(double T, std::size_t cells) {
    require(T > 0.0 && cells >= 1, "uniform grid needs T > 0 and at least one cell");
    std::vector<double> p(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) p[i] = T * static_cast<double>(i) / static_cast<double>(cells);
    p[cells] = T;
    return TimeGrid(std::move(p));
  }

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double back() const { return points_.back(); }

  /// Index i with points[i] <= t < points[i+1]; the last cell for t = back().
  std::size_t cell_of(double t) const {
    auto it = std::upper_bound(points_.begin(), points_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - points_.begin());
    if (i == 0) return 0;
    return std::min(i - 1, points_.size() - 2);
  }

  bool is_uniform(double rel = 1e-12) const {
    double h = points_.back() / static_cast<double>(points_.size() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (std::abs(points_[i] - h * static_cast<double>(i)) > rel * points_.back()) return false;
    return true;
  }

 private:
  std::vector<double> points_;
};

/**
 * @brief Real or vector valued samples aligned with a TimeGrid, row-major (point, component).
 */
struct SampledFunction {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> values;

  SampledFunction() = default;
  SampledFunction(TimeGrid g, std::size_t d) : grid(std::move(g)), dim(d), values(grid.size() * d, 0.0) {}
  SampledFunction(TimeGrid g, std::size_t d, std::vector<double> v) : grid(std::move(g)), dim(d), values(std::move(v)) {
    require(values.size() == grid.size() * dim, "SampledFunction: values not aligned with grid");
  }

  std::size_t size() const { return grid.size(); }
  double& operator()(std::size_t i, std::size_t k = 0) { return values[i * dim + k]; }
  double operator()(std::size_t i, std::size_t k = 0) const { return values[i * dim + k]; }

  /// Piecewise-linear interpolation of component k.
  double at(double t, std::size_t k = 0) const {
    if (t <= 0.0) return (*this)(0, k);
    if (t >= grid.back()) return (*this)(size() - 1, k);
    std::size_t i = grid.cell_of(t);
    double w = (t - grid[i]) / (grid[i + 1] - grid[i]);
    return (1.0 - w) * (*this)(i, k) + w * (*this)(i + 1, k);
  }
};

}  // namespace tcfbm
