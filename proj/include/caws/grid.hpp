// Copyright 2026 The CAWS Planner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "caws/error.hpp"

namespace caws {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Boolean occupancy grid. Cell (ix, iy) covers
/// [origin + (ix, iy) * resolution, origin + (ix + 1, iy + 1) * resolution);
/// iy grows along world +y.
class OccupancyGrid {
 public:
  OccupancyGrid() : OccupancyGrid(1, 1, 1.0, Eigen::Vector2d::Zero()) {}

  OccupancyGrid(int width, int height, double resolution,
                Eigen::Vector2d origin, std::vector<bool> cells = {})
      : width_(width),
        height_(height),
        resolution_(resolution),
        origin_(std::move(origin)),
        cells_(std::move(cells)) {
    if (width_ < 1 || height_ < 1) {
      throw Error(ErrorCode::kValidationError,
                  "map: width and height must be at least 1");
    }
    if (!(resolution_ > 0.0)) {
      throw Error(ErrorCode::kValidationError, "map.resolution must be positive");
    }
    if (cells_.empty()) cells_.assign(static_cast<std::size_t>(width_) * height_, false);
    if (cells_.size() != static_cast<std::size_t>(width_) * height_) {
      throw Error(ErrorCode::kValidationError, "map: cell count mismatch");
    }
    build_clearance();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Eigen::Vector2d& origin() const { return origin_; }
  const std::vector<bool>& cells() const { return cells_; }

  bool occupied(int ix, int iy) const {
    return cells_[static_cast<std::size_t>(iy) * width_ + ix];
  }

  Eigen::Vector2d cell_center(int ix, int iy) const {
    return origin_ + Eigen::Vector2d(ix + 0.5, iy + 0.5) * resolution_;
  }

  bool inside(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d q = (p - origin_) / resolution_;
    return q.x() >= 0.0 && q.y() >= 0.0 && q.x() <= width_ && q.y() <= height_;
  }

  /// Distance (m) from the center of the cell containing `p` to the nearest
  /// occupied cell center; +inf on an empty map, 0 outside the grid.
  double clearance(const Eigen::Vector2d& p) const {
    const int ix = static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_));
    const int iy = static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_));
    if (ix < 0 || iy < 0 || ix >= width_ || iy >= height_) return 0.0;
    return clearance_[static_cast<std::size_t>(iy) * width_ + ix];
  }

  OccupancyGrid translated(const Eigen::Vector2d& offset) const {
    return OccupancyGrid(width_, height_, resolution_, origin_ + offset, cells_);
  }

 private:
  // Exact Euclidean distance transform (Felzenszwalb & Huttenlocher), in
  // cells, then scaled to meters.
  void build_clearance() {
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = cells_.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = cells_[i] ? 0.0 : 1e20;
    std::vector<double> f(std::max(width_, height_));
    std::vector<double> out(f.size());
    std::vector<int> v(f.size());
    std::vector<double> z(f.size() + 1);
    auto transform_1d = [&](int len) {
      int k = 0;
      v[0] = 0;
      z[0] = -inf;
      z[1] = inf;
      for (int q = 1; q < len; ++q) {
        auto intersect = [&](int p) {
          return ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
        };
        double s = intersect(v[k]);
        while (s <= z[k]) {
          --k;
          s = intersect(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
      }
      k = 0;
      for (int q = 0; q < len; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        out[q] = dq * dq + f[v[k]];
      }
    };
    for (int x = 0; x < width_; ++x) {
      for (int y = 0; y < height_; ++y) f[y] = d[static_cast<std::size_t>(y) * width_ + x];
      transform_1d(height_);
      for (int y = 0; y < height_; ++y) d[static_cast<std::size_t>(y) * width_ + x] = out[y];
    }
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) f[x] = d[static_cast<std::size_t>(y) * width_ + x];
      transform_1d(width_);
      for (int x = 0; x < width_; ++x) d[static_cast<std::size_t>(y) * width_ + x] = out[x];
    }
    clearance_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      clearance_[i] = d[i] >= 1e19 ? inf : std::sqrt(d[i]) * resolution_;
    }
  }

  int width_;
  int height_;
  double resolution_;
  Eigen::Vector2d origin_;
  std::vector<bool> cells_;
  std::vector<double> clearance_;
};

/// Body-frame rectangle centered on the control center, optionally inflated
/// by a disc of radius `inflation`.
struct Footprint {
  double half_length = 0.5;
  double half_width = 0.5;
  double inflation = 0.0;

  double circumradius() const {
    return std::hypot(half_length, half_width) + inflation;
  }

  void validate() const {
    if (!(half_length > 0.0 && half_width > 0.0)) {
      throw Error(ErrorCode::kValidationError,
                  "robot footprint half_length/half_width must be positive");
    }
    if (!(inflation >= 0.0)) {
      throw Error(ErrorCode::kValidationError,
                  "robot footprint inflation must be non-negative");
    }
  }
};

/// True iff an occupied cell center lies inside the (inflated) footprint at
/// `pose`, or a footprint corner lies outside the grid.
inline bool collides(const OccupancyGrid& grid, const Footprint& footprint,
                     const Pose2& pose) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const Eigen::Vector2d center(pose.x, pose.y);
  Eigen::Vector2d lo = center;
  Eigen::Vector2d hi = center;
  for (int sx = -1; sx <= 1; sx += 2) {
    for (int sy = -1; sy <= 1; sy += 2) {
      const double bx = sx * footprint.half_length;
      const double by = sy * footprint.half_width;
      const Eigen::Vector2d corner = center + Eigen::Vector2d(c * bx - s * by, s * bx + c * by);
      if (!grid.inside(corner)) return true;
      lo = lo.cwiseMin(corner);
      hi = hi.cwiseMax(corner);
    }
  }
  // Every occupied center is farther than the circumradius plus the
  // cell-containment slack.
  const double slack = footprint.circumradius() + grid.resolution();
  if (grid.clearance(center) > slack) return false;

  const double res = grid.resolution();
  const Eigen::Vector2d& origin = grid.origin();
  const double infl = footprint.inflation;
  const int ix0 = std::max(0, static_cast<int>(std::floor((lo.x() - infl - origin.x()) / res - 0.5)));
  const int iy0 = std::max(0, static_cast<int>(std::floor((lo.y() - infl - origin.y()) / res - 0.5)));
  const int ix1 = std::min(grid.width() - 1, static_cast<int>(std::ceil((hi.x() + infl - origin.x()) / res - 0.5)));
  const int iy1 = std::min(grid.height() - 1, static_cast<int>(std::ceil((hi.y() + infl - origin.y()) / res - 0.5)));
  for (int iy = iy0; iy <= iy1; ++iy) {
    for (int ix = ix0; ix <= ix1; ++ix) {
      if (!grid.occupied(ix, iy)) continue;
      const Eigen::Vector2d d = grid.cell_center(ix, iy) - center;
      // Body-frame offset of the cell center from the rectangle.
      const double bx = std::abs(c * d.x() + s * d.y()) - footprint.half_length;
      const double by = std::abs(-s * d.x() + c * d.y()) - footprint.half_width;
      const double ox = std::max(bx, 0.0);
      const double oy = std::max(by, 0.0);
      if (ox * ox + oy * oy <= infl * infl) return true;
    }
  }
  return false;
}

}  // namespace caws
