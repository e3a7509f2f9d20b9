// Copyright 2026 The relpool authors
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

#include <algorithm>
#include <cmath>

#include "relpool/errors.hpp"

namespace relpool {

// Axis-aligned box in normalized image coordinates. The whole image is the
// unit square; y grows downward as in pixel space, so "above" means smaller y.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool contains(const Box& other) const {
    return other.x_min >= x_min && other.x_max <= x_max &&
           other.y_min >= y_min && other.y_max <= y_max;
  }

  bool operator==(const Box& other) const = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline void validate_box(const Box& b, const std::string& context) {
  if (!(std::isfinite(b.x_min) && std::isfinite(b.y_min) &&
        std::isfinite(b.x_max) && std::isfinite(b.y_max)))
    throw ValidationError(context + ": box coordinates must be finite");
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max))
    throw ValidationError(context + ": box must have positive extent");
  if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > 1.0 || b.y_max > 1.0)
    throw ValidationError(context + ": box must lie within the unit square");
}

// Cell of a G-by-G grid containing a point coordinate. Cell i covers
// [i/G, (i+1)/G); a coordinate of exactly 1.0 is clamped into the last cell.
inline int cell_index(double coord, int grid) {
  int i = static_cast<int>(std::floor(coord * grid));
  if (i < 0) i = 0;
  if (i >= grid) i = grid - 1;
  return i;
}

}  // namespace relpool
