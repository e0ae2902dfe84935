// Copyright 2026 The dvscell Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Even-odd polygon fill in continuous image coordinates: pixel (r, c) is
// foreground iff its center (c + 0.5, r + 0.5) lies inside.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dvscell/error.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/mask.hpp"

namespace dvscell {

using Polygon = std::vector<Point>;

// Shrinks the region to the foreground's bounding box.
inline MaskCrop tighten(const MaskCrop& crop) {
  int c0 = crop.width, c1 = -1, r0 = crop.height, r1 = -1;
  for (int r = 0; r < crop.height; ++r) {
    for (int c = 0; c < crop.width; ++c) {
      if (!crop.local(r, c)) continue;
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
    }
  }
  MaskCrop out;
  out.frame_width = crop.frame_width;
  out.frame_height = crop.frame_height;
  if (c1 < 0) return out;
  out.x0 = crop.x0 + c0;
  out.y0 = crop.y0 + r0;
  out.width = c1 - c0 + 1;
  out.height = r1 - r0 + 1;
  out.bits.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) out.set_local(r, c, crop.local(r + r0, c + c0));
  }
  return out;
}

inline MaskCrop rasterize_polygon(const Polygon& poly, Dims frame) {
  if (poly.size() < 3) {
    throw Error(Errc::kDegeneratePolygon, "polygon needs at least 3 points");
  }
  if (frame.width < 1 || frame.height < 1) {
    throw Error(Errc::kInvalidDims, "empty raster frame");
  }
  double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
  for (const Point& p : poly) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(Errc::kDegeneratePolygon, "non-finite polygon vertex");
    }
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  MaskCrop crop;
  crop.frame_width = frame.width;
  crop.frame_height = frame.height;
  const int c_lo = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  const int c_hi = std::min(frame.width - 1, static_cast<int>(std::ceil(max_x)));
  const int r_lo = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int r_hi = std::min(frame.height - 1, static_cast<int>(std::ceil(max_y)));
  if (c_lo > c_hi || r_lo > r_hi) return crop;
  crop.x0 = c_lo;
  crop.y0 = r_lo;
  crop.width = c_hi - c_lo + 1;
  crop.height = r_hi - r_lo + 1;
  crop.bits.assign(static_cast<std::size_t>(crop.width) * crop.height, 0);

  const std::size_t n = poly.size();
  std::vector<double> xs;
  for (int r = r_lo; r <= r_hi; ++r) {
    const double y = r + 0.5;
    xs.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& pi = poly[i];
      const Point& pj = poly[j];
      if ((pi.y > y) != (pj.y > y)) {
        xs.push_back((pj.x - pi.x) * (y - pi.y) / (pj.y - pi.y) + pi.x);
      }
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    // Crossings strictly to the right of the center decide parity.
    std::size_t left = 0;
    for (int c = c_lo; c <= c_hi; ++c) {
      const double x = c + 0.5;
      while (left < xs.size() && xs[left] <= x) ++left;
      if ((xs.size() - left) % 2 == 1) crop.set_local(r - r_lo, c - c_lo);
    }
  }
  return tighten(crop);
}

inline Polygon transform_polygon(const Polygon& poly, const AffineTransform& t) {
  // Continuous coordinates sit half a pixel off the pixel-center frame.
  Polygon out;
  out.reserve(poly.size());
  for (const Point& p : poly) {
    const Point q = t.apply(p.x - 0.5, p.y - 0.5);
    out.push_back({q.x + 0.5, q.y + 0.5});
  }
  return out;
}

}  // namespace dvscell
