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

// Affine pixel-coordinate transforms and warping between views.
//
// Transforms act on pixel-center coordinates: (u, v) = (column, row) names
// the center of that pixel. Boxes use continuous coordinates where pixel
// (r, c) covers [c, c+1) x [r, r+1), so map_box shifts by half a pixel on
// each side of the transform. Warps sample by inverse mapping with
// nearest-neighbor rounding floor(x + 0.5) unless bilinear is requested.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "dvscell/error.hpp"
#include "dvscell/mask.hpp"

namespace dvscell {

struct Dims {
  int width = 0;
  int height = 0;
  bool operator==(const Dims&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Maps (u, v) to (a*u + b*v + tx, c*u + d*v + ty).
struct AffineTransform {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static AffineTransform identity() { return {}; }

  double determinant() const { return a * d - b * c; }

  Point apply(double u, double v) const {
    return {a * u + b * v + tx, c * u + d * v + ty};
  }
  Point apply(Point p) const { return apply(p.x, p.y); }

  bool operator==(const AffineTransform&) const = default;
};

inline AffineTransform inverse(const AffineTransform& t) {
  const double det = t.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-12) {
    throw Error(Errc::kNonInvertibleTransform,
                "determinant " + std::to_string(det));
  }
  AffineTransform inv;
  inv.a = t.d / det;
  inv.b = -t.b / det;
  inv.c = -t.c / det;
  inv.d = t.a / det;
  inv.tx = -(inv.a * t.tx + inv.b * t.ty);
  inv.ty = -(inv.c * t.tx + inv.d * t.ty);
  return inv;
}

// outer(inner(p)).
inline AffineTransform compose(const AffineTransform& outer,
                               const AffineTransform& inner) {
  AffineTransform r;
  r.a = outer.a * inner.a + outer.b * inner.c;
  r.b = outer.a * inner.b + outer.b * inner.d;
  r.c = outer.c * inner.a + outer.d * inner.c;
  r.d = outer.c * inner.b + outer.d * inner.d;
  r.tx = outer.a * inner.tx + outer.b * inner.ty + outer.tx;
  r.ty = outer.c * inner.tx + outer.d * inner.ty + outer.ty;
  return r;
}

struct RotatedFrame {
  AffineTransform transform;
  Dims out;
};

namespace detail {

// cos/sin of an angle in degrees, exact at multiples of 90.
inline std::array<double, 2> cos_sin_degrees(double theta) {
  double t = std::fmod(theta, 360.0);
  if (t < 0) t += 360.0;
  if (t == 0.0) return {1.0, 0.0};
  if (t == 90.0) return {0.0, 1.0};
  if (t == 180.0) return {-1.0, 0.0};
  if (t == 270.0) return {0.0, -1.0};
  const double rad = t * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

}  // namespace detail

// Rotation about the source center by theta degrees (counter-clockwise in
// the y-down pixel frame, i.e. the matrix [cos -sin; sin cos]) into an
// expanded canvas that holds the whole rotated source rectangle.
inline RotatedFrame rotation_transform(int width, int height, double theta) {
  if (width < 1 || height < 1) {
    throw Error(Errc::kInvalidDims, "rotation of an empty frame");
  }
  if (!std::isfinite(theta)) {
    throw Error(Errc::kInvalidConfig, "rotation angle must be finite");
  }
  const auto [cs, sn] = detail::cos_sin_degrees(theta);
  const double ac = std::abs(cs), as = std::abs(sn);
  // The epsilon keeps exact products such as 100*1.0 from rounding up.
  const int out_w = static_cast<int>(std::ceil(width * ac + height * as - 1e-9));
  const int out_h = static_cast<int>(std::ceil(width * as + height * ac - 1e-9));
  const double sx = (width - 1) / 2.0, sy = (height - 1) / 2.0;
  const double dx = (out_w - 1) / 2.0, dy = (out_h - 1) / 2.0;
  AffineTransform t;
  t.a = cs;
  t.b = -sn;
  t.c = sn;
  t.d = cs;
  t.tx = dx - (cs * sx - sn * sy);
  t.ty = dy - (sn * sx + cs * sy);
  return {t, {out_w, out_h}};
}

enum class Interpolation { kNearest, kBilinear };

class Raster {
 public:
  Raster(int width, int height, int channels)
      : Raster(width, height, channels,
               std::vector<std::uint8_t>(
                   static_cast<std::size_t>(std::max(width, 0)) *
                   std::max(height, 0) * std::max(channels, 0))) {}

  Raster(int width, int height, int channels, std::vector<std::uint8_t> samples)
      : width_(width), height_(height), channels_(channels),
        samples_(std::move(samples)) {
    if (width < 1 || height < 1) {
      throw Error(Errc::kInvalidDims, "raster dimensions must be >= 1");
    }
    if (channels != 1 && channels != 3) {
      throw Error(Errc::kInvalidDims, "raster must have 1 or 3 channels");
    }
    if (samples_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(Errc::kDimensionMismatch, "raster sample count mismatch");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  Dims dims() const { return {width_, height_}; }

  std::uint8_t at(int row, int col, int ch = 0) const {
    return samples_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  std::uint8_t& at(int row, int col, int ch = 0) {
    return samples_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }

  const std::vector<std::uint8_t>& samples() const { return samples_; }
  std::vector<std::uint8_t>& samples() { return samples_; }

  bool operator==(const Raster&) const = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<std::uint8_t> samples_;
};

namespace detail {

inline int nearest_index(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace detail

inline Raster warp_raster(const Raster& img, const AffineTransform& t, Dims out,
                          Interpolation interp) {
  const AffineTransform inv = inverse(t);
  Raster dst(out.width, out.height, img.channels());
  const int ch = img.channels();
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Point src = inv.apply(x, y);
      if (interp == Interpolation::kNearest) {
        const int u = detail::nearest_index(src.x);
        const int v = detail::nearest_index(src.y);
        if (u < 0 || v < 0 || u >= img.width() || v >= img.height()) continue;
        for (int k = 0; k < ch; ++k) dst.at(y, x, k) = img.at(v, u, k);
        continue;
      }
      const double fu = std::floor(src.x), fv = std::floor(src.y);
      const int u0 = static_cast<int>(fu), v0 = static_cast<int>(fv);
      const double wx = src.x - fu, wy = src.y - fv;
      if (u0 < -1 || v0 < -1 || u0 >= img.width() || v0 >= img.height()) continue;
      for (int k = 0; k < ch; ++k) {
        auto sample = [&](int v, int u) -> double {
          if (u < 0 || v < 0 || u >= img.width() || v >= img.height()) return 0.0;
          return img.at(v, u, k);
        };
        const double val = sample(v0, u0) * (1 - wx) * (1 - wy) +
                           sample(v0, u0 + 1) * wx * (1 - wy) +
                           sample(v0 + 1, u0) * (1 - wx) * wy +
                           sample(v0 + 1, u0 + 1) * wx * wy;
        dst.at(y, x, k) =
            static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return dst;
}

// Tight hull of the transformed corners, in continuous coordinates.
inline BBox map_box(const BBox& box, const AffineTransform& t) {
  const std::array<Point, 4> corners{{{box.x, box.y},
                                      {box.x + box.w, box.y},
                                      {box.x, box.y + box.h},
                                      {box.x + box.w, box.y + box.h}}};
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (const Point& p : corners) {
    const Point q = t.apply(p.x - 0.5, p.y - 0.5);
    x0 = std::min(x0, q.x + 0.5);
    y0 = std::min(y0, q.y + 0.5);
    x1 = std::max(x1, q.x + 0.5);
    y1 = std::max(y1, q.y + 0.5);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

// Nearest-neighbor warp of a sparse mask. Only destination pixels whose
// inverse image can round into the source region are visited.
inline MaskCrop warp_crop(const MaskCrop& src, const AffineTransform& t, Dims out) {
  const AffineTransform inv = inverse(t);
  MaskCrop dst;
  dst.frame_width = out.width;
  dst.frame_height = out.height;
  if (src.empty_region() || out.width < 1 || out.height < 1) return dst;

  // Source positions rounding into the region span [x0-0.5, x0+w-0.5).
  const std::array<Point, 4> corners{{
      {src.x0 - 0.5, src.y0 - 0.5},
      {src.x0 + src.width - 0.5, src.y0 - 0.5},
      {src.x0 - 0.5, src.y0 + src.height - 0.5},
      {src.x0 + src.width - 0.5, src.y0 + src.height - 0.5},
  }};
  double hx0 = INFINITY, hy0 = INFINITY, hx1 = -INFINITY, hy1 = -INFINITY;
  for (const Point& p : corners) {
    const Point q = t.apply(p);
    hx0 = std::min(hx0, q.x);
    hy0 = std::min(hy0, q.y);
    hx1 = std::max(hx1, q.x);
    hy1 = std::max(hy1, q.y);
  }
  const int x_lo = std::max(0, static_cast<int>(std::floor(hx0)) - 1);
  const int y_lo = std::max(0, static_cast<int>(std::floor(hy0)) - 1);
  const int x_hi = std::min(out.width - 1, static_cast<int>(std::ceil(hx1)) + 1);
  const int y_hi = std::min(out.height - 1, static_cast<int>(std::ceil(hy1)) + 1);
  if (x_lo > x_hi || y_lo > y_hi) return dst;

  const int w = x_hi - x_lo + 1, h = y_hi - y_lo + 1;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  int c_min = w, c_max = -1, r_min = h, r_max = -1;
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const Point s = inv.apply(x, y);
      const int u = detail::nearest_index(s.x) - src.x0;
      const int v = detail::nearest_index(s.y) - src.y0;
      if (u < 0 || v < 0 || u >= src.width || v >= src.height) continue;
      if (!src.local(v, u)) continue;
      const int r = y - y_lo, c = x - x_lo;
      bits[static_cast<std::size_t>(r) * w + c] = 1;
      c_min = std::min(c_min, c);
      c_max = std::max(c_max, c);
      r_min = std::min(r_min, r);
      r_max = std::max(r_max, r);
    }
  }
  if (c_max < 0) return dst;
  dst.x0 = x_lo + c_min;
  dst.y0 = y_lo + r_min;
  dst.width = c_max - c_min + 1;
  dst.height = r_max - r_min + 1;
  dst.bits.resize(static_cast<std::size_t>(dst.width) * dst.height);
  for (int r = 0; r < dst.height; ++r) {
    for (int c = 0; c < dst.width; ++c) {
      dst.set_local(r, c, bits[static_cast<std::size_t>(r + r_min) * w + c + c_min] != 0);
    }
  }
  return dst;
}

inline BinaryMask warp_mask(const BinaryMask& mask, const AffineTransform& t,
                            Dims out) {
  return to_mask(warp_crop(crop_of(mask), t, out));
}

inline RleMask warp_mask(const RleMask& mask, const AffineTransform& t, Dims out) {
  return to_rle(warp_crop(crop_of(mask), t, out));
}

}  // namespace dvscell
