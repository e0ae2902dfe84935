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

// Visual check of one image: detection contours and boxes colored by class
// and by TP/FP status at a single IoU threshold, missed GTs outlined.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dvscell/detection.hpp"
#include "dvscell/eval.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/mask.hpp"

namespace dvscell {

using Rgb = std::array<std::uint8_t, 3>;

inline Rgb overlay_color(int class_id, bool true_positive) {
  if (true_positive) return class_id == 2 ? Rgb{0, 200, 220} : Rgb{40, 220, 40};
  return class_id == 2 ? Rgb{230, 40, 220} : Rgb{240, 40, 40};
}

inline constexpr Rgb kMissedColor{250, 220, 0};

namespace detail {

inline void put(Raster& img, int r, int c, const Rgb& color) {
  if (r < 0 || c < 0 || r >= img.height() || c >= img.width()) return;
  for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = color[ch];
}

inline void draw_contour(Raster& img, const RleMask& mask, const Rgb& color) {
  const MaskCrop m = crop_of(mask);
  auto fg = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < m.height && c < m.width && m.local(r, c);
  };
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (fg(r, c) && !(fg(r - 1, c) && fg(r + 1, c) && fg(r, c - 1) && fg(r, c + 1))) {
        put(img, m.y0 + r, m.x0 + c, color);
      }
    }
  }
}

inline void draw_box(Raster& img, const BBox& b, const Rgb& color) {
  const int x0 = static_cast<int>(b.x), y0 = static_cast<int>(b.y);
  const int x1 = static_cast<int>(b.x + b.w) - 1, y1 = static_cast<int>(b.y + b.h) - 1;
  for (int x = x0; x <= x1; ++x) {
    put(img, y0, x, color);
    put(img, y1, x, color);
  }
  for (int y = y0; y <= y1; ++y) {
    put(img, y, x0, color);
    put(img, y, x1, color);
  }
}

}  // namespace detail

// `base` may be gray or RGB; the result is RGB. Matching is per class at
// iou_thresh on masks.
inline Raster render_overlay(const Raster& base, std::span<const Detection> dets,
                             std::span<const GtInstance> gts, double iou_thresh = 0.5) {
  Raster img(base.width(), base.height(), 3);
  for (int r = 0; r < base.height(); ++r) {
    for (int c = 0; c < base.width(); ++c) {
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = base.at(r, c, base.channels() == 3 ? ch : 0);
    }
  }
  std::vector<int> classes;
  for (const auto& d : dets) classes.push_back(d.class_id);
  for (const auto& g : gts) classes.push_back(g.class_id);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int cls : classes) {
    std::vector<Detection> cd;
    std::vector<GtInstance> cg;
    for (const auto& d : dets) {
      if (d.class_id == cls) cd.push_back(d);
    }
    for (const auto& g : gts) {
      if (g.class_id == cls) cg.push_back(g);
    }
    const MatchResult m = match_detections(cd, cg, iou_thresh, IouType::kSegm);
    for (std::size_t g = 0; g < cg.size(); ++g) {
      if (!m.gt_matched[g] && !cg[g].ignore) detail::draw_contour(img, cg[g].mask, kMissedColor);
    }
    for (std::size_t i = 0; i < cd.size(); ++i) {
      const Rgb color = overlay_color(cls, m.status[i] != MatchStatus::kFalsePositive);
      detail::draw_box(img, cd[i].box, color);
      detail::draw_contour(img, cd[i].mask, color);
    }
  }
  return img;
}

}  // namespace dvscell
