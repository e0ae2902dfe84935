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

// Binary instance masks and their run-length encoded form.
//
// BinaryMask stores one byte per pixel in row-major order. RleMask stores
// run lengths over the column-major pixel scan, the first run counting
// background pixels (possibly zero). MaskCrop is the sparse working form the
// pipeline uses for full-frame masks whose foreground covers a small region:
// it holds only the tight bounding region and converts to and from RLE in
// time proportional to the region plus the frame width.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvscell/error.hpp"

namespace dvscell {

enum class Connectivity { kFour = 4, kEight = 8 };

// Axis-aligned box in continuous pixel coordinates; pixel (row r, col c)
// covers [c, c+1) x [r, r+1).
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

class BinaryMask {
 public:
  BinaryMask(int width, int height)
      : width_(checked_dim(width)), height_(checked_dim(height)),
        bits_(static_cast<std::size_t>(width) * height, 0) {}

  BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
      : width_(checked_dim(width)), height_(checked_dim(height)),
        bits_(std::move(bits)) {
    if (bits_.size() != static_cast<std::size_t>(width_) * height_) {
      throw Error(Errc::kDimensionMismatch,
                  "bit count " + std::to_string(bits_.size()) +
                      " != " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  void set(int row, int col, bool value = true) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
  }

  std::span<const std::uint8_t> bits() const { return bits_; }

  std::int64_t area() const {
    return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  static int checked_dim(int v) {
    if (v < 1) throw Error(Errc::kInvalidDims, "mask dimension must be >= 1");
    return v;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const RleMask&) const = default;
};

// Throws InvalidRle unless the counts cover exactly width*height pixels and
// only the leading run is zero.
inline void validate_rle(const RleMask& rle) {
  if (rle.width < 1 || rle.height < 1) {
    throw Error(Errc::kInvalidRle, "non-positive RLE dimensions");
  }
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i > 0 && rle.counts[i] == 0) {
      throw Error(Errc::kInvalidRle,
                  "zero run at position " + std::to_string(i));
    }
    sum += rle.counts[i];
  }
  const auto expected = static_cast<std::uint64_t>(rle.width) * rle.height;
  if (sum != expected) {
    throw Error(Errc::kInvalidRle, "counts sum " + std::to_string(sum) +
                                       " != " + std::to_string(expected));
  }
}

// Calls fn(start, length) for every foreground run, start being the
// column-major pixel index.
template <typename Fn>
void for_each_foreground_run(const RleMask& rle, Fn&& fn) {
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i % 2 == 1 && rle.counts[i] > 0) fn(pos, std::uint64_t{rle.counts[i]});
    pos += rle.counts[i];
  }
}

inline std::int64_t rle_area(const RleMask& rle) {
  std::int64_t area = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) area += rle.counts[i];
  return area;
}

namespace detail {

// Appends runs while keeping the leading-background, no-interior-zero form.
class RunBuilder {
 public:
  void push(bool value, std::uint64_t n) {
    if (n == 0) return;
    if (value == current_) {
      run_ += n;
    } else {
      counts_.push_back(static_cast<std::uint32_t>(run_));
      current_ = value;
      run_ = n;
    }
  }

  std::vector<std::uint32_t> finish() && {
    counts_.push_back(static_cast<std::uint32_t>(run_));
    return std::move(counts_);
  }

 private:
  std::vector<std::uint32_t> counts_;
  bool current_ = false;
  std::uint64_t run_ = 0;
};

}  // namespace detail

inline RleMask rle_encode(const BinaryMask& mask) {
  detail::RunBuilder runs;
  const int w = mask.width();
  const int h = mask.height();
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) runs.push(mask.at(r, c), 1);
  }
  return RleMask{w, h, std::move(runs).finish()};
}

inline BinaryMask rle_decode(const RleMask& rle) {
  validate_rle(rle);
  BinaryMask mask(rle.width, rle.height);
  const auto h = static_cast<std::uint64_t>(rle.height);
  for_each_foreground_run(rle, [&](std::uint64_t start, std::uint64_t len) {
    for (std::uint64_t p = start; p < start + len; ++p) {
      mask.set(static_cast<int>(p % h), static_cast<int>(p / h));
    }
  });
  return mask;
}

// Sparse full-frame mask: foreground lies inside the region
// [x0, x0+width) x [y0, y0+height) of a frame_width x frame_height frame.
struct MaskCrop {
  int frame_width = 0;
  int frame_height = 0;
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major over the region

  bool empty_region() const { return width == 0 || height == 0; }
  bool local(int row, int col) const {
    return bits[static_cast<std::size_t>(row) * width + col] != 0;
  }
  void set_local(int row, int col, bool value = true) {
    bits[static_cast<std::size_t>(row) * width + col] = value ? 1 : 0;
  }
  std::int64_t area() const {
    return std::count(bits.begin(), bits.end(), std::uint8_t{1});
  }
};

inline BBox bbox_of_mask(const RleMask& rle) {
  const auto h = static_cast<std::uint64_t>(rle.height);
  bool any = false;
  std::uint64_t col_min = 0, col_max = 0, row_min = 0, row_max = 0;
  for_each_foreground_run(rle, [&](std::uint64_t start, std::uint64_t len) {
    const std::uint64_t last = start + len - 1;
    const std::uint64_t c0 = start / h, c1 = last / h;
    std::uint64_t r0 = start % h, r1 = last % h;
    if (c0 != c1) {
      r0 = 0;
      r1 = h - 1;
    }
    if (!any) {
      col_min = c0;
      row_min = r0;
      row_max = r1;
      any = true;
    }
    col_max = c1;
    row_min = std::min(row_min, r0);
    row_max = std::max(row_max, r1);
  });
  if (!any) return BBox{};
  return BBox{static_cast<double>(col_min), static_cast<double>(row_min),
              static_cast<double>(col_max - col_min + 1),
              static_cast<double>(row_max - row_min + 1)};
}

inline BBox bbox_of_mask(const BinaryMask& mask) {
  int c0 = mask.width(), c1 = -1, r0 = mask.height(), r1 = -1;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c)) continue;
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
    }
  }
  if (c1 < 0) return BBox{};
  return BBox{double(c0), double(r0), double(c1 - c0 + 1), double(r1 - r0 + 1)};
}

inline MaskCrop crop_of(const RleMask& rle) {
  validate_rle(rle);
  MaskCrop crop;
  crop.frame_width = rle.width;
  crop.frame_height = rle.height;
  const BBox box = bbox_of_mask(rle);
  crop.x0 = static_cast<int>(box.x);
  crop.y0 = static_cast<int>(box.y);
  crop.width = static_cast<int>(box.w);
  crop.height = static_cast<int>(box.h);
  crop.bits.assign(static_cast<std::size_t>(crop.width) * crop.height, 0);
  const auto h = static_cast<std::uint64_t>(rle.height);
  for_each_foreground_run(rle, [&](std::uint64_t start, std::uint64_t len) {
    auto col = static_cast<int>(start / h);
    auto row = static_cast<int>(start % h);
    for (std::uint64_t i = 0; i < len; ++i) {
      crop.set_local(row - crop.y0, col - crop.x0);
      if (++row == rle.height) {
        row = 0;
        ++col;
      }
    }
  });
  return crop;
}

inline MaskCrop crop_of(const BinaryMask& mask) {
  const BBox box = bbox_of_mask(mask);
  MaskCrop crop;
  crop.frame_width = mask.width();
  crop.frame_height = mask.height();
  crop.x0 = static_cast<int>(box.x);
  crop.y0 = static_cast<int>(box.y);
  crop.width = static_cast<int>(box.w);
  crop.height = static_cast<int>(box.h);
  crop.bits.resize(static_cast<std::size_t>(crop.width) * crop.height);
  for (int r = 0; r < crop.height; ++r) {
    for (int c = 0; c < crop.width; ++c) {
      crop.set_local(r, c, mask.at(r + crop.y0, c + crop.x0));
    }
  }
  return crop;
}

inline RleMask to_rle(const MaskCrop& crop) {
  const auto fh = static_cast<std::uint64_t>(crop.frame_height);
  detail::RunBuilder runs;
  if (crop.empty_region()) {
    runs.push(false, static_cast<std::uint64_t>(crop.frame_width) * fh);
  } else {
    runs.push(false, static_cast<std::uint64_t>(crop.x0) * fh);
    const auto below = fh - crop.y0 - crop.height;
    for (int c = 0; c < crop.width; ++c) {
      runs.push(false, static_cast<std::uint64_t>(crop.y0));
      for (int r = 0; r < crop.height; ++r) runs.push(crop.local(r, c), 1);
      runs.push(false, below);
    }
    runs.push(false, static_cast<std::uint64_t>(crop.frame_width - crop.x0 -
                                                crop.width) * fh);
  }
  return RleMask{crop.frame_width, crop.frame_height, std::move(runs).finish()};
}

inline BinaryMask to_mask(const MaskCrop& crop) {
  BinaryMask mask(crop.frame_width, crop.frame_height);
  for (int r = 0; r < crop.height; ++r) {
    for (int c = 0; c < crop.width; ++c) {
      if (crop.local(r, c)) mask.set(r + crop.y0, c + crop.x0);
    }
  }
  return mask;
}

// Intersection-over-union by merging the two run lists; 0 when both are empty.
inline double mask_iou(const RleMask& a, const RleMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(Errc::kDimensionMismatch, "mask_iou on differently sized masks");
  }
  std::uint64_t inter = 0;
  std::size_t ia = 0, ib = 0;
  const std::size_t na = a.counts.size(), nb = b.counts.size();
  std::uint64_t ca = na ? a.counts[0] : 0, cb = nb ? b.counts[0] : 0;
  bool va = false, vb = false;
  while (ia < na && ib < nb) {
    const std::uint64_t step = std::min(ca, cb);
    if (va && vb) inter += step;
    ca -= step;
    cb -= step;
    if (ca == 0 && ++ia < na) {
      ca = a.counts[ia];
      va = !va;
    }
    if (cb == 0 && ++ib < nb) {
      cb = b.counts[ib];
      vb = !vb;
    }
  }
  const auto uni = static_cast<std::uint64_t>(rle_area(a) + rle_area(b)) - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(Errc::kDimensionMismatch, "mask_iou on differently sized masks");
  }
  std::uint64_t inter = 0, uni = 0;
  const auto ba = a.bits(), bb = b.bits();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    inter += ba[i] & bb[i];
    uni += ba[i] | bb[i];
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double bbox_iou(const BBox& a, const BBox& b) {
  if (a.area() <= 0.0 || b.area() <= 0.0) return 0.0;
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  // Edge differences on the same path as the intersection, so a box against
  // itself gives exactly 1.
  const double area_a = ((a.x + a.w) - a.x) * ((a.y + a.h) - a.y);
  const double area_b = ((b.x + b.w) - b.x) * ((b.y + b.h) - b.y);
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

// True when the boxes share interior area; cheap rejection before mask IoU.
inline bool boxes_overlap(const BBox& a, const BBox& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h &&
         b.y < a.y + a.h;
}

struct Components {
  int count = 0;
  std::vector<std::int32_t> labels;  // row-major; 0 = background
};

namespace detail {

inline std::int32_t find_root(std::vector<std::int32_t>& parent, std::int32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

inline void unite(std::vector<std::int32_t>& parent, std::int32_t a,
                  std::int32_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b) std::swap(a, b);
  parent[a] = b;
}

// Two-pass union-find labeling over a row-major bit grid.
inline Components label_grid(std::span<const std::uint8_t> bits, int width,
                             int height, Connectivity conn) {
  Components out;
  out.labels.assign(bits.size(), 0);
  std::vector<std::int32_t> parent{0};
  auto idx = [width](int r, int c) {
    return static_cast<std::size_t>(r) * width + c;
  };
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (!bits[idx(r, c)]) continue;
      std::int32_t best = 0;
      auto consider = [&](int rr, int cc) {
        if (rr < 0 || cc < 0 || cc >= width) return;
        const std::int32_t l = out.labels[idx(rr, cc)];
        if (l == 0) return;
        if (best == 0) {
          best = l;
        } else {
          unite(parent, best, l);
        }
      };
      consider(r, c - 1);
      consider(r - 1, c);
      if (conn == Connectivity::kEight) {
        consider(r - 1, c - 1);
        consider(r - 1, c + 1);
      }
      if (best == 0) {
        best = static_cast<std::int32_t>(parent.size());
        parent.push_back(best);
      }
      out.labels[idx(r, c)] = best;
    }
  }
  // Renumber roots in first-encounter row-major order.
  std::vector<std::int32_t> final_id(parent.size(), 0);
  for (auto& l : out.labels) {
    if (l == 0) continue;
    const std::int32_t root = find_root(parent, l);
    if (final_id[root] == 0) final_id[root] = ++out.count;
    l = final_id[root];
  }
  return out;
}

}  // namespace detail

inline Components connected_components(const BinaryMask& mask,
                                       Connectivity conn) {
  return detail::label_grid(mask.bits(), mask.width(), mask.height(), conn);
}

inline int component_count(const MaskCrop& crop, Connectivity conn) {
  if (crop.empty_region()) return 0;
  return detail::label_grid(crop.bits, crop.width, crop.height, conn).count;
}

inline int component_count(const RleMask& rle, Connectivity conn) {
  return component_count(crop_of(rle), conn);
}

namespace detail {

// Background pixels not 4-connected to the grid border become foreground.
inline void fill_holes_grid(std::vector<std::uint8_t>& bits, int width,
                            int height) {
  std::vector<std::uint8_t> outside(bits.size(), 0);
  std::vector<std::size_t> stack;
  auto seed = [&](int r, int c) {
    const auto i = static_cast<std::size_t>(r) * width + c;
    if (!bits[i] && !outside[i]) {
      outside[i] = 1;
      stack.push_back(i);
    }
  };
  for (int c = 0; c < width; ++c) {
    seed(0, c);
    seed(height - 1, c);
  }
  for (int r = 0; r < height; ++r) {
    seed(r, 0);
    seed(r, width - 1);
  }
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const int r = static_cast<int>(i / width), c = static_cast<int>(i % width);
    if (r > 0) seed(r - 1, c);
    if (r + 1 < height) seed(r + 1, c);
    if (c > 0) seed(r, c - 1);
    if (c + 1 < width) seed(r, c + 1);
  }
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!outside[i]) bits[i] = 1;
  }
}

}  // namespace detail

inline BinaryMask fill_holes(const BinaryMask& mask) {
  std::vector<std::uint8_t> bits(mask.bits().begin(), mask.bits().end());
  detail::fill_holes_grid(bits, mask.width(), mask.height());
  return BinaryMask(mask.width(), mask.height(), std::move(bits));
}

inline MaskCrop fill_holes(MaskCrop crop) {
  if (!crop.empty_region()) {
    detail::fill_holes_grid(crop.bits, crop.width, crop.height);
  }
  return crop;
}

}  // namespace dvscell
