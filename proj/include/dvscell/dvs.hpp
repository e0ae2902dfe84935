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

// Dual-view fusion: the original image and a rotated copy are detected
// separately, rotated-view masks are mapped back into the original frame,
// masks with more than one connected component are dropped and a relaxed
// NMS forms the candidate pool for mask selection.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dvscell/detection.hpp"
#include "dvscell/error.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/mask.hpp"

namespace dvscell {

enum class NmsMetric { kBox, kMask };

struct DvsConfig {
  double theta = 45.0;
  double nms_iou = 0.9;
  NmsMetric nms_metric = NmsMetric::kBox;
  Connectivity connectivity = Connectivity::kEight;
  std::int64_t min_mask_area = 0;  // 0 disables the area filter
  bool class_aware_nms = true;
  bool fill_holes = false;

  void validate() const {
    if (!std::isfinite(theta)) {
      throw Error(Errc::kInvalidConfig, "theta must be finite");
    }
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "nms_iou must lie in (0, 1]");
    }
    if (min_mask_area < 0) {
      throw Error(Errc::kInvalidConfig, "min_mask_area must be >= 0");
    }
  }
};

struct ViewImage {
  View view;
  Raster raster;
  AffineTransform transform;  // original frame -> this view
};

inline std::vector<ViewImage> generate_views(const Raster& img,
                                             const DvsConfig& cfg) {
  cfg.validate();
  const RotatedFrame frame = rotation_transform(img.width(), img.height(), cfg.theta);
  std::vector<ViewImage> views;
  views.push_back({View::kOriginal, img, AffineTransform::identity()});
  views.push_back({View::kRotated,
                   warp_raster(img, frame.transform, frame.out, Interpolation::kBilinear),
                   frame.transform});
  return views;
}

// Maps rotated-view detections into the original frame through inverse(t).
// Pixels landing outside the frame are dropped; boxes are recomputed from the
// mapped mask and detections left empty are removed.
inline std::vector<Detection> backmap(std::span<const Detection> dets,
                                      const AffineTransform& t, Dims orig) {
  const AffineTransform back = inverse(t);
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const Detection& d : dets) {
    MaskCrop mapped = warp_crop(crop_of(d.mask), back, orig);
    if (mapped.empty_region()) continue;
    Detection m = d;
    m.mask = to_rle(mapped);
    m.box = bbox_of_mask(m.mask);
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<Detection> simply_connected_filter(std::span<const Detection> dets,
                                                      Connectivity conn) {
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    if (component_count(d.mask, conn) == 1) out.push_back(d);
  }
  return out;
}

// Greedy NMS in canonical order. A detection survives iff its IoU with every
// already-kept detection of the same image (and class, when class_aware) is
// strictly below iou_thresh.
inline std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh,
                                  NmsMetric metric, bool class_aware) {
  std::vector<Detection> order(dets.begin(), dets.end());
  sort_canonical(order);
  std::vector<Detection> kept;
  std::vector<BBox> kept_mask_boxes;
  for (Detection& d : order) {
    const BBox mbox = metric == NmsMetric::kMask ? bbox_of_mask(d.mask) : d.box;
    bool keep = true;
    for (std::size_t i = 0; i < kept.size() && keep; ++i) {
      const Detection& k = kept[i];
      if (k.image_id != d.image_id) continue;
      if (class_aware && k.class_id != d.class_id) continue;
      double iou = 0.0;
      if (metric == NmsMetric::kBox) {
        iou = bbox_iou(k.box, d.box);
      } else if (boxes_overlap(kept_mask_boxes[i], mbox)) {
        iou = mask_iou(k.mask, d.mask);
      }
      keep = iou < iou_thresh;
    }
    if (keep) {
      kept.push_back(std::move(d));
      kept_mask_boxes.push_back(mbox);
    }
  }
  return kept;
}

// Candidate pool for one image: backmapped rotated detections joined with the
// original-view ones, filtered to simply connected masks, optionally
// area-filtered, then relaxed NMS. Output is in canonical order.
inline std::vector<Detection> dvs_fuse(std::span<const Detection> orig_dets,
                                       std::span<const Detection> rot_dets,
                                       const AffineTransform& t, Dims orig_dims,
                                       const DvsConfig& cfg) {
  cfg.validate();
  std::vector<Detection> pool;
  pool.reserve(orig_dets.size() + rot_dets.size());
  for (const Detection& d : orig_dets) {
    if (d.mask.width != orig_dims.width || d.mask.height != orig_dims.height) {
      throw Error(Errc::kDimensionMismatch,
                  "original-view detection " + std::to_string(d.det_id) +
                      " does not match the image size");
    }
    pool.push_back(d);
  }
  for (Detection& d : backmap(rot_dets, t, orig_dims)) pool.push_back(std::move(d));

  if (cfg.fill_holes) {
    for (Detection& d : pool) d.mask = to_rle(fill_holes(crop_of(d.mask)));
  }
  pool = simply_connected_filter(pool, cfg.connectivity);
  if (cfg.min_mask_area > 0) {
    std::erase_if(pool, [&](const Detection& d) {
      return rle_area(d.mask) < cfg.min_mask_area;
    });
  }
  return nms(pool, cfg.nms_iou, cfg.nms_metric, cfg.class_aware_nms);
}

}  // namespace dvscell
