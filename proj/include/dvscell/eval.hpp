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

// COCO-style average precision for boxes and masks.
//
// Per image and class, detections are matched greedily in canonical order to
// the unmatched ground truth of highest IoU at or above each threshold. Per
// class and threshold, AP is the 101-point interpolated precision; classes
// without ground truth are left out of the mean.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dvscell/detection.hpp"
#include "dvscell/error.hpp"
#include "dvscell/mask.hpp"
#include "dvscell/rng.hpp"

namespace dvscell {

enum class IouType { kBbox, kSegm };

constexpr std::string_view iou_type_name(IouType t) {
  return t == IouType::kBbox ? "bbox" : "segm";
}

// 0.50, 0.55, ..., 0.95 computed as exact hundredths.
inline std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

struct EvalConfig {
  IouType iou_type = IouType::kSegm;
  std::vector<double> iou_thresholds = default_iou_thresholds();
  int max_dets = 100;
  int recall_samples = 101;

  void validate() const {
    if (iou_thresholds.empty()) {
      throw Error(Errc::kInvalidConfig, "no IoU thresholds");
    }
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
      const double t = iou_thresholds[i];
      if (!(t > 0.0 && t <= 1.0) || (i > 0 && !(t > iou_thresholds[i - 1]))) {
        throw Error(Errc::kInvalidConfig,
                    "IoU thresholds must be strictly increasing in (0, 1]");
      }
    }
    if (max_dets < 1) throw Error(Errc::kInvalidConfig, "max_dets must be >= 1");
    if (recall_samples < 2) {
      throw Error(Errc::kInvalidConfig, "recall_samples must be >= 2");
    }
  }
};

enum class MatchStatus : std::int8_t { kFalsePositive, kTruePositive, kIgnored };

struct MatchResult {
  std::vector<MatchStatus> status;        // per detection, input order
  std::vector<std::int64_t> matched_gt;   // per detection: gt index or -1
  std::vector<bool> gt_matched;           // per ground truth
};

namespace detail {

// Pairwise IoUs, rows = detections, cols = ground truths.
inline std::vector<std::vector<double>> iou_matrix(std::span<const Detection> dets,
                                                   std::span<const GtInstance> gts,
                                                   IouType type) {
  std::vector<std::vector<double>> m(dets.size(), std::vector<double>(gts.size(), 0.0));
  if (type == IouType::kBbox) {
    for (std::size_t d = 0; d < dets.size(); ++d) {
      for (std::size_t g = 0; g < gts.size(); ++g) m[d][g] = bbox_iou(dets[d].box, gts[g].box);
    }
    return m;
  }
  std::vector<BBox> gt_boxes;
  for (const auto& g : gts) gt_boxes.push_back(bbox_of_mask(g.mask));
  for (std::size_t d = 0; d < dets.size(); ++d) {
    const BBox db = bbox_of_mask(dets[d].mask);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (boxes_overlap(db, gt_boxes[g])) m[d][g] = mask_iou(dets[d].mask, gts[g].mask);
    }
  }
  return m;
}

// order: detection indices in canonical order.
inline MatchResult match_from_ious(std::span<const std::size_t> order,
                                   const std::vector<std::vector<double>>& ious,
                                   std::span<const GtInstance> gts, double thresh) {
  MatchResult r;
  r.status.assign(ious.size(), MatchStatus::kFalsePositive);
  r.matched_gt.assign(ious.size(), -1);
  r.gt_matched.assign(gts.size(), false);
  for (std::size_t d : order) {
    std::int64_t best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].ignore || r.gt_matched[g]) continue;
      if (ious[d][g] >= thresh && ious[d][g] > best_iou) {
        best = static_cast<std::int64_t>(g);
        best_iou = ious[d][g];
      }
    }
    if (best >= 0) {
      r.status[d] = MatchStatus::kTruePositive;
      r.matched_gt[d] = best;
      r.gt_matched[best] = true;
      continue;
    }
    // Ignored ground truths absorb any number of detections.
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].ignore && ious[d][g] >= thresh && ious[d][g] > best_iou) {
        best = static_cast<std::int64_t>(g);
        best_iou = ious[d][g];
      }
    }
    if (best >= 0) {
      r.status[d] = MatchStatus::kIgnored;
      r.matched_gt[d] = best;
    }
  }
  return r;
}

inline std::vector<std::size_t> canonical_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return canonical_before(dets[a], dets[b]);
  });
  return order;
}

}  // namespace detail

// Single image, single class.
inline MatchResult match_detections(std::span<const Detection> dets,
                                    std::span<const GtInstance> gts, double iou_thresh,
                                    IouType type) {
  const auto ious = detail::iou_matrix(dets, gts, type);
  const auto order = detail::canonical_order(dets);
  return detail::match_from_ious(order, ious, gts, iou_thresh);
}

// Interpolated AP over recall_samples evenly spaced recall levels in [0, 1].
// is_tp is ordered by descending score. Undefined (nullopt) when n_gt is 0.
inline std::optional<double> average_precision(std::span<const std::uint8_t> is_tp,
                                               std::int64_t n_gt, int recall_samples = 101) {
  if (n_gt <= 0) return std::nullopt;
  const std::size_t n = is_tp.size();
  std::vector<double> recall(n), precision(n);
  std::int64_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int s = 0; s < recall_samples; ++s) {
    const double r = s / static_cast<double>(recall_samples - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[it - recall.begin()];
  }
  return sum / recall_samples;
}

struct ThresholdCounts {
  double iou_thresh = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct ClassAp {
  int class_id = 0;
  std::int64_t n_gt = 0;
  std::optional<double> ap;                       // nullopt without ground truth
  std::vector<std::optional<double>> per_threshold;
};

struct ApReport {
  IouType iou_type = IouType::kSegm;
  double ap = 0.0;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::vector<double> thresholds;
  std::vector<double> per_threshold;
  std::vector<ClassAp> per_class;
  std::vector<ThresholdCounts> counts;
  int valid_classes = 0;
};

inline ApReport evaluate(std::span<const Detection> preds, std::span<const GtInstance> gts,
                         std::span<const std::int64_t> image_ids, const EvalConfig& cfg) {
  cfg.validate();
  const std::set<std::int64_t> known(image_ids.begin(), image_ids.end());
  for (const auto& g : gts) {
    if (!known.contains(g.image_id)) {
      throw Error(Errc::kUnknownImage, "ground truth on image " + std::to_string(g.image_id));
    }
  }
  for (const auto& p : preds) {
    if (!known.contains(p.image_id)) {
      throw Error(Errc::kUnknownImage, "detection " + std::to_string(p.det_id) +
                                           " on image " + std::to_string(p.image_id));
    }
    if (cfg.iou_type == IouType::kSegm) {
      try {
        validate_rle(p.mask);
      } catch (const Error& e) {
        throw Error(Errc::kUndecodableMask,
                    "detection " + std::to_string(p.det_id) + ": " + e.what());
      }
    }
  }

  // Canonical order per image, truncated to max_dets.
  std::map<std::int64_t, std::vector<Detection>> dets_by_image;
  for (const auto& p : preds) dets_by_image[p.image_id].push_back(p);
  for (auto& [id, v] : dets_by_image) {
    sort_canonical(v);
    if (static_cast<int>(v.size()) > cfg.max_dets) v.resize(cfg.max_dets);
  }
  std::map<std::int64_t, std::vector<GtInstance>> gts_by_image;
  for (const auto& g : gts) gts_by_image[g.image_id].push_back(g);

  std::set<int> classes;
  for (const auto& g : gts) classes.insert(g.class_id);
  for (const auto& [id, v] : dets_by_image) {
    for (const auto& d : v) classes.insert(d.class_id);
  }

  const std::size_t nt = cfg.iou_thresholds.size();
  struct Scored {
    double score;
    std::int64_t det_id;
    std::int64_t image_id;
    bool tp;
  };

  ApReport report;
  report.iou_type = cfg.iou_type;
  report.thresholds = cfg.iou_thresholds;
  report.per_threshold.assign(nt, 0.0);
  report.counts.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) report.counts[t].iou_thresh = cfg.iou_thresholds[t];

  std::vector<double> threshold_sums(nt, 0.0);
  for (int cls : classes) {
    std::vector<std::vector<Scored>> scored(nt);
    std::int64_t n_gt = 0;
    for (std::int64_t image : image_ids) {
      std::vector<Detection> dets;
      if (auto it = dets_by_image.find(image); it != dets_by_image.end()) {
        for (const auto& d : it->second) {
          if (d.class_id == cls) dets.push_back(d);
        }
      }
      std::vector<GtInstance> cls_gts;
      if (auto it = gts_by_image.find(image); it != gts_by_image.end()) {
        for (const auto& g : it->second) {
          if (g.class_id == cls) cls_gts.push_back(g);
        }
      }
      for (const auto& g : cls_gts) n_gt += g.ignore ? 0 : 1;
      if (dets.empty()) continue;
      const auto ious = detail::iou_matrix(dets, cls_gts, cfg.iou_type);
      const auto order = detail::canonical_order(dets);
      for (std::size_t t = 0; t < nt; ++t) {
        const MatchResult m =
            detail::match_from_ious(order, ious, cls_gts, cfg.iou_thresholds[t]);
        for (std::size_t d : order) {
          if (m.status[d] == MatchStatus::kIgnored) continue;
          scored[t].push_back({dets[d].score, dets[d].det_id, image,
                               m.status[d] == MatchStatus::kTruePositive});
        }
      }
    }

    ClassAp cap;
    cap.class_id = cls;
    cap.n_gt = n_gt;
    double class_sum = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      auto& s = scored[t];
      std::sort(s.begin(), s.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.det_id != b.det_id) return a.det_id < b.det_id;
        return a.image_id < b.image_id;
      });
      std::vector<std::uint8_t> seq;
      seq.reserve(s.size());
      for (const auto& x : s) {
        seq.push_back(x.tp ? 1 : 0);
        report.counts[t].tp += x.tp ? 1 : 0;
        report.counts[t].fp += x.tp ? 0 : 1;
      }
      const auto ap = average_precision(seq, n_gt, cfg.recall_samples);
      cap.per_threshold.push_back(ap);
      if (ap) {
        threshold_sums[t] += *ap;
        class_sum += *ap;
      }
    }
    if (n_gt > 0) {
      cap.ap = class_sum / static_cast<double>(nt);
      ++report.valid_classes;
    }
    for (std::size_t t = 0; t < nt; ++t) report.counts[t].fn += n_gt;
    report.per_class.push_back(std::move(cap));
  }
  for (std::size_t t = 0; t < nt; ++t) {
    report.counts[t].fn -= report.counts[t].tp;
    if (report.valid_classes > 0) {
      report.per_threshold[t] = threshold_sums[t] / report.valid_classes;
    }
  }
  double total = 0.0;
  for (double v : report.per_threshold) total += v;
  report.ap = total / static_cast<double>(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    if (cfg.iou_thresholds[t] == 0.5) report.ap50 = report.per_threshold[t];
    if (cfg.iou_thresholds[t] == 0.75) report.ap75 = report.per_threshold[t];
  }
  return report;
}

// Convenience overload: the image set is every image carrying ground truth.
inline ApReport evaluate(std::span<const Detection> preds, std::span<const GtInstance> gts,
                         const EvalConfig& cfg) {
  std::set<std::int64_t> ids;
  for (const auto& g : gts) ids.insert(g.image_id);
  const std::vector<std::int64_t> v(ids.begin(), ids.end());
  return evaluate(preds, gts, v, cfg);
}

struct EvalSummary {
  ApReport bbox;
  ApReport segm;
};

inline EvalSummary evaluate_both(std::span<const Detection> preds,
                                 std::span<const GtInstance> gts,
                                 std::span<const std::int64_t> image_ids, EvalConfig cfg) {
  EvalSummary s;
  cfg.iou_type = IouType::kBbox;
  s.bbox = evaluate(preds, gts, image_ids, cfg);
  cfg.iou_type = IouType::kSegm;
  s.segm = evaluate(preds, gts, image_ids, cfg);
  return s;
}

// Six-metric table: box AP, AP50, AP75, then mask AP, AP50, AP75.
inline std::string format_metrics_table(const EvalSummary& s) {
  auto cell = [](const std::optional<double>& v) {
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof buf, "%.3f", *v);
    } else {
      std::snprintf(buf, sizeof buf, "%s", "n/a");
    }
    return std::string(buf);
  };
  const std::array<std::string, 6> head{"AP^bbox", "AP^bbox_0.50", "AP^bbox_0.75",
                                        "AP^segm", "AP^segm_0.50", "AP^segm_0.75"};
  const std::array<std::string, 6> vals{cell(s.bbox.ap), cell(s.bbox.ap50), cell(s.bbox.ap75),
                                        cell(s.segm.ap), cell(s.segm.ap50), cell(s.segm.ap75)};
  std::string line1, line2;
  for (std::size_t i = 0; i < 6; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%14s", i ? " " : "", head[i].c_str());
    line1 += buf;
    std::snprintf(buf, sizeof buf, "%s%14s", i ? " " : "", vals[i].c_str());
    line2 += buf;
  }
  return line1 + "\n" + line2 + "\n";
}

// Uniform random partition of {0..n-1} into three lists of the given sizes,
// each returned in ascending order.
inline std::array<std::vector<std::size_t>, 3> dataset_split(
    std::size_t n, const std::array<std::size_t, 3>& sizes, std::uint64_t seed) {
  if (sizes[0] + sizes[1] + sizes[2] != n) {
    throw Error(Errc::kSizeMismatch, "split sizes do not sum to " + std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
  std::array<std::vector<std::size_t>, 3> out;
  auto it = idx.begin();
  for (int p = 0; p < 3; ++p) {
    out[p].assign(it, it + static_cast<std::ptrdiff_t>(sizes[p]));
    std::sort(out[p].begin(), out[p].end());
    it += static_cast<std::ptrdiff_t>(sizes[p]);
  }
  return out;
}

}  // namespace dvscell
