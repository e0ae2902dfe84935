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

// Supervised mask selection over the fused candidate pool.
//
// Training labels mark, for every ground-truth instance, the single candidate
// of highest mask IoU. A scorer assigns each candidate a keep probability;
// candidates at or above the keep threshold survive, and overlapping
// survivors ("spots": connected components of the graph whose edges join
// masks with IoU above tau_spot) are reduced to one representative each.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "dvscell/detection.hpp"
#include "dvscell/error.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/losses.hpp"
#include "dvscell/mask.hpp"
#include "dvscell/rng.hpp"

namespace dvscell {

struct MsLabel {
  std::int64_t det_id = 0;
  int y_m = 0;
  std::optional<std::int64_t> matched_gt_id;
  double iou_with_gt = 0.0;

  bool operator==(const MsLabel&) const = default;
};

// Labels are returned in candidate order. A GT whose best IoU is zero labels
// nothing; a candidate that is best for several GTs is matched to the one it
// overlaps most.
inline std::vector<MsLabel> build_ms_labels(std::span<const Detection> candidates,
                                            std::span<const GtInstance> gts) {
  std::vector<MsLabel> labels(candidates.size());
  std::vector<double> matched_iou(candidates.size(), 0.0);
  std::vector<BBox> cand_boxes;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    labels[i].det_id = candidates[i].det_id;
    cand_boxes.push_back(bbox_of_mask(candidates[i].mask));
  }
  for (const GtInstance& g : gts) {
    const BBox gb = bbox_of_mask(g.mask);
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const Detection& c = candidates[i];
      if (c.image_id != g.image_id || !boxes_overlap(cand_boxes[i], gb)) continue;
      const double iou = mask_iou(c.mask, g.mask);
      labels[i].iou_with_gt = std::max(labels[i].iou_with_gt, iou);
      if (iou <= 0.0) continue;
      if (!best || iou > best_iou ||
          (iou == best_iou && c.det_id < candidates[*best].det_id)) {
        best = i;
        best_iou = iou;
      }
    }
    if (!best) continue;
    MsLabel& l = labels[*best];
    if (l.y_m == 0 || best_iou > matched_iou[*best] ||
        (best_iou == matched_iou[*best] && g.gt_id < *l.matched_gt_id)) {
      l.matched_gt_id = g.gt_id;
      matched_iou[*best] = best_iou;
    }
    l.y_m = 1;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].y_m) labels[i].iou_with_gt = matched_iou[i];
  }
  return labels;
}

inline constexpr std::size_t kFeatureCount = 6;
using FeatureVector = std::array<double, kFeatureCount>;

// Per candidate: detector score, mask area over frame area, box aspect
// (w / h), solidity (mask area over box area), 8-connected component count,
// and the largest mask IoU with any other candidate of the same image.
inline std::vector<FeatureVector> candidate_features(std::span<const Detection> cands) {
  std::vector<FeatureVector> out(cands.size());
  std::vector<BBox> boxes;
  for (const auto& c : cands) boxes.push_back(bbox_of_mask(c.mask));
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Detection& c = cands[i];
    const BBox& b = boxes[i];
    const double area = static_cast<double>(rle_area(c.mask));
    const double frame = static_cast<double>(c.mask.width) * c.mask.height;
    FeatureVector& f = out[i];
    f[0] = c.score;
    f[1] = frame > 0 ? area / frame : 0.0;
    f[2] = b.h > 0 ? b.w / b.h : 0.0;
    f[3] = b.area() > 0 ? area / b.area() : 0.0;
    f[4] = component_count(c.mask, Connectivity::kEight);
    double agree = 0.0;
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (j == i || cands[j].image_id != c.image_id || !boxes_overlap(b, boxes[j])) continue;
      agree = std::max(agree, mask_iou(c.mask, cands[j].mask));
    }
    f[5] = agree;
  }
  return out;
}

// Logistic model over standardized features.
struct LogisticModel {
  std::vector<double> weights;  // empty = untrained
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> scale;
  bool degenerate = false;

  bool trained() const {
    return weights.size() == kFeatureCount && mean.size() == kFeatureCount &&
           scale.size() == kFeatureCount;
  }

  static LogisticModel zeros() {
    LogisticModel m;
    m.weights.assign(kFeatureCount, 0.0);
    m.mean.assign(kFeatureCount, 0.0);
    m.scale.assign(kFeatureCount, 1.0);
    return m;
  }

  double predict(const FeatureVector& f) const {
    if (!trained()) throw Error(Errc::kScorerNotTrained, "logistic scorer has no weights");
    double z = bias;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      z += weights[k] * (f[k] - mean[k]) / scale[k];
    }
    return sigmoid(z);
  }
};

struct ExternalScores {
  std::map<std::int64_t, double> by_det_id;
};

// Test-only upper bound: the candidate's best mask IoU with ground truth.
struct IouOracle {
  std::vector<GtInstance> gts;
};

using Scorer = std::variant<ExternalScores, IouOracle, LogisticModel>;

enum class ScorerKind { kExternal, kIouOracle, kLogisticGeom };

inline ScorerKind scorer_kind(const Scorer& s) {
  return static_cast<ScorerKind>(s.index());
}

// One score in [0, 1] per candidate. The image is unused by the built-in
// scorers and kept for scorers that look at pixels.
inline std::vector<double> score_candidates(const Scorer& scorer, const Raster* image,
                                            std::span<const Detection> cands) {
  (void)image;
  return std::visit(
      [&](const auto& s) -> std::vector<double> {
        using S = std::decay_t<decltype(s)>;
        std::vector<double> out;
        out.reserve(cands.size());
        if constexpr (std::is_same_v<S, ExternalScores>) {
          for (const auto& c : cands) {
            const auto it = s.by_det_id.find(c.det_id);
            if (it == s.by_det_id.end()) {
              throw Error(Errc::kMissingScore, "no score for det " + std::to_string(c.det_id));
            }
            out.push_back(std::clamp(it->second, 0.0, 1.0));
          }
        } else if constexpr (std::is_same_v<S, IouOracle>) {
          for (const auto& c : cands) {
            const BBox cb = bbox_of_mask(c.mask);
            double best = 0.0;
            for (const auto& g : s.gts) {
              if (g.image_id != c.image_id || !boxes_overlap(cb, bbox_of_mask(g.mask))) continue;
              best = std::max(best, mask_iou(c.mask, g.mask));
            }
            out.push_back(best);
          }
        } else {
          if (!s.trained()) throw Error(Errc::kScorerNotTrained, "logistic scorer has no weights");
          for (const auto& f : candidate_features(cands)) out.push_back(s.predict(f));
        }
        return out;
      },
      scorer);
}

struct SgdHyper {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct ObjectiveValue {
  double loss = 0.0;
  std::vector<double> grad;  // weights..., bias
};

// Mean BCE of sigmoid(w.z + b) against y plus 0.5 * weight_decay * |w|^2.
// params holds kFeatureCount weights followed by the bias.
inline ObjectiveValue logistic_objective(std::span<const double> params,
                                         std::span<const FeatureVector> z,
                                         std::span<const std::uint8_t> y,
                                         std::span<const std::size_t> rows,
                                         double weight_decay) {
  ObjectiveValue out;
  out.grad.assign(kFeatureCount + 1, 0.0);
  for (std::size_t r : rows) {
    double logit = params[kFeatureCount];
    for (std::size_t k = 0; k < kFeatureCount; ++k) logit += params[k] * z[r][k];
    const double target = y[r] ? 1.0 : 0.0;
    out.loss += std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
    const double resid = sigmoid(logit) - target;
    for (std::size_t k = 0; k < kFeatureCount; ++k) out.grad[k] += resid * z[r][k];
    out.grad[kFeatureCount] += resid;
  }
  const double inv = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  out.loss *= inv;
  for (auto& g : out.grad) g *= inv;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    out.loss += 0.5 * weight_decay * params[k] * params[k];
    out.grad[k] += weight_decay * params[k];
  }
  return out;
}

struct TrainResult {
  LogisticModel model;
  std::vector<double> loss_trace;  // objective before training, then per epoch
  bool degenerate = false;
};

inline TrainResult train_logistic_scorer(std::span<const FeatureVector> features,
                                         std::span<const MsLabel> labels,
                                         const SgdHyper& hyper) {
  if (features.empty() || features.size() != labels.size()) {
    throw Error(Errc::kSizeMismatch, "need one label per feature vector");
  }
  if (hyper.epochs < 0 || hyper.batch_size < 1 || !(hyper.lr > 0)) {
    throw Error(Errc::kInvalidConfig, "bad SGD hyperparameters");
  }
  const std::size_t n = features.size();
  std::vector<std::uint8_t> y(n);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i].y_m ? 1 : 0;
    positives += y[i];
  }

  TrainResult result;
  result.model = LogisticModel::zeros();
  if (positives == 0 || positives == n) {
    const double rate = std::clamp(static_cast<double>(positives) / n, 1e-3, 1.0 - 1e-3);
    result.model.bias = std::log(rate / (1.0 - rate));
    result.model.degenerate = true;
    result.degenerate = true;
    return result;
  }

  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    double mean = 0.0;
    for (const auto& f : features) mean += f[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& f : features) var += (f[k] - mean) * (f[k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    result.model.mean[k] = mean;
    result.model.scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<FeatureVector> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      z[i][k] = (features[i][k] - result.model.mean[k]) / result.model.scale[k];
    }
  }

  std::vector<double> params(kFeatureCount + 1, 0.0);
  std::vector<double> velocity(kFeatureCount + 1, 0.0);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto full_loss = [&] {
    return logistic_objective(params, z, y, all, hyper.weight_decay).loss;
  };
  result.loss_trace.push_back(full_loss());

  Rng rng(hyper.seed);
  std::vector<std::size_t> order = all;
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const auto obj = logistic_objective(params, z, y, rows, hyper.weight_decay);
      for (std::size_t k = 0; k <= kFeatureCount; ++k) {
        velocity[k] = hyper.momentum * velocity[k] + obj.grad[k];
        params[k] -= hyper.lr * velocity[k];
      }
    }
    result.loss_trace.push_back(full_loss());
  }
  for (std::size_t k = 0; k < kFeatureCount; ++k) result.model.weights[k] = params[k];
  result.model.bias = params[kFeatureCount];
  return result;
}

// Inclusive threshold; order preserved.
inline std::vector<Detection> select(std::span<const Detection> cands,
                                     std::span<const double> scores, double keep_thresh = 0.5) {
  if (cands.size() != scores.size()) {
    throw Error(Errc::kSizeMismatch, "one score per candidate expected");
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (scores[i] >= keep_thresh) out.push_back(cands[i]);
  }
  return out;
}

enum class SpotRule { kTotalIou, kMaxScore };

struct SpotCluster {
  std::vector<std::int64_t> members;  // det_ids, ascending
  std::int64_t representative = 0;
};

struct SpotItem {
  std::int64_t det_id = 0;
  double score = 0.0;  // tie-break for kTotalIou, ranking key for kMaxScore
};

// Spot grouping over a precomputed symmetric IoU matrix. Returns one cluster
// per connected component (singletons included), ordered by smallest member.
inline std::vector<SpotCluster> spots_from_ious(std::span<const SpotItem> items,
                                                const std::vector<std::vector<double>>& iou,
                                                double tau_spot, SpotRule rule) {
  const std::size_t n = items.size();
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(),
            [&](std::size_t a, std::size_t b) { return items[a].det_id < items[b].det_id; });

  std::vector<std::int32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (iou[i][j] > tau_spot) {
        detail::unite(parent, static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
      }
    }
  }
  std::map<std::int32_t, std::vector<std::size_t>> groups;  // root -> members by det_id
  std::vector<std::int32_t> root_order;
  for (std::size_t i : by_id) {
    const auto root = detail::find_root(parent, static_cast<std::int32_t>(i));
    auto [it, inserted] = groups.try_emplace(root);
    if (inserted) root_order.push_back(root);
    it->second.push_back(i);
  }

  std::vector<SpotCluster> out;
  for (std::int32_t root : root_order) {
    const auto& members = groups[root];
    SpotCluster cluster;
    for (std::size_t m : members) cluster.members.push_back(items[m].det_id);
    std::size_t best = members.front();
    double best_key = -INFINITY;
    for (std::size_t m : members) {
      double key = items[m].score;
      if (rule == SpotRule::kTotalIou) {
        key = 0.0;
        for (std::size_t o : members) {
          if (o != m) key += iou[m][o];
        }
      }
      // Members are visited by ascending det_id, so strict improvement keeps
      // the lower id on a full tie.
      const bool better =
          key > best_key ||
          (rule == SpotRule::kTotalIou && key == best_key && items[m].score > items[best].score);
      if (better) {
        best = m;
        best_key = key;
      }
    }
    cluster.representative = items[best].det_id;
    out.push_back(std::move(cluster));
  }
  return out;
}

inline std::vector<SpotCluster> find_spots(std::span<const Detection> dets, double tau_spot,
                                           SpotRule rule = SpotRule::kTotalIou,
                                           std::span<const double> scores = {}) {
  if (!scores.empty() && scores.size() != dets.size()) {
    throw Error(Errc::kSizeMismatch, "one score per detection expected");
  }
  std::vector<SpotCluster> out;
  std::map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < dets.size(); ++i) by_image[dets[i].image_id].push_back(i);
  for (const auto& [image, idx] : by_image) {
    std::vector<SpotItem> items;
    std::vector<BBox> boxes;
    for (std::size_t i : idx) {
      items.push_back({dets[i].det_id, scores.empty() ? dets[i].score : scores[i]});
      boxes.push_back(bbox_of_mask(dets[i].mask));
    }
    std::vector<std::vector<double>> iou(idx.size(), std::vector<double>(idx.size(), 0.0));
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        if (!boxes_overlap(boxes[a], boxes[b])) continue;
        iou[a][b] = iou[b][a] = mask_iou(dets[idx[a]].mask, dets[idx[b]].mask);
      }
    }
    for (auto& c : spots_from_ious(items, iou, tau_spot, rule)) out.push_back(std::move(c));
  }
  return out;
}

// Keeps one representative per spot, in input order.
inline std::vector<Detection> spot_dedup(std::span<const Detection> kept, double tau_spot = 0.7,
                                         SpotRule rule = SpotRule::kTotalIou,
                                         std::span<const double> scores = {}) {
  std::map<std::int64_t, std::vector<std::int64_t>> reps_by_image;
  {
    std::map<std::int64_t, std::vector<std::size_t>> by_image;
    for (std::size_t i = 0; i < kept.size(); ++i) by_image[kept[i].image_id].push_back(i);
    for (const auto& [image, idx] : by_image) {
      std::vector<Detection> group;
      std::vector<double> group_scores;
      for (std::size_t i : idx) {
        group.push_back(kept[i]);
        if (!scores.empty()) group_scores.push_back(scores[i]);
      }
      for (const auto& c : find_spots(group, tau_spot, rule, group_scores)) {
        reps_by_image[image].push_back(c.representative);
      }
    }
  }
  std::vector<Detection> out;
  for (const auto& d : kept) {
    const auto& reps = reps_by_image[d.image_id];
    if (std::find(reps.begin(), reps.end(), d.det_id) != reps.end()) out.push_back(d);
  }
  return out;
}

}  // namespace dvscell
