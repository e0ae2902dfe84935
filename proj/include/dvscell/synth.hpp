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

// Synthetic cell scenes and a noisy oracle detector standing in for a trained
// network, plus the four-way pipeline comparison run on top of them.
//
// Cells are wobbly ellipses given as polygons; GT masks are their rasters.
// The oracle draws every decision from a generator keyed on (seed, view,
// cell), so views are independent and changing one probability never
// reshuffles the noise of other cells.
//
// Detector model. A cell's obliqueness in a view is |sin 2phi| scaled by
// (1 - 1/elongation), phi being its major-axis angle in that view. Oblique
// elongated cells receive lower confidence and rougher boundaries, the
// regime in which a rotated second view pays off.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dvscell/detection.hpp"
#include "dvscell/dvs.hpp"
#include "dvscell/error.hpp"
#include "dvscell/eval.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/mask.hpp"
#include "dvscell/parallel.hpp"
#include "dvscell/polygon.hpp"
#include "dvscell/rng.hpp"
#include "dvscell/select.hpp"

namespace dvscell {

struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 1152;
  int height = 863;
  int n_cells = 30;
  double elongation_min = 1.0;
  double elongation_max = 4.0;
  double minor_min = 6.0;   // semi-minor axis, px
  double minor_max = 14.0;
  double overlap_max = 0.2;
  double unhealthy_fraction = 0.3;
  double wobble = 0.06;     // relative amplitude of boundary harmonics
  int margin = 16;
  int max_attempts = 2000;  // placement retries per cell

  void validate() const {
    if (width < 1 || height < 1) throw Error(Errc::kInvalidConfig, "scene size must be positive");
    if (n_cells < 0) throw Error(Errc::kInvalidConfig, "n_cells must be >= 0");
    if (!(elongation_min >= 1.0 && elongation_max >= elongation_min)) {
      throw Error(Errc::kInvalidConfig, "elongation range must satisfy 1 <= min <= max");
    }
    if (!(minor_min > 0.0 && minor_max >= minor_min)) {
      throw Error(Errc::kInvalidConfig, "semi-minor axis range invalid");
    }
    if (!(overlap_max >= 0.0 && overlap_max <= 1.0) ||
        !(unhealthy_fraction >= 0.0 && unhealthy_fraction <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "overlap_max and unhealthy_fraction must lie in [0, 1]");
    }
    if (!(wobble >= 0.0 && wobble < 0.5) || margin < 0 || max_attempts < 1) {
      throw Error(Errc::kInvalidConfig, "wobble, margin or max_attempts out of range");
    }
  }
};

struct Cell {
  Point center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle_deg = 0.0;  // major axis, [0, 180)
  int class_id = 1;
  std::vector<double> radius_scale;  // wobble factor per vertex
};

struct Scene {
  Dims dims;
  std::uint64_t seed = 0;
  std::vector<Cell> cells;
  std::vector<GtInstance> gts;  // gts[i] belongs to cells[i]
};

inline constexpr int kCellVertices = 96;

namespace detail {

inline double vertex_angle(int k) { return 2.0 * std::numbers::pi * k / kCellVertices; }

// Vertex k of the cell outline with an extra radial offset in px.
inline Point cell_vertex(const Cell& c, int k, double offset = 0.0) {
  const double t = vertex_angle(k);
  const double s = c.radius_scale.empty() ? 1.0 : c.radius_scale[k];
  double x = c.semi_major * std::cos(t) * s;
  double y = c.semi_minor * std::sin(t) * s;
  const double r = std::hypot(x, y);
  if (offset != 0.0 && r > 0.0) {
    const double f = std::max(0.35, (r + offset) / r);
    x *= f;
    y *= f;
  }
  const double a = c.angle_deg * std::numbers::pi / 180.0;
  return {c.center.x + x * std::cos(a) - y * std::sin(a),
          c.center.y + x * std::sin(a) + y * std::cos(a)};
}

// Random smooth function of the outline angle with unit RMS.
struct Harmonics {
  std::array<double, 9> coef{};

  explicit Harmonics(Rng& rng) {
    for (double& v : coef) v = rng.normal();
  }
  double operator()(double t) const {
    double v = coef[0];
    for (int h = 1; h <= 4; ++h) {
      v += coef[2 * h - 1] * std::cos(h * t) + coef[2 * h] * std::sin(h * t);
    }
    return v / std::sqrt(5.0);
  }
};

inline MaskCrop union_crops(const MaskCrop& a, const MaskCrop& b) {
  if (a.empty_region()) return b;
  if (b.empty_region()) return a;
  MaskCrop out;
  out.frame_width = a.frame_width;
  out.frame_height = a.frame_height;
  out.x0 = std::min(a.x0, b.x0);
  out.y0 = std::min(a.y0, b.y0);
  out.width = std::max(a.x0 + a.width, b.x0 + b.width) - out.x0;
  out.height = std::max(a.y0 + a.height, b.y0 + b.height) - out.y0;
  out.bits.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  for (const MaskCrop* m : {&a, &b}) {
    for (int r = 0; r < m->height; ++r) {
      for (int c = 0; c < m->width; ++c) {
        if (m->local(r, c)) out.set_local(r + m->y0 - out.y0, c + m->x0 - out.x0);
      }
    }
  }
  return out;
}

}  // namespace detail

inline Polygon cell_polygon(const Cell& c) {
  Polygon p;
  for (int k = 0; k < kCellVertices; ++k) p.push_back(detail::cell_vertex(c, k));
  return p;
}

// Cell layout and ground truth without pixels.
inline Scene gen_scene_layout(const SceneSpec& spec, std::int64_t image_id = 0,
                              std::int64_t first_gt_id = 0) {
  spec.validate();
  Scene scene;
  scene.dims = {spec.width, spec.height};
  scene.seed = spec.seed;
  Rng rng(spec.seed);
  std::vector<BBox> boxes;
  for (int i = 0; i < spec.n_cells; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      Cell c;
      c.semi_minor = rng.uniform(spec.minor_min, spec.minor_max);
      c.semi_major = c.semi_minor * rng.uniform(spec.elongation_min, spec.elongation_max);
      c.angle_deg = rng.uniform(0.0, 180.0);
      c.class_id = rng.bernoulli(spec.unhealthy_fraction) ? 2 : 1;
      const detail::Harmonics wob(rng);
      for (int k = 0; k < kCellVertices; ++k) {
        c.radius_scale.push_back(1.0 + spec.wobble * wob(detail::vertex_angle(k)));
      }
      // Extent of the outline around its center, then a center inside margins.
      c.center = {0.0, 0.0};
      double ext_x = 0.0, ext_y = 0.0;
      for (int k = 0; k < kCellVertices; ++k) {
        const Point p = detail::cell_vertex(c, k);
        ext_x = std::max(ext_x, std::abs(p.x));
        ext_y = std::max(ext_y, std::abs(p.y));
      }
      const double lo_x = spec.margin + ext_x, hi_x = spec.width - spec.margin - ext_x;
      const double lo_y = spec.margin + ext_y, hi_y = spec.height - spec.margin - ext_y;
      if (!(hi_x > lo_x && hi_y > lo_y)) continue;
      c.center = {rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)};

      const MaskCrop crop = rasterize_polygon(cell_polygon(c), scene.dims);
      if (crop.empty_region()) continue;
      GtInstance g;
      g.mask = to_rle(crop);
      g.box = bbox_of_mask(g.mask);
      bool ok = component_count(crop, Connectivity::kEight) == 1;
      for (std::size_t j = 0; ok && j < scene.gts.size(); ++j) {
        if (boxes_overlap(g.box, boxes[j]) && mask_iou(g.mask, scene.gts[j].mask) > spec.overlap_max) {
          ok = false;
        }
      }
      if (!ok) continue;
      g.image_id = image_id;
      g.gt_id = first_gt_id + i;
      g.class_id = c.class_id;
      boxes.push_back(g.box);
      scene.gts.push_back(std::move(g));
      scene.cells.push_back(std::move(c));
      placed = true;
    }
    if (!placed) {
      throw Error(Errc::kPlacementFailure,
                  "cell " + std::to_string(i) + " could not be placed after " +
                      std::to_string(spec.max_attempts) + " attempts");
    }
  }
  return scene;
}

// Shaded cells on a textured background, 3 channels.
inline Raster render_scene(const Scene& scene) {
  const int w = scene.dims.width, h = scene.dims.height;
  Raster img(w, h, 3);
  Rng rng(splitmix64(scene.seed) ^ 0x7465787475726500ull);
  const double gx = rng.uniform(-0.02, 0.02), gy = rng.uniform(-0.02, 0.02);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = 128.0 + gx * (c - w / 2.0) + gy * (r - h / 2.0) + 6.0 * rng.normal();
      const auto s = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      img.at(r, c, 0) = s;
      img.at(r, c, 1) = s;
      img.at(r, c, 2) = s;
    }
  }
  // Relief shading: brighter on one flank, darker on the other.
  for (std::size_t i = 0; i < scene.cells.size(); ++i) {
    const Cell& cell = scene.cells[i];
    const MaskCrop crop = crop_of(scene.gts[i].mask);
    const double tint = cell.class_id == 2 ? 14.0 : 0.0;
    for (int r = 0; r < crop.height; ++r) {
      for (int c = 0; c < crop.width; ++c) {
        if (!crop.local(r, c)) continue;
        const int y = crop.y0 + r, x = crop.x0 + c;
        const double dx = (x + 0.5 - cell.center.x) / cell.semi_major;
        const double dy = (y + 0.5 - cell.center.y) / cell.semi_major;
        const double shade = 128.0 + 70.0 * (dx - dy) / std::numbers::sqrt2;
        for (int ch = 0; ch < 3; ++ch) {
          const double v = shade + (ch == 0 ? tint : -tint / 2) + 4.0 * rng.normal();
          img.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
  }
  return img;
}

struct SceneResult {
  Raster image;
  std::vector<GtInstance> gts;
};

inline SceneResult gen_scene(const SceneSpec& spec, std::int64_t image_id = 0) {
  Scene s = gen_scene_layout(spec, image_id);
  return {render_scene(s), std::move(s.gts)};
}

struct OracleSpec {
  std::uint64_t seed = 0;
  std::array<double, 2> drop_prob{0.0, 0.0};  // original, rotated
  double duplicate_prob = 0.0;
  double boundary_jitter = 0.0;  // nominal radial noise, px
  double fragment_prob = 0.0;
  std::array<double, 2> tp_band{0.7, 1.0};
  std::array<double, 2> spurious_band{0.3, 0.6};
  double oblique_penalty = 0.7;  // share of the TP band lost at full obliqueness
  double fragment_gap = 4.0;

  static OracleSpec zero_noise(std::uint64_t seed = 0) {
    OracleSpec s;
    s.seed = seed;
    s.tp_band = {1.0, 1.0};
    return s;
  }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    auto band = [&](const std::array<double, 2>& b) {
      return prob(b[0]) && prob(b[1]) && b[0] <= b[1];
    };
    if (!prob(drop_prob[0]) || !prob(drop_prob[1]) || !prob(duplicate_prob) ||
        !prob(fragment_prob) || !prob(oblique_penalty)) {
      throw Error(Errc::kInvalidConfig, "oracle probabilities must lie in [0, 1]");
    }
    if (!band(tp_band) || !band(spurious_band)) {
      throw Error(Errc::kInvalidConfig, "score bands must be ordered ranges in [0, 1]");
    }
    if (!(boundary_jitter >= 0.0) || !(fragment_gap >= 2.0)) {
      throw Error(Errc::kInvalidConfig, "boundary_jitter must be >= 0 and fragment_gap >= 2");
    }
  }
};

// Obliqueness in [0, 1) of a cell seen through a rotation by theta degrees.
inline double cell_obliqueness(const Cell& c, double theta) {
  const double phi = (c.angle_deg + theta) * std::numbers::pi / 180.0;
  return std::abs(std::sin(2.0 * phi)) * (1.0 - c.semi_minor / c.semi_major);
}

namespace detail {

inline Polygon jittered_outline(const Cell& c, double sigma, Rng& rng) {
  Polygon p;
  if (sigma <= 0.0) return cell_polygon(c);
  const Harmonics noise(rng);
  for (int k = 0; k < kCellVertices; ++k) {
    p.push_back(cell_vertex(c, k, sigma * noise(vertex_angle(k))));
  }
  return p;
}

// A small blob past one tip of the major axis, at least `gap` px beyond the
// outline. Returns nothing if neither side fits inside the original frame.
inline std::optional<Polygon> fragment_blob(const Cell& c, const Polygon& outline, double gap,
                                            Dims frame, Rng& rng) {
  const double a = c.angle_deg * std::numbers::pi / 180.0;
  const Point dir{std::cos(a), std::sin(a)};
  const double rb = std::max(2.0, 0.35 * c.semi_minor);
  const double first = rng.bernoulli(0.5) ? 1.0 : -1.0;
  for (double sign : {first, -first}) {
    double reach = 0.0;
    for (const Point& p : outline) {
      reach = std::max(reach, sign * ((p.x - c.center.x) * dir.x + (p.y - c.center.y) * dir.y));
    }
    const double d = reach + gap + rb;
    const Point bc{c.center.x + sign * d * dir.x, c.center.y + sign * d * dir.y};
    if (bc.x - rb < 1.0 || bc.y - rb < 1.0 || bc.x + rb > frame.width - 1.0 ||
        bc.y + rb > frame.height - 1.0) {
      continue;
    }
    Polygon blob;
    for (int k = 0; k < 24; ++k) {
      const double t = 2.0 * std::numbers::pi * k / 24;
      blob.push_back({bc.x + rb * std::cos(t), bc.y + rb * std::sin(t)});
    }
    return blob;
  }
  return std::nullopt;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ull));
}

}  // namespace detail

// Detections of one view. `t` maps the original frame into the view, `theta`
// is the view's rotation used by the obliqueness model. Ids run from
// first_det_id upward in cell order, duplicates directly after their source.
inline std::vector<Detection> oracle_detect(const Scene& scene, View view,
                                            const AffineTransform& t, Dims out, double theta,
                                            const OracleSpec& spec, std::int64_t image_id,
                                            std::int64_t first_det_id) {
  spec.validate();
  const int vi = view == View::kOriginal ? 0 : 1;
  const std::uint64_t view_seed = detail::mix_seed(spec.seed, static_cast<std::uint64_t>(vi));
  std::vector<Detection> dets;
  std::int64_t next_id = first_det_id;
  auto emit = [&](const Polygon& outline, const std::optional<Polygon>& blob, int class_id,
                  double score) {
    MaskCrop crop = rasterize_polygon(transform_polygon(outline, t), out);
    if (blob) crop = detail::union_crops(crop, rasterize_polygon(transform_polygon(*blob, t), out));
    if (crop.empty_region()) return;
    Detection d;
    d.image_id = image_id;
    d.det_id = next_id++;
    d.class_id = class_id;
    d.score = score;
    d.mask = to_rle(crop);
    d.box = bbox_of_mask(d.mask);
    d.view = view;
    dets.push_back(std::move(d));
  };
  for (std::size_t i = 0; i < scene.cells.size(); ++i) {
    const Cell& c = scene.cells[i];
    Rng rng(detail::mix_seed(view_seed, i));
    // Fixed draw order per cell, whatever the outcome.
    const bool drop = rng.bernoulli(spec.drop_prob[vi]);
    const bool fragment = rng.bernoulli(spec.fragment_prob);
    const bool duplicate = rng.bernoulli(spec.duplicate_prob);
    const double u_score = rng.uniform();
    const double u_dup = rng.uniform();
    Rng shape_rng(rng.next());
    Rng dup_rng(rng.next());
    Rng blob_rng(rng.next());
    if (drop) continue;

    const double obl = cell_obliqueness(c, theta);
    const double sigma = spec.boundary_jitter * (0.5 + obl);
    const Polygon outline = detail::jittered_outline(c, sigma, shape_rng);
    std::optional<Polygon> blob;
    if (fragment) blob = detail::fragment_blob(c, outline, spec.fragment_gap, scene.dims, blob_rng);
    const double drop_share =
        std::clamp(spec.oblique_penalty * obl + (1.0 - spec.oblique_penalty) * u_score, 0.0, 1.0);
    const double score = spec.tp_band[1] - (spec.tp_band[1] - spec.tp_band[0]) * drop_share;
    emit(outline, blob, c.class_id, score);
    if (duplicate) {
      const double s = spec.spurious_band[0] + (spec.spurious_band[1] - spec.spurious_band[0]) * u_dup;
      emit(detail::jittered_outline(c, sigma, dup_rng), std::nullopt, c.class_id, s);
    }
  }
  return dets;
}

// ---------------------------------------------------------------------------
// End-to-end runs.

enum class PipelineMode { kBaseline, kDvsOnly, kMsOnly, kFull };

inline std::string_view mode_name(PipelineMode m) {
  switch (m) {
    case PipelineMode::kBaseline: return "baseline";
    case PipelineMode::kDvsOnly: return "dvs_only";
    case PipelineMode::kMsOnly: return "ms_only";
    case PipelineMode::kFull: return "full";
  }
  return "?";
}

inline PipelineMode parse_mode(std::string_view s) {
  if (s == "baseline") return PipelineMode::kBaseline;
  if (s == "dvs_only") return PipelineMode::kDvsOnly;
  if (s == "ms_only") return PipelineMode::kMsOnly;
  if (s == "full") return PipelineMode::kFull;
  throw Error(Errc::kInvalidConfig, "unknown mode '" + std::string(s) + "'");
}

struct MsConfig {
  double keep_thresh = 0.5;
  // End-to-end runs pick keep_thresh on the training scenes instead: the
  // value on keep_grid with the best training AP^segm, lowest on ties.
  bool calibrate_keep = true;
  std::vector<double> keep_grid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  double tau_spot = 0.7;
  SpotRule spot_rule = SpotRule::kTotalIou;
  SgdHyper hyper;
  int train_images = 20;
  double baseline_nms_iou = 0.5;  // NMS of the single-view modes

  void validate() const {
    if (!(keep_thresh >= 0.0 && keep_thresh <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "keep_thresh must lie in [0, 1]");
    }
    if (!(tau_spot >= 0.0 && tau_spot < 1.0)) {
      throw Error(Errc::kInvalidConfig, "tau_spot must lie in [0, 1)");
    }
    for (double k : keep_grid) {
      if (!(k >= 0.0 && k <= 1.0)) throw Error(Errc::kInvalidConfig, "keep_grid values must lie in [0, 1]");
    }
    if (calibrate_keep && keep_grid.empty()) throw Error(Errc::kInvalidConfig, "empty keep_grid");
    if (train_images < 1) throw Error(Errc::kInvalidConfig, "train_images must be >= 1");
    if (!(baseline_nms_iou > 0.0 && baseline_nms_iou <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "baseline_nms_iou must lie in (0, 1]");
    }
  }
};

// Selection followed by spot deduplication. Total-IoU ties fall back on the
// detector score; the max-score rule ranks by scorer output.
inline std::vector<Detection> mask_select(std::span<const Detection> cands,
                                          std::span<const double> scores, const MsConfig& cfg) {
  std::vector<Detection> kept;
  std::vector<double> kept_scores;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (scores[i] >= cfg.keep_thresh) {
      kept.push_back(cands[i]);
      kept_scores.push_back(scores[i]);
    }
  }
  if (cfg.spot_rule == SpotRule::kMaxScore) {
    return spot_dedup(kept, cfg.tau_spot, cfg.spot_rule, kept_scores);
  }
  return spot_dedup(kept, cfg.tau_spot, cfg.spot_rule);
}

struct SuiteSpec {
  std::string name;
  std::vector<std::uint64_t> seeds;
  int images_per_seed = 20;
  SceneSpec scene;    // seed is replaced per image
  OracleSpec oracle;  // seed is replaced per image
  std::uint64_t train_seed = 0x747261696E000000ull;

  std::size_t image_count() const { return seeds.size() * static_cast<std::size_t>(images_per_seed); }

  // Per-image seed: hashed suite seed xor image index.
  std::uint64_t image_seed(std::size_t i) const {
    const std::uint64_t s = seeds[i / images_per_seed];
    return splitmix64(s) ^ static_cast<std::uint64_t>(i % images_per_seed);
  }
};

inline SuiteSpec fixed_suite() {
  SuiteSpec s;
  s.name = "fixed";
  s.seeds = {0, 1, 2, 3, 4};
  s.images_per_seed = 20;
  s.scene.n_cells = 30;
  s.oracle.drop_prob = {0.3, 0.3};
  s.oracle.boundary_jitter = 2.0;
  s.oracle.duplicate_prob = 0.3;
  s.oracle.fragment_prob = 0.1;
  return s;
}

inline SuiteSpec zero_noise_suite() {
  SuiteSpec s;
  s.name = "zero-noise";
  s.seeds = {0};
  s.images_per_seed = 20;
  s.scene.n_cells = 60;
  s.oracle = OracleSpec::zero_noise();
  return s;
}

inline SuiteSpec suite_by_name(std::string_view name) {
  if (name == "fixed") return fixed_suite();
  if (name == "zero-noise") return zero_noise_suite();
  throw Error(Errc::kInvalidConfig, "unknown suite '" + std::string(name) + "'");
}

struct ImageRun {
  Scene scene;
  std::vector<Detection> original;
  std::vector<Detection> rotated;
  AffineTransform transform;
};

inline ImageRun simulate_image(const SceneSpec& scene_spec, const OracleSpec& oracle_spec,
                               const DvsConfig& dvs, std::uint64_t seed, std::int64_t image_id) {
  SceneSpec ss = scene_spec;
  ss.seed = seed;
  OracleSpec os = oracle_spec;
  os.seed = detail::mix_seed(seed, 0x6F7261636C65ull);
  ImageRun run;
  run.scene = gen_scene_layout(ss, image_id, image_id * 1000);
  const RotatedFrame frame = rotation_transform(ss.width, ss.height, dvs.theta);
  run.transform = frame.transform;
  run.original = oracle_detect(run.scene, View::kOriginal, AffineTransform::identity(),
                               run.scene.dims, 0.0, os, image_id, image_id * 100000);
  run.rotated = oracle_detect(run.scene, View::kRotated, frame.transform, frame.out, dvs.theta, os,
                              image_id, image_id * 100000 + 50000);
  return run;
}

// Candidates entering mask selection (or the final output for the modes
// without it).
inline std::vector<Detection> pipeline_candidates(const ImageRun& run, PipelineMode mode,
                                                  const DvsConfig& dvs, const MsConfig& ms) {
  if (mode == PipelineMode::kBaseline || mode == PipelineMode::kMsOnly) {
    return nms(run.original, ms.baseline_nms_iou, dvs.nms_metric, dvs.class_aware_nms);
  }
  return dvs_fuse(run.original, run.rotated, run.transform, run.scene.dims, dvs);
}

inline bool uses_selection(PipelineMode m) {
  return m == PipelineMode::kMsOnly || m == PipelineMode::kFull;
}

struct EndToEndResult {
  EvalSummary summary;
  std::vector<Detection> detections;
  std::vector<GtInstance> gts;
  std::optional<LogisticModel> scorer;
  std::optional<double> keep_thresh;  // threshold actually applied
  std::size_t train_candidates = 0;
};

struct SuiteScorer {
  TrainResult train;
  double keep_thresh = 0.5;
  std::size_t candidates = 0;
};

// Trains the logistic scorer on candidates from freshly generated training
// scenes whose seeds never overlap the evaluated ones.
inline SuiteScorer train_suite_scorer(const SuiteSpec& suite, PipelineMode mode,
                                      const DvsConfig& dvs, const MsConfig& ms,
                                      const EvalConfig& eval, int jobs = 1) {
  const auto n = static_cast<std::size_t>(ms.train_images);
  std::vector<std::vector<Detection>> cands(n);
  std::vector<std::vector<GtInstance>> gts(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const ImageRun run = simulate_image(suite.scene, suite.oracle, dvs,
                                        splitmix64(suite.train_seed) ^ i,
                                        static_cast<std::int64_t>(i));
    cands[i] = pipeline_candidates(run, mode, dvs, ms);
    gts[i] = run.scene.gts;
  });
  std::vector<FeatureVector> features;
  std::vector<MsLabel> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& f : candidate_features(cands[i])) features.push_back(f);
    for (const auto& l : build_ms_labels(cands[i], gts[i])) labels.push_back(l);
  }
  if (features.empty()) {
    throw Error(Errc::kInvalidConfig, "training scenes produced no candidates");
  }
  SuiteScorer out;
  out.candidates = features.size();
  out.train = train_logistic_scorer(features, labels, ms.hyper);
  out.keep_thresh = ms.keep_thresh;
  if (!ms.calibrate_keep) return out;

  std::vector<std::vector<double>> scores(n);
  std::vector<GtInstance> all_gts;
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = score_candidates(out.train.model, nullptr, cands[i]);
    all_gts.insert(all_gts.end(), gts[i].begin(), gts[i].end());
    ids.push_back(static_cast<std::int64_t>(i));
  }
  EvalConfig segm = eval;
  segm.iou_type = IouType::kSegm;
  double best_ap = -1.0;
  for (double k : ms.keep_grid) {
    MsConfig trial = ms;
    trial.keep_thresh = k;
    std::vector<Detection> kept;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& d : mask_select(cands[i], scores[i], trial)) kept.push_back(std::move(d));
    }
    const double ap = evaluate(kept, all_gts, ids, segm).ap;
    if (ap > best_ap || (ap == best_ap && k < out.keep_thresh)) {
      best_ap = ap;
      out.keep_thresh = k;
    }
  }
  return out;
}

inline EndToEndResult run_end_to_end(const SuiteSpec& suite, const DvsConfig& dvs,
                                     const MsConfig& ms, const EvalConfig& eval,
                                     PipelineMode mode, int jobs = 1) {
  dvs.validate();
  ms.validate();
  eval.validate();
  suite.scene.validate();
  suite.oracle.validate();
  if (suite.seeds.empty() || suite.images_per_seed < 1) {
    throw Error(Errc::kInvalidConfig, "suite has no images");
  }
  EndToEndResult result;
  MsConfig applied = ms;
  if (uses_selection(mode)) {
    SuiteScorer sc = train_suite_scorer(suite, mode, dvs, ms, eval, jobs);
    result.scorer = std::move(sc.train.model);
    result.train_candidates = sc.candidates;
    applied.keep_thresh = sc.keep_thresh;
    result.keep_thresh = sc.keep_thresh;
  }
  const std::size_t n = suite.image_count();
  std::vector<std::vector<Detection>> finals(n);
  std::vector<std::vector<GtInstance>> gts(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto image_id = static_cast<std::int64_t>(i);
    const ImageRun run = simulate_image(suite.scene, suite.oracle, dvs, suite.image_seed(i), image_id);
    std::vector<Detection> cands = pipeline_candidates(run, mode, dvs, ms);
    if (uses_selection(mode)) {
      const std::vector<double> scores = score_candidates(*result.scorer, nullptr, cands);
      cands = mask_select(cands, scores, applied);
    }
    finals[i] = std::move(cands);
    gts[i] = run.scene.gts;
  });
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(static_cast<std::int64_t>(i));
    for (auto& d : finals[i]) result.detections.push_back(std::move(d));
    for (auto& g : gts[i]) result.gts.push_back(std::move(g));
  }
  result.summary = evaluate_both(result.detections, result.gts, ids, eval);
  return result;
}

}  // namespace dvscell
