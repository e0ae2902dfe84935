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

#include <gtest/gtest.h>

#include <set>

#include "dvscell/synth.hpp"
#include "test_util.hpp"

namespace dvscell {
namespace {

SceneSpec small_spec(std::uint64_t seed, int n_cells) {
  SceneSpec s;
  s.seed = seed;
  s.width = 320;
  s.height = 240;
  s.n_cells = n_cells;
  return s;
}

TEST(Scene, Empty) {
  const SceneResult r = gen_scene(small_spec(1, 0));
  EXPECT_TRUE(r.gts.empty());
  EXPECT_EQ(r.image.width(), 320);
  EXPECT_EQ(r.image.channels(), 3);
}

TEST(Scene, DefaultsMatchImageSize) {
  const SceneSpec s;
  EXPECT_EQ(s.width, 1152);
  EXPECT_EQ(s.height, 863);
}

TEST(Scene, Deterministic) {
  const SceneResult a = gen_scene(small_spec(7, 12));
  const SceneResult b = gen_scene(small_spec(7, 12));
  EXPECT_EQ(a.image.samples(), b.image.samples());
  ASSERT_EQ(a.gts.size(), b.gts.size());
  for (std::size_t i = 0; i < a.gts.size(); ++i) EXPECT_EQ(a.gts[i].mask, b.gts[i].mask);
  const SceneResult c = gen_scene(small_spec(8, 12));
  EXPECT_NE(a.image.samples(), c.image.samples());
}

TEST(Scene, OverlapAndConnectivity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.n_cells = 20;
    spec.overlap_max = 0.2;
    const Scene s = gen_scene_layout(spec, 3, 300);
    ASSERT_EQ(s.gts.size(), 20u);
    std::vector<BinaryMask> masks;
    for (const auto& g : s.gts) {
      masks.push_back(rle_decode(g.mask));
      EXPECT_EQ(testing::flood_fill_count(masks.back(), 8), 1);
      EXPECT_EQ(g.image_id, 3);
      const BBox b = bbox_of_mask(masks.back());
      EXPECT_EQ(b.x, g.box.x);
      EXPECT_EQ(b.w, g.box.w);
    }
    for (std::size_t i = 0; i < masks.size(); ++i) {
      for (std::size_t j = i + 1; j < masks.size(); ++j) {
        EXPECT_LE(testing::brute_mask_iou(masks[i], masks[j]), 0.2);
      }
    }
    for (const auto& c : s.cells) {
      EXPECT_GE(c.semi_major / c.semi_minor, 1.0 - 1e-12);
      EXPECT_LE(c.semi_major / c.semi_minor, 4.0 + 1e-12);
    }
  }
}

TEST(Scene, PlacementFailure) {
  SceneSpec s = small_spec(1, 50);
  s.width = 40;
  s.height = 40;
  s.overlap_max = 0.0;
  s.max_attempts = 20;
  try {
    gen_scene_layout(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kPlacementFailure);
  }
}

TEST(Scene, ValidateRejectsBadSpecs) {
  SceneSpec s;
  s.elongation_min = 0.5;
  EXPECT_THROW(s.validate(), Error);
  OracleSpec o;
  o.drop_prob = {1.2, 0};
  EXPECT_THROW(o.validate(), Error);
}

struct Views {
  Scene scene;
  RotatedFrame frame;
};

Views scene_views(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.n_cells = 30;
  return {gen_scene_layout(spec), rotation_transform(spec.width, spec.height, 45.0)};
}

TEST(Oracle, ZeroNoiseEqualsWarpedGt) {
  const Views v = scene_views(11);
  const OracleSpec spec = OracleSpec::zero_noise(5);
  const auto orig = oracle_detect(v.scene, View::kOriginal, AffineTransform::identity(), v.scene.dims,
                                  0.0, spec, 0, 0);
  ASSERT_EQ(orig.size(), v.scene.gts.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    EXPECT_EQ(orig[i].mask, v.scene.gts[i].mask);
    EXPECT_EQ(orig[i].score, 1.0);
    EXPECT_EQ(orig[i].class_id, v.scene.gts[i].class_id);
  }
  const auto rot = oracle_detect(v.scene, View::kRotated, v.frame.transform, v.frame.out, 45.0, spec, 0, 500);
  ASSERT_EQ(rot.size(), v.scene.gts.size());
  for (std::size_t i = 0; i < rot.size(); ++i) {
    const RleMask warped =
        to_rle(rasterize_polygon(transform_polygon(cell_polygon(v.scene.cells[i]), v.frame.transform), v.frame.out));
    EXPECT_EQ(rot[i].mask, warped);
    EXPECT_EQ(rot[i].score, 1.0);
    EXPECT_EQ(rot[i].view, View::kRotated);
    EXPECT_EQ(rot[i].det_id, 500 + static_cast<std::int64_t>(i));
    // The back-mapped rotated detection lands on its GT.
    const auto back = backmap(std::vector<Detection>{rot[i]}, v.frame.transform, v.scene.dims);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_GE(mask_iou(back[0].mask, v.scene.gts[i].mask), 0.9);
  }
}

TEST(Oracle, DropAllInRotatedView) {
  const Views v = scene_views(12);
  OracleSpec spec;
  spec.drop_prob = {0.0, 1.0};
  EXPECT_TRUE(oracle_detect(v.scene, View::kRotated, v.frame.transform, v.frame.out, 45.0, spec, 0, 0).empty());
  EXPECT_EQ(oracle_detect(v.scene, View::kOriginal, AffineTransform::identity(), v.scene.dims, 0.0, spec, 0, 0)
                .size(),
            v.scene.gts.size());
}

TEST(Oracle, FragmentsAreAllFiltered) {
  for (std::uint64_t seed : {13ull, 14ull, 15ull}) {
    const Views v = scene_views(seed);
    OracleSpec spec;
    spec.seed = seed;
    spec.fragment_prob = 1.0;
    spec.boundary_jitter = 2.0;
    const auto orig = oracle_detect(v.scene, View::kOriginal, AffineTransform::identity(), v.scene.dims,
                                    0.0, spec, 0, 0);
    const auto rot = oracle_detect(v.scene, View::kRotated, v.frame.transform, v.frame.out, 45.0, spec, 0, 500);
    for (const auto* dets : {&orig, &rot}) {
      for (const auto& d : *dets) EXPECT_EQ(component_count(d.mask, Connectivity::kEight), 2) << d.det_id;
    }
    DvsConfig cfg;
    EXPECT_TRUE(dvs_fuse(orig, rot, v.frame.transform, v.scene.dims, cfg).empty());
  }
}

TEST(Oracle, Deterministic) {
  const Views v = scene_views(16);
  OracleSpec spec;
  spec.seed = 3;
  spec.drop_prob = {0.5, 0.5};
  spec.boundary_jitter = 2.0;
  spec.duplicate_prob = 0.3;
  auto run = [&](View view) {
    return view == View::kOriginal
               ? oracle_detect(v.scene, view, AffineTransform::identity(), v.scene.dims, 0.0, spec, 0, 0)
               : oracle_detect(v.scene, view, v.frame.transform, v.frame.out, 45.0, spec, 0, 0);
  };
  const auto a = run(View::kOriginal), b = run(View::kOriginal);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mask, b[i].mask);
    EXPECT_EQ(a[i].score, b[i].score);
  }
  for (const auto& d : a) {
    EXPECT_GE(d.score, 0.3);
    EXPECT_LE(d.score, 1.0);
  }
  EXPECT_FALSE(run(View::kRotated).empty());
}

TEST(Pipeline, FragmentsNeverSurviveDvsOnly) {
  SuiteSpec suite = fixed_suite();
  suite.seeds = {9};
  suite.images_per_seed = 2;
  suite.oracle.fragment_prob = 0.2;
  MsConfig ms;
  const auto r = run_end_to_end(suite, DvsConfig{}, ms, EvalConfig{}, PipelineMode::kDvsOnly);
  EXPECT_FALSE(r.detections.empty());
  for (const auto& d : r.detections) EXPECT_EQ(component_count(d.mask, Connectivity::kEight), 1);
}

TEST(Pipeline, ZeroNoiseFullIsPerfect) {
  SuiteSpec suite = zero_noise_suite();
  suite.images_per_seed = 3;
  MsConfig ms;
  ms.train_images = 3;
  const auto r = run_end_to_end(suite, DvsConfig{}, ms, EvalConfig{}, PipelineMode::kFull);
  EXPECT_EQ(r.summary.segm.ap, 1.0);
  EXPECT_EQ(r.summary.bbox.ap, 1.0);
  EXPECT_EQ(r.summary.segm.ap75, 1.0);
}

TEST(Pipeline, ThreadCountDoesNotMatter) {
  SuiteSpec suite = fixed_suite();
  suite.seeds = {2};
  suite.images_per_seed = 4;
  MsConfig ms;
  ms.train_images = 4;
  const auto a = run_end_to_end(suite, DvsConfig{}, ms, EvalConfig{}, PipelineMode::kFull, 1);
  const auto b = run_end_to_end(suite, DvsConfig{}, ms, EvalConfig{}, PipelineMode::kFull, 3);
  EXPECT_EQ(eval_summary_to_json(a.summary).dump(), eval_summary_to_json(b.summary).dump());
  EXPECT_EQ(a.detections.size(), b.detections.size());
}

TEST(Pipeline, Modes) {
  EXPECT_EQ(parse_mode("dvs_only"), PipelineMode::kDvsOnly);
  EXPECT_EQ(mode_name(PipelineMode::kMsOnly), "ms_only");
  EXPECT_THROW(parse_mode("nope"), Error);
  EXPECT_EQ(suite_by_name("fixed").image_count(), 100u);
  EXPECT_THROW(suite_by_name("other"), Error);
}

TEST(Pipeline, ImageSeedsDistinct) {
  const SuiteSpec s = fixed_suite();
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < s.image_count(); ++i) seeds.insert(s.image_seed(i));
  EXPECT_EQ(seeds.size(), s.image_count());
}

}  // namespace
}  // namespace dvscell
