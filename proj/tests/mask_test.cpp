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

#include "dvscell/mask.hpp"
#include "dvscell/rng.hpp"
#include "test_util.hpp"

namespace dvscell {
namespace {

using testing::brute_box_iou;
using testing::brute_mask_iou;
using testing::flood_fill_count;
using testing::random_mask;

BinaryMask from_pixels(int w, int h, std::initializer_list<std::pair<int, int>> px) {
  BinaryMask m(w, h);
  for (auto [r, c] : px) m.set(r, c);
  return m;
}

TEST(Rle, EncodeExamples) {
  EXPECT_EQ(rle_encode(BinaryMask(2, 2)).counts, (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(rle_encode(from_pixels(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}})).counts,
            (std::vector<std::uint32_t>{0, 4}));
  EXPECT_EQ(rle_encode(from_pixels(2, 2, {{0, 1}})).counts, (std::vector<std::uint32_t>{2, 1, 1}));
}

TEST(Rle, DecodeExamples) {
  EXPECT_EQ(rle_decode({2, 2, {4}}).area(), 0);
  EXPECT_EQ(rle_decode({2, 2, {0, 4}}).area(), 4);
  const BinaryMask m = rle_decode({2, 2, {2, 1, 1}});
  EXPECT_EQ(m.area(), 1);
  EXPECT_TRUE(m.at(0, 1));
}

TEST(Rle, DecodeRejectsBadCounts) {
  for (const RleMask& bad : {RleMask{2, 2, {3}}, RleMask{2, 2, {2, 3}}, RleMask{2, 2, {1, 0, 0, 3}},
                             RleMask{0, 2, {}}}) {
    try {
      rle_decode(bad);
      FAIL() << "expected InvalidRle";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kInvalidRle);
    }
  }
}

TEST(Rle, RoundTripRandom) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const BinaryMask m = random_mask(rng, 40, 40);
    const RleMask r = rle_encode(m);
    ASSERT_EQ(rle_decode(r).bits().size(), m.bits().size());
    ASSERT_TRUE(std::equal(m.bits().begin(), m.bits().end(), rle_decode(r).bits().begin()));
    ASSERT_EQ(rle_area(r), m.area());
    for (std::size_t k = 1; k < r.counts.size(); ++k) ASSERT_GT(r.counts[k], 0u);
  }
}

TEST(Rle, CropRoundTrip) {
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const BinaryMask m = random_mask(rng, 30, 30, rng.uniform(0.0, 0.2));
    const RleMask r = rle_encode(m);
    EXPECT_EQ(to_rle(crop_of(r)), r);
    EXPECT_EQ(to_rle(crop_of(m)), r);
  }
}

TEST(MaskIou, Examples) {
  const BinaryMask a = from_pixels(2, 2, {{0, 0}, {0, 1}});
  const BinaryMask b = from_pixels(2, 2, {{0, 1}, {1, 1}});
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mask_iou(rle_encode(a), rle_encode(b)), 1.0 / 3.0);
  EXPECT_EQ(mask_iou(a, a), 1.0);
  EXPECT_EQ(mask_iou(from_pixels(2, 2, {{0, 0}}), from_pixels(2, 2, {{1, 1}})), 0.0);
  EXPECT_EQ(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)), 0.0);
}

TEST(MaskIou, DimensionMismatch) {
  try {
    mask_iou(rle_encode(BinaryMask(2, 2)), rle_encode(BinaryMask(3, 2)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDimensionMismatch);
  }
}

TEST(MaskIou, MatchesBruteForce) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const int w = 1 + static_cast<int>(rng.below(40)), h = 1 + static_cast<int>(rng.below(40));
    const BinaryMask a = testing::random_mask_sized(rng, w, h, rng.uniform());
    const BinaryMask b = testing::random_mask_sized(rng, w, h, rng.uniform());
    const double ref = brute_mask_iou(a, b);
    EXPECT_NEAR(mask_iou(rle_encode(a), rle_encode(b)), ref, 1e-12);
    EXPECT_NEAR(mask_iou(a, b), ref, 1e-12);
    EXPECT_EQ(mask_iou(rle_encode(a), rle_encode(b)), mask_iou(rle_encode(b), rle_encode(a)));
  }
}

TEST(BboxIou, Examples) {
  EXPECT_EQ(bbox_iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_NEAR(bbox_iou({0, 0, 10, 10}, {1, 1, 10, 10}), 81.0 / 119.0, 1e-15);
  EXPECT_EQ(bbox_iou({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0);
  EXPECT_EQ(bbox_iou({0, 0, 0, 10}, {0, 0, 0, 10}), 0.0);
}

TEST(BboxIou, MatchesBruteForce) {
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const BBox a{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 30), rng.uniform(0, 30)};
    const BBox b{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 30), rng.uniform(0, 30)};
    const double v = bbox_iou(a, b);
    EXPECT_NEAR(v, brute_box_iou(a, b), 1e-12);
    EXPECT_EQ(v, bbox_iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (a.area() > 0) EXPECT_EQ(bbox_iou(a, a), 1.0);
  }
}

TEST(BboxOfMask, Examples) {
  const BBox e = bbox_of_mask(BinaryMask(4, 4));
  EXPECT_EQ(e.x, 0);
  EXPECT_EQ(e.w, 0);
  const BBox f = bbox_of_mask(testing::rect_mask(7, 5, 0, 0, 7, 5));
  EXPECT_EQ(f.w, 7);
  EXPECT_EQ(f.h, 5);
  const BBox b = bbox_of_mask(from_pixels(5, 5, {{1, 1}, {3, 2}}));
  EXPECT_EQ(b.x, 1);
  EXPECT_EQ(b.y, 1);
  EXPECT_EQ(b.w, 2);
  EXPECT_EQ(b.h, 3);
}

TEST(BboxOfMask, TightOnRandomMasks) {
  Rng rng(15);
  for (int i = 0; i < 300; ++i) {
    const BinaryMask m = random_mask(rng, 30, 30, rng.uniform(0.0, 0.1));
    const BBox b = bbox_of_mask(m);
    const BBox br = bbox_of_mask(rle_encode(m));
    EXPECT_EQ(b.x, br.x);
    EXPECT_EQ(b.y, br.y);
    EXPECT_EQ(b.w, br.w);
    EXPECT_EQ(b.h, br.h);
    if (m.area() == 0) continue;
    bool top = false, bottom = false, left = false, right = false;
    for (int r = 0; r < m.height(); ++r) {
      for (int c = 0; c < m.width(); ++c) {
        if (!m.at(r, c)) continue;
        EXPECT_TRUE(c >= b.x && c < b.x + b.w && r >= b.y && r < b.y + b.h);
        top |= r == b.y;
        bottom |= r == b.y + b.h - 1;
        left |= c == b.x;
        right |= c == b.x + b.w - 1;
      }
    }
    EXPECT_TRUE(top && bottom && left && right);
  }
}

TEST(Components, Examples) {
  EXPECT_EQ(connected_components(BinaryMask(3, 3), Connectivity::kEight).count, 0);
  EXPECT_EQ(connected_components(from_pixels(3, 3, {{0, 1}, {2, 1}}), Connectivity::kEight).count, 2);
  const BinaryMask diag = from_pixels(2, 2, {{0, 0}, {1, 1}});
  EXPECT_EQ(connected_components(diag, Connectivity::kEight).count, 1);
  EXPECT_EQ(connected_components(diag, Connectivity::kFour).count, 2);
}

TEST(Components, LabelsInFirstEncounterOrder) {
  // Component B is met first in row 0, so it gets label 1 even though A's
  // pixel has the smaller column in row 1.
  const BinaryMask m = from_pixels(4, 2, {{0, 3}, {1, 0}});
  const Components cc = connected_components(m, Connectivity::kFour);
  EXPECT_EQ(cc.count, 2);
  EXPECT_EQ(cc.labels[3], 1);
  EXPECT_EQ(cc.labels[4], 2);
  EXPECT_EQ(cc.labels[0], 0);
}

TEST(Components, MatchesFloodFill) {
  Rng rng(16);
  for (int i = 0; i < 200; ++i) {
    const BinaryMask m = random_mask(rng, 40, 40, rng.uniform(0.2, 0.7));
    const int four = connected_components(m, Connectivity::kFour).count;
    const int eight = connected_components(m, Connectivity::kEight).count;
    EXPECT_EQ(four, flood_fill_count(m, 4));
    EXPECT_EQ(eight, flood_fill_count(m, 8));
    EXPECT_LE(eight, four);
    EXPECT_EQ(component_count(rle_encode(m), Connectivity::kEight), eight);
  }
}

TEST(Components, UShapeMergesLate) {
  // Two arms that only join on the last row exercise the union step.
  BinaryMask m(5, 4);
  for (int r = 0; r < 4; ++r) {
    m.set(r, 0);
    m.set(r, 4);
  }
  for (int c = 0; c < 5; ++c) m.set(3, c);
  EXPECT_EQ(connected_components(m, Connectivity::kFour).count, 1);
}

TEST(FillHoles, RingBecomesDisk) {
  BinaryMask m = testing::rect_mask(7, 7, 1, 1, 5, 5);
  m.set(3, 3, false);
  EXPECT_EQ(fill_holes(m).area(), 25);
  EXPECT_EQ(fill_holes(BinaryMask(3, 3)).area(), 0);
}

}  // namespace
}  // namespace dvscell
