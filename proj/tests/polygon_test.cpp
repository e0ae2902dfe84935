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

#include <cmath>

#include "dvscell/polygon.hpp"
#include "dvscell/rng.hpp"
#include "test_util.hpp"

namespace dvscell {
namespace {

TEST(Polygon, AxisAlignedSquare) {
  const Polygon sq{{10, 10}, {20, 10}, {20, 20}, {10, 20}};
  const MaskCrop m = rasterize_polygon(sq, {100, 100});
  EXPECT_EQ(m.area(), 100);
  const BBox b = bbox_of_mask(to_rle(m));
  EXPECT_EQ(b.x, 10);
  EXPECT_EQ(b.y, 10);
  EXPECT_EQ(b.w, 10);
  EXPECT_EQ(b.h, 10);
}

TEST(Polygon, TooFewPoints) {
  try {
    rasterize_polygon({{0, 0}, {5, 5}}, {10, 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDegeneratePolygon);
  }
}

TEST(Polygon, ClippedToFrame) {
  const MaskCrop m = rasterize_polygon({{-5, -5}, {5, -5}, {5, 5}, {-5, 5}}, {10, 10});
  EXPECT_EQ(m.area(), 25);
  EXPECT_EQ(rasterize_polygon({{50, 50}, {60, 50}, {60, 60}}, {10, 10}).area(), 0);
}

TEST(Polygon, MatchesPointInPolygonOracle) {
  Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    const int w = 5 + static_cast<int>(rng.below(40)), h = 5 + static_cast<int>(rng.below(40));
    Polygon poly;
    const int n = 3 + static_cast<int>(rng.below(9));
    for (int k = 0; k < n; ++k) {
      // Mix of integer and half-integer vertices hits the boundary cases.
      const double x = i % 3 == 0 ? std::round(rng.uniform(-3, w + 3) * 2) / 2 : rng.uniform(-3, w + 3);
      const double y = i % 3 == 0 ? std::round(rng.uniform(-3, h + 3) * 2) / 2 : rng.uniform(-3, h + 3);
      poly.push_back({x, y});
    }
    const BinaryMask got = to_mask(rasterize_polygon(poly, {w, h}));
    const BinaryMask ref = testing::brute_rasterize(poly, w, h);
    ASSERT_TRUE(std::equal(got.bits().begin(), got.bits().end(), ref.bits().begin())) << "case " << i;
  }
}

TEST(Polygon, Deterministic) {
  const Polygon p{{1.3, 2.7}, {30.1, 4.2}, {18.6, 25.9}, {5.5, 19.1}};
  EXPECT_EQ(to_rle(rasterize_polygon(p, {40, 30})), to_rle(rasterize_polygon(p, {40, 30})));
}

TEST(Polygon, TransformPolygon) {
  const Polygon p{{0, 0}, {2, 0}, {0, 3}};
  const AffineTransform t{1, 0, 5, 0, 1, -1};
  const Polygon q = transform_polygon(p, t);
  ASSERT_EQ(q.size(), 3u);
  EXPECT_EQ(q[2].x, 5);
  EXPECT_EQ(q[2].y, 2);
}

}  // namespace
}  // namespace dvscell
