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
#include <png.h>
#include <unistd.h>

#include <filesystem>

#include "dvscell/io.hpp"
#include "dvscell/rng.hpp"
#include "test_util.hpp"

namespace dvscell {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dvscell_io_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::kIoError;
}

DetectionFile random_file(Rng& rng, int n) {
  DetectionFile f;
  f.images = {{3, 31, 17, "a.png"}, {8, 20, 25, "b.png"}};
  for (int i = 0; i < n; ++i) {
    const ImageInfo& im = f.images[rng.below(2)];
    const BinaryMask m = testing::random_mask_sized(rng, im.width, im.height, rng.uniform(0, 0.3));
    Detection d = testing::make_det(1000 + i, rng.uniform(), m, 1 + static_cast<int>(rng.below(2)), im.image_id);
    d.box = {rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(0, 9), rng.uniform(0, 9)};
    d.view = rng.bernoulli(0.5) ? View::kRotated : View::kOriginal;
    f.detections.push_back(d);
  }
  return f;
}

TEST_F(IoTest, DetectionRoundTrip) {
  Rng rng(81);
  const DetectionFile f = random_file(rng, 100);
  write_detections(f, dir_ / "d.json");
  const DetectionFile g = read_detections(dir_ / "d.json");
  EXPECT_EQ(g.schema_version, f.schema_version);
  EXPECT_EQ(g.images, f.images);
  ASSERT_EQ(g.detections.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    const Detection& a = f.detections[i];
    const Detection& b = g.detections[i];
    EXPECT_EQ(a.det_id, b.det_id);
    EXPECT_EQ(a.image_id, b.image_id);
    EXPECT_EQ(a.class_id, b.class_id);
    EXPECT_EQ(a.score, b.score);
    EXPECT_EQ(a.box.x, b.box.x);
    EXPECT_EQ(a.box.y, b.box.y);
    EXPECT_EQ(a.box.w, b.box.w);
    EXPECT_EQ(a.box.h, b.box.h);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.view, b.view);
  }
  write_detections(g, dir_ / "e.json");
  EXPECT_EQ(read_text_file(dir_ / "d.json"), read_text_file(dir_ / "e.json"));
}

TEST_F(IoTest, BadCountsRejected) {
  Rng rng(82);
  json doc = detection_file_to_json(random_file(rng, 1));
  doc["detections"][0]["segmentation"]["counts"] = {1, 2};
  EXPECT_EQ(code_of([&] { detection_file_from_json(doc); }), Errc::kInvalidRle);
}

TEST_F(IoTest, UnknownFieldsPreserved) {
  Rng rng(83);
  json doc = detection_file_to_json(random_file(rng, 2));
  doc["producer"] = {{"name", "det-v2"}};
  doc["detections"][1]["feature_hash"] = "abc";
  const DetectionFile f = detection_file_from_json(doc);
  const json back = detection_file_to_json(f);
  EXPECT_EQ(back["producer"]["name"], "det-v2");
  EXPECT_EQ(back["detections"][1]["feature_hash"], "abc");
  EXPECT_FALSE(back["detections"][0].contains("feature_hash"));
}

TEST_F(IoTest, MalformedDetections) {
  Rng rng(84);
  const json good = detection_file_to_json(random_file(rng, 1));
  json bad = good;
  bad["detections"][0]["score"] = 1.5;
  EXPECT_EQ(code_of([&] { detection_file_from_json(bad); }), Errc::kParseError);
  bad = good;
  bad["detections"][0]["image_id"] = 42;
  EXPECT_EQ(code_of([&] { detection_file_from_json(bad); }), Errc::kParseError);
  bad = good;
  bad["detections"][0].erase("segmentation");
  EXPECT_EQ(code_of([&] { detection_file_from_json(bad); }), Errc::kParseError);
  write_text_file(dir_ / "broken.json", "{not json");
  EXPECT_EQ(code_of([&] { read_detections(dir_ / "broken.json"); }), Errc::kParseError);
  EXPECT_EQ(code_of([&] { read_detections(dir_ / "missing.json"); }), Errc::kIoError);
}

TEST_F(IoTest, RasterRoundTrip) {
  Rng rng(85);
  Raster img(1152, 863, 3);
  for (auto& s : img.samples()) s = static_cast<std::uint8_t>(rng.below(256));
  write_raster(img, dir_ / "rgb.png");
  const Raster back = read_raster(dir_ / "rgb.png");
  EXPECT_EQ(back.channels(), 3);
  EXPECT_EQ(back.samples(), img.samples());
  write_raster(img, dir_ / "rgb2.png");
  EXPECT_EQ(read_text_file(dir_ / "rgb.png"), read_text_file(dir_ / "rgb2.png"));

  Raster gray(13, 7, 1);
  for (auto& s : gray.samples()) s = static_cast<std::uint8_t>(rng.below(256));
  write_raster(gray, dir_ / "gray.png");
  const Raster g = read_raster(dir_ / "gray.png");
  EXPECT_EQ(g.channels(), 1);
  EXPECT_EQ(g.samples(), gray.samples());
}

TEST_F(IoTest, SixteenBitRejected) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 4;
  image.height = 3;
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> px(12, 40000);
  ASSERT_TRUE(png_image_write_to_file(&image, (dir_ / "deep.png").c_str(), 0, px.data(), 0, nullptr));
  EXPECT_EQ(code_of([&] { read_raster(dir_ / "deep.png"); }), Errc::kUnsupportedFormat);
  EXPECT_EQ(code_of([&] { read_raster(dir_ / "none.png"); }), Errc::kIoError);
}

TEST_F(IoTest, Annotations) {
  Annotation a;
  a.image_width = 100;
  a.image_height = 100;
  a.shapes.push_back({"healthy", {{10, 10}, {20, 10}, {20, 20}, {10, 20}}});
  a.shapes.push_back({"unhealthy", {{50, 50}, {70, 52}, {60, 80}}});
  write_annotation(a, dir_ / "a.json");
  const LabelMap labels{{"healthy", 1}, {"unhealthy", 2}};
  const auto gts = read_annotations(dir_ / "a.json", labels, 4, 10);
  ASSERT_EQ(gts.size(), 2u);
  EXPECT_EQ(rle_area(gts[0].mask), 100);
  EXPECT_EQ(gts[0].class_id, 1);
  EXPECT_EQ(gts[1].class_id, 2);
  EXPECT_EQ(gts[1].gt_id, 11);
  EXPECT_EQ(gts[1].image_id, 4);
  const BinaryMask ref = testing::brute_rasterize(a.shapes[1].points, 100, 100);
  EXPECT_EQ(gts[1].mask, rle_encode(ref));

  Annotation empty = a;
  empty.shapes.clear();
  EXPECT_TRUE(annotation_to_gts(empty, labels, 0).empty());

  Annotation two = a;
  two.shapes = {{"healthy", {{1, 1}, {5, 5}}}};
  EXPECT_EQ(code_of([&] { annotation_to_gts(two, labels, 0); }), Errc::kDegeneratePolygon);
  EXPECT_EQ(code_of([&] { annotation_to_gts(a, LabelMap{{"healthy", 1}}, 0); }), Errc::kUnknownLabel);

  json rect = annotation_to_json(a);
  rect["shapes"][0]["shape_type"] = "rectangle";
  EXPECT_EQ(code_of([&] { annotation_from_json(rect, "x"); }), Errc::kParseError);
}

TEST_F(IoTest, LabelMap) {
  EXPECT_EQ(label_map_from_json(json{{"a", 1}, {"b", 2}}).at("b"), 2);
  EXPECT_EQ(code_of([&] { label_map_from_json(json{{"a", 0}}); }), Errc::kParseError);
}

TEST_F(IoTest, ScorerFiles) {
  LogisticModel m = LogisticModel::zeros();
  m.weights[2] = 0.1 + 0.2;
  m.bias = -1.0 / 3.0;
  const LogisticModel back = logistic_model_from_json(json::parse(logistic_model_to_json(m).dump()));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);

  const ExternalScores s = external_scores_from_json(json{{"7", 0.42}, {"12", 1.0}});
  EXPECT_EQ(s.by_det_id.at(7), 0.42);
  EXPECT_EQ(external_scores_to_json(s), (json{{"12", 1.0}, {"7", 0.42}}));
  EXPECT_EQ(code_of([&] { external_scores_from_json(json{{"x7", 0.42}}); }), Errc::kParseError);
}

TEST_F(IoTest, ConfigText) {
  const ConfigMap m = parse_config_text("# comment\n theta = 30 \n\nnms_iou=0.8 # relaxed\n");
  EXPECT_EQ(m.at("theta"), "30");
  EXPECT_EQ(m.at("nms_iou"), "0.8");
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(code_of([&] { parse_config_text("theta\n"); }), Errc::kParseError);
}

TEST_F(IoTest, GroundTruthFromDetectionFile) {
  Rng rng(86);
  DetectionFile f = random_file(rng, 3);
  json doc = detection_file_to_json(f);
  doc["detections"][2]["ignore"] = true;
  const auto gts = gts_from_detection_file(detection_file_from_json(doc));
  ASSERT_EQ(gts.size(), 3u);
  EXPECT_FALSE(gts[0].ignore);
  EXPECT_TRUE(gts[2].ignore);
  EXPECT_EQ(gts[1].mask, f.detections[1].mask);
}

}  // namespace
}  // namespace dvscell
