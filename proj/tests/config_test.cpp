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

#include <type_traits>

#include "dvscell/bindings.hpp"
#include "dvscell/config.hpp"

namespace dvscell {
namespace {

TEST(Config, DefaultsSnapshot) {
  const ConfigMap s = config_snapshot(RunConfig{});
  EXPECT_EQ(s.at("theta"), "45");
  EXPECT_EQ(s.at("nms_iou"), "0.9");
  EXPECT_EQ(s.at("nms_metric"), "box");
  EXPECT_EQ(s.at("connectivity"), "8");
  EXPECT_EQ(s.at("min_mask_area"), "0");
  EXPECT_EQ(s.at("class_aware_nms"), "true");
  EXPECT_EQ(s.at("fill_holes"), "false");
  EXPECT_EQ(s.at("keep_thresh"), "0.5");
  EXPECT_EQ(s.at("tau_spot"), "0.7");
  EXPECT_EQ(s.at("lr"), "0.05");
  EXPECT_EQ(s.at("momentum"), "0.9");
  EXPECT_EQ(s.at("weight_decay"), "1e-04");
  EXPECT_EQ(s.at("max_dets"), "100");
  EXPECT_EQ(s.at("recall_samples"), "101");
  EXPECT_EQ(s.at("iou_thresholds"), "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95");
  EXPECT_EQ(s.size(), config_key_names().size());
}

TEST(Config, ApplyAndRoundTrip) {
  RunConfig cfg;
  apply_config(parse_config_text("theta=30\nnms_metric=mask\nconnectivity=4\nspot_rule=max_score\n"
                                 "iou_thresholds=0.5,0.75\nfill_holes=true\nepochs=7\n"),
               cfg);
  EXPECT_EQ(cfg.dvs.theta, 30.0);
  EXPECT_EQ(cfg.dvs.nms_metric, NmsMetric::kMask);
  EXPECT_EQ(cfg.dvs.connectivity, Connectivity::kFour);
  EXPECT_EQ(cfg.ms.spot_rule, SpotRule::kMaxScore);
  EXPECT_EQ(cfg.eval.iou_thresholds, (std::vector<double>{0.5, 0.75}));
  EXPECT_TRUE(cfg.dvs.fill_holes);
  EXPECT_EQ(cfg.ms.hyper.epochs, 7);

  RunConfig again;
  apply_config(config_snapshot(cfg), again);
  EXPECT_EQ(config_snapshot(again), config_snapshot(cfg));
}

TEST(Config, Rejections) {
  for (const char* text : {"bogus=1", "nms_iou=2", "nms_iou=abc", "connectivity=6", "theta=",
                           "iou_thresholds=0.7,0.5", "fill_holes=maybe", "max_dets=1.5"}) {
    RunConfig cfg;
    try {
      apply_config(parse_config_text(text), cfg);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kInvalidConfig) << text;
    }
  }
}

TEST(Config, FormatDouble) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(std::stod(format_double(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Bindings, InterfaceOnly) {
  EXPECT_TRUE(std::is_abstract_v<bindings::BoundSession>);
  EXPECT_EQ(errc_name(Errc::kUseAfterClose), "UseAfterClose");
}

}  // namespace
}  // namespace dvscell
