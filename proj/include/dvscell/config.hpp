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

// Run configuration as flat keys shared by the config file and CLI flags.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "dvscell/dvs.hpp"
#include "dvscell/error.hpp"
#include "dvscell/eval.hpp"
#include "dvscell/io.hpp"
#include "dvscell/synth.hpp"

namespace dvscell {

struct RunConfig {
  DvsConfig dvs;
  EvalConfig eval;
  MsConfig ms;

  void validate() const {
    dvs.validate();
    eval.validate();
    ms.validate();
  }
};

// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error(Errc::kInvalidConfig, key + ": '" + v + "' is not a number");
  }
  return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error(Errc::kInvalidConfig, key + ": '" + v + "' is not an integer");
  }
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error(Errc::kInvalidConfig, key + ": '" + v + "' is not an unsigned integer");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(Errc::kInvalidConfig, key + ": '" + v + "' is not a boolean");
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  return out;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

struct ConfigKey {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, ConfigKey>& config_keys() {
  static const std::map<std::string, ConfigKey> keys = [] {
    std::map<std::string, ConfigKey> k;
    auto add_double = [&](const std::string& name, auto accessor) {
      k[name] = {[=](RunConfig& c, const std::string& v) { accessor(c) = parse_double(name, v); },
                 [=](RunConfig c) {
                   return format_double(accessor(c));
                 }};
    };
    add_double("theta", [](RunConfig& c) -> double& { return c.dvs.theta; });
    add_double("nms_iou", [](RunConfig& c) -> double& { return c.dvs.nms_iou; });
    add_double("keep_thresh", [](RunConfig& c) -> double& { return c.ms.keep_thresh; });
    add_double("tau_spot", [](RunConfig& c) -> double& { return c.ms.tau_spot; });
    add_double("baseline_nms_iou", [](RunConfig& c) -> double& { return c.ms.baseline_nms_iou; });
    add_double("lr", [](RunConfig& c) -> double& { return c.ms.hyper.lr; });
    add_double("momentum", [](RunConfig& c) -> double& { return c.ms.hyper.momentum; });
    add_double("weight_decay", [](RunConfig& c) -> double& { return c.ms.hyper.weight_decay; });

    auto add_int = [&](const std::string& name, auto accessor) {
      k[name] = {[=](RunConfig& c, const std::string& v) {
                   accessor(c) = static_cast<std::remove_reference_t<decltype(accessor(c))>>(
                       parse_int(name, v));
                 },
                 [=](RunConfig c) {
                   return std::to_string(accessor(c));
                 }};
    };
    add_int("min_mask_area", [](RunConfig& c) -> std::int64_t& { return c.dvs.min_mask_area; });
    add_int("max_dets", [](RunConfig& c) -> int& { return c.eval.max_dets; });
    add_int("recall_samples", [](RunConfig& c) -> int& { return c.eval.recall_samples; });
    add_int("epochs", [](RunConfig& c) -> int& { return c.ms.hyper.epochs; });
    add_int("batch_size", [](RunConfig& c) -> int& { return c.ms.hyper.batch_size; });
    add_int("train_images", [](RunConfig& c) -> int& { return c.ms.train_images; });
    k["scorer_seed"] = {[](RunConfig& c, const std::string& v) {
                          c.ms.hyper.seed = parse_uint("scorer_seed", v);
                        },
                        [](const RunConfig& c) { return std::to_string(c.ms.hyper.seed); }};

    auto add_bool = [&](const std::string& name, auto accessor) {
      k[name] = {[=](RunConfig& c, const std::string& v) { accessor(c) = parse_bool(name, v); },
                 [=](RunConfig c) {
                   return std::string(accessor(c) ? "true" : "false");
                 }};
    };
    add_bool("class_aware_nms", [](RunConfig& c) -> bool& { return c.dvs.class_aware_nms; });
    add_bool("fill_holes", [](RunConfig& c) -> bool& { return c.dvs.fill_holes; });
    add_bool("calibrate_keep", [](RunConfig& c) -> bool& { return c.ms.calibrate_keep; });

    k["nms_metric"] = {[](RunConfig& c, const std::string& v) {
                         if (v == "box") c.dvs.nms_metric = NmsMetric::kBox;
                         else if (v == "mask") c.dvs.nms_metric = NmsMetric::kMask;
                         else throw Error(Errc::kInvalidConfig, "nms_metric: expected box or mask");
                       },
                       [](const RunConfig& c) {
                         return std::string(c.dvs.nms_metric == NmsMetric::kBox ? "box" : "mask");
                       }};
    k["connectivity"] = {[](RunConfig& c, const std::string& v) {
                           if (v == "4") c.dvs.connectivity = Connectivity::kFour;
                           else if (v == "8") c.dvs.connectivity = Connectivity::kEight;
                           else throw Error(Errc::kInvalidConfig, "connectivity: expected 4 or 8");
                         },
                         [](const RunConfig& c) {
                           return std::to_string(static_cast<int>(c.dvs.connectivity));
                         }};
    k["iou_type"] = {[](RunConfig& c, const std::string& v) {
                       if (v == "bbox") c.eval.iou_type = IouType::kBbox;
                       else if (v == "segm") c.eval.iou_type = IouType::kSegm;
                       else throw Error(Errc::kInvalidConfig, "iou_type: expected bbox or segm");
                     },
                     [](const RunConfig& c) { return std::string(iou_type_name(c.eval.iou_type)); }};
    k["iou_thresholds"] = {[](RunConfig& c, const std::string& v) {
                             c.eval.iou_thresholds = parse_double_list("iou_thresholds", v);
                           },
                           [](const RunConfig& c) { return join_doubles(c.eval.iou_thresholds); }};
    k["keep_grid"] = {[](RunConfig& c, const std::string& v) {
                        c.ms.keep_grid = parse_double_list("keep_grid", v);
                      },
                      [](const RunConfig& c) { return join_doubles(c.ms.keep_grid); }};
    k["spot_rule"] = {[](RunConfig& c, const std::string& v) {
                        if (v == "total_iou") c.ms.spot_rule = SpotRule::kTotalIou;
                        else if (v == "max_score") c.ms.spot_rule = SpotRule::kMaxScore;
                        else throw Error(Errc::kInvalidConfig, "spot_rule: expected total_iou or max_score");
                      },
                      [](const RunConfig& c) {
                        return std::string(c.ms.spot_rule == SpotRule::kTotalIou ? "total_iou"
                                                                                 : "max_score");
                      }};
    return k;
  }();
  return keys;
}

}  // namespace detail

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> names;
  for (const auto& [name, key] : detail::config_keys()) names.push_back(name);
  return names;
}

inline void apply_config(const ConfigMap& values, RunConfig& cfg) {
  const auto& keys = detail::config_keys();
  for (const auto& [name, value] : values) {
    const auto it = keys.find(name);
    if (it == keys.end()) throw Error(Errc::kInvalidConfig, "unknown config key '" + name + "'");
    it->second.set(cfg, value);
  }
  cfg.validate();
}

// Every key with its effective value, sorted by key.
inline ConfigMap config_snapshot(const RunConfig& cfg) {
  ConfigMap out;
  for (const auto& [name, key] : detail::config_keys()) out[name] = key.get(cfg);
  return out;
}

}  // namespace dvscell
