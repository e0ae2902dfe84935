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

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dvscell/mask.hpp"

namespace dvscell {

enum class View { kOriginal, kRotated };

constexpr std::string_view view_name(View v) {
  return v == View::kOriginal ? "original" : "rotated";
}

// One candidate instance from a detector view.
struct Detection {
  std::int64_t image_id = 0;
  std::int64_t det_id = 0;
  int class_id = 1;
  double score = 0.0;
  BBox box;
  RleMask mask;
  View view = View::kOriginal;

  bool operator==(const Detection&) const = default;
};

struct GtInstance {
  std::int64_t image_id = 0;
  std::int64_t gt_id = 0;
  int class_id = 1;
  RleMask mask;
  BBox box;
  bool ignore = false;

  bool operator==(const GtInstance&) const = default;
};

// Score descending, det_id ascending: the order every stage iterates in.
inline bool canonical_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.det_id < b.det_id;
}

inline void sort_canonical(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), canonical_before);
}

}  // namespace dvscell
