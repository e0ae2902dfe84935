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

// Interface for host-language bindings. Only the contract lives here; no
// extension module is built from this tree.
//
// Buffers are copied at the boundary. Masks cross as row-major uint8
// buffers, one byte per pixel, nonzero meaning foreground. Detections and
// configs cross as the plain structs of the engine. Failures surface as the
// engine's Error, whose message keeps the error name as a prefix.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dvscell/detection.hpp"
#include "dvscell/dvs.hpp"
#include "dvscell/error.hpp"
#include "dvscell/eval.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/select.hpp"
#include "dvscell/synth.hpp"

namespace dvscell::bindings {

struct MaskBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // height * width, row-major
};

// One engine session holding configs. A session is used from one thread at
// a time; separate sessions may run concurrently. Every call after close()
// throws Errc::kUseAfterClose.
class BoundSession {
 public:
  virtual ~BoundSession() = default;

  virtual void configure(const DvsConfig& dvs, const MsConfig& ms, const EvalConfig& eval) = 0;

  virtual std::vector<Detection> fuse(std::span<const Detection> original,
                                      std::span<const Detection> rotated, Dims original_dims) = 0;
  virtual std::vector<Detection> select(std::span<const Detection> candidates,
                                        std::span<const double> scores) = 0;
  virtual EvalSummary evaluate(std::span<const Detection> preds, std::span<const GtInstance> gts,
                               std::span<const std::int64_t> image_ids) = 0;
  virtual double mask_iou(const MaskBuffer& a, const MaskBuffer& b) = 0;

  virtual void close() = 0;
  virtual bool closed() const = 0;
  virtual const char* version() const = 0;  // mirrors kVersion
};

std::unique_ptr<BoundSession> open_session();

}  // namespace dvscell::bindings
