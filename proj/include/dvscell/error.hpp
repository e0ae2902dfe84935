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

#include <stdexcept>
#include <string>
#include <string_view>

namespace dvscell {

enum class Errc {
  kInvalidRle,
  kDimensionMismatch,
  kInvalidDims,
  kNonInvertibleTransform,
  kInvalidConfig,
  kMissingScore,
  kScorerNotTrained,
  kClassOutOfRange,
  kDomainError,
  kUnknownImage,
  kUndecodableMask,
  kSizeMismatch,
  kParseError,
  kUnknownLabel,
  kDegeneratePolygon,
  kUnsupportedFormat,
  kPlacementFailure,
  kIoError,
  kUseAfterClose,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidRle: return "InvalidRle";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kInvalidDims: return "InvalidDims";
    case Errc::kNonInvertibleTransform: return "NonInvertibleTransform";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kMissingScore: return "MissingScore";
    case Errc::kScorerNotTrained: return "ScorerNotTrained";
    case Errc::kClassOutOfRange: return "ClassOutOfRange";
    case Errc::kDomainError: return "DomainError";
    case Errc::kUnknownImage: return "UnknownImage";
    case Errc::kUndecodableMask: return "UndecodableMask";
    case Errc::kSizeMismatch: return "SizeMismatch";
    case Errc::kParseError: return "ParseError";
    case Errc::kUnknownLabel: return "UnknownLabel";
    case Errc::kDegeneratePolygon: return "DegeneratePolygon";
    case Errc::kUnsupportedFormat: return "UnsupportedFormat";
    case Errc::kPlacementFailure: return "PlacementFailure";
    case Errc::kIoError: return "IoError";
    case Errc::kUseAfterClose: return "UseAfterClose";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above; the
// message is prefixed with the code name so it survives string-only channels.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dvscell
