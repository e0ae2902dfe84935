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

#include "dvscell/config.hpp"
#include "dvscell/detection.hpp"
#include "dvscell/dvs.hpp"
#include "dvscell/error.hpp"
#include "dvscell/eval.hpp"
#include "dvscell/geometry.hpp"
#include "dvscell/gradcheck.hpp"
#include "dvscell/io.hpp"
#include "dvscell/losses.hpp"
#include "dvscell/mask.hpp"
#include "dvscell/overlay.hpp"
#include "dvscell/parallel.hpp"
#include "dvscell/polygon.hpp"
#include "dvscell/rng.hpp"
#include "dvscell/select.hpp"
#include "dvscell/synth.hpp"
#include "dvscell/version.hpp"
