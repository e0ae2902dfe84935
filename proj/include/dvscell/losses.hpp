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

// Multi-task RoI loss: box regression (smooth L1 over four offsets, active
// for foreground classes only), classification (negative log-probability of
// the labeled class) and per-pixel mask binary cross-entropy averaged over the
// mask. All logarithms are natural. Templates accept any floating-point type
// so gradient checks can evaluate in extended precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dvscell/error.hpp"

namespace dvscell {

template <std::floating_point T>
T smooth_l1(T x) {
  const T ax = std::abs(x);
  return ax < T(1) ? T(0.5) * x * x : ax - T(0.5);
}

template <std::floating_point T>
T smooth_l1_grad(T x) {
  if (std::abs(x) < T(1)) return x;
  return x > T(0) ? T(1) : T(-1);
}

template <std::floating_point T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <std::floating_point T>
struct RoISample {
  std::vector<T> p;                  // class probabilities, p[0] = background
  int k_gt = 0;                      // labeled class in [0, K]
  std::vector<std::array<T, 4>> t;   // t[k-1] = predicted offsets for class k
  std::array<T, 4> v{};              // target offsets
  int mask_rows = 0;                 // M
  int mask_cols = 0;                 // N
  std::vector<T> mask_logits;        // row-major M x N
  std::vector<std::uint8_t> mask_gt; // row-major M x N, values 0/1

  int num_classes() const { return static_cast<int>(p.size()) - 1; }
};

template <std::floating_point T>
struct LossTerms {
  T total = 0;
  T box = 0;
  T cls = 0;
  T mask = 0;
};

struct LossWeights {
  double box = 1.0;
  double cls = 1.0;
  double mask = 1.0;
};

template <std::floating_point T>
T box_loss(const RoISample<T>& s, int k) {
  if (k < 0 || k > s.num_classes()) {
    throw Error(Errc::kClassOutOfRange, "class " + std::to_string(k));
  }
  if (k == 0) return T(0);
  if (static_cast<int>(s.t.size()) < k) {
    throw Error(Errc::kClassOutOfRange, "no offsets for class " + std::to_string(k));
  }
  T sum = 0;
  for (int i = 0; i < 4; ++i) sum += smooth_l1(s.t[k - 1][i] - s.v[i]);
  return sum;
}

template <std::floating_point T>
T cls_loss(std::span<const T> p, int k) {
  if (k < 0 || k >= static_cast<int>(p.size())) {
    throw Error(Errc::kClassOutOfRange, "class " + std::to_string(k));
  }
  if (!(p[k] > T(0))) {
    throw Error(Errc::kDomainError, "log of non-positive probability");
  }
  return -std::log(p[k]);
}

// Mean BCE from logits in the stable form max(x,0) - x*y + log1p(exp(-|x|)).
template <std::floating_point T>
T mask_loss(std::span<const T> logits, std::span<const std::uint8_t> gt) {
  if (logits.size() != gt.size() || logits.empty()) {
    throw Error(Errc::kDimensionMismatch, "mask logits and target differ in size");
  }
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T x = logits[i];
    const T y = gt[i] ? T(1) : T(0);
    sum += std::max(x, T(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  return sum / static_cast<T>(logits.size());
}

template <std::floating_point T>
void validate_sample(const RoISample<T>& s) {
  if (s.p.size() < 2) throw Error(Errc::kDimensionMismatch, "need K >= 1 classes");
  T sum = 0;
  for (T v : s.p) {
    if (!(v > T(0) && v <= T(1))) {
      throw Error(Errc::kDomainError, "class probabilities must lie in (0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - T(1)) > T(1e-9)) {
    throw Error(Errc::kDomainError, "class probabilities must sum to 1");
  }
  if (s.k_gt < 0 || s.k_gt > s.num_classes()) {
    throw Error(Errc::kClassOutOfRange, "k_gt " + std::to_string(s.k_gt));
  }
  if (static_cast<int>(s.t.size()) != s.num_classes()) {
    throw Error(Errc::kDimensionMismatch, "one offset vector per class expected");
  }
  const auto mn = static_cast<std::size_t>(s.mask_rows) * s.mask_cols;
  if (s.mask_rows < 1 || s.mask_cols < 1 || s.mask_logits.size() != mn ||
      s.mask_gt.size() != mn) {
    throw Error(Errc::kDimensionMismatch, "mask logits and target must be M x N");
  }
}

namespace detail {

// Evaluates the terms without validating p; used directly by finite
// differences, which perturb single probabilities.
template <std::floating_point T>
LossTerms<T> loss_terms(const RoISample<T>& s, const LossWeights& w) {
  LossTerms<T> out;
  out.box = box_loss(s, s.k_gt);
  out.cls = cls_loss<T>(s.p, s.k_gt);
  out.mask = mask_loss<T>(s.mask_logits, s.mask_gt);
  out.total = T(w.box) * out.box + T(w.cls) * out.cls + T(w.mask) * out.mask;
  return out;
}

}  // namespace detail

template <std::floating_point T>
LossTerms<T> total_loss(const RoISample<T>& s, const LossWeights& w = {}) {
  validate_sample(s);
  return detail::loss_terms(s, w);
}

template <std::floating_point T>
struct LossGradients {
  std::vector<T> p;          // dL/dp, only the k_gt entry is nonzero
  std::array<T, 4> t{};      // dL/dt^{k_gt}; zero for background
  std::vector<T> mask_logits;
};

template <std::floating_point T>
LossGradients<T> loss_gradients(const RoISample<T>& s, const LossWeights& w = {}) {
  validate_sample(s);
  LossGradients<T> g;
  g.p.assign(s.p.size(), T(0));
  g.p[s.k_gt] = -T(w.cls) / s.p[s.k_gt];
  if (s.k_gt >= 1) {
    for (int i = 0; i < 4; ++i) {
      g.t[i] = T(w.box) * smooth_l1_grad(s.t[s.k_gt - 1][i] - s.v[i]);
    }
  }
  const T inv_mn = T(1) / static_cast<T>(s.mask_logits.size());
  g.mask_logits.resize(s.mask_logits.size());
  for (std::size_t i = 0; i < s.mask_logits.size(); ++i) {
    const T y = s.mask_gt[i] ? T(1) : T(0);
    g.mask_logits[i] = T(w.mask) * (sigmoid(s.mask_logits[i]) - y) * inv_mn;
  }
  return g;
}

}  // namespace dvscell
