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

// Central-difference verification of the analytic loss gradients. The
// numeric side evaluates the forward loss in long double, the analytic side
// runs in double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dvscell/losses.hpp"
#include "dvscell/rng.hpp"

namespace dvscell {

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

template <typename Fn>
long double central_difference(Fn&& f, long double x, long double step) {
  return (f(x + step) - f(x - step)) / (2.0L * step);
}

// Random RoI sample with K in [1, 3] classes and a mask of at most 6x6.
inline RoISample<double> random_roi_sample(Rng& rng) {
  RoISample<double> s;
  const int k = 1 + static_cast<int>(rng.below(3));
  std::vector<double> logits(k + 1);
  double z = 0;
  for (auto& l : logits) {
    l = rng.uniform(-2.0, 2.0);
    z += std::exp(l);
  }
  for (double l : logits) s.p.push_back(std::exp(l) / z);
  s.k_gt = static_cast<int>(rng.below(k + 1));
  s.t.resize(k);
  for (auto& tk : s.t) {
    for (auto& x : tk) x = rng.uniform(-3.0, 3.0);
  }
  for (auto& x : s.v) x = rng.uniform(-3.0, 3.0);
  s.mask_rows = 1 + static_cast<int>(rng.below(6));
  s.mask_cols = 1 + static_cast<int>(rng.below(6));
  const int mn = s.mask_rows * s.mask_cols;
  for (int i = 0; i < mn; ++i) {
    s.mask_logits.push_back(rng.uniform(-6.0, 6.0));
    s.mask_gt.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  return s;
}

inline RoISample<long double> widen(const RoISample<double>& s) {
  RoISample<long double> w;
  w.p.assign(s.p.begin(), s.p.end());
  w.k_gt = s.k_gt;
  for (const auto& tk : s.t) w.t.push_back({tk[0], tk[1], tk[2], tk[3]});
  for (int i = 0; i < 4; ++i) w.v[i] = s.v[i];
  w.mask_rows = s.mask_rows;
  w.mask_cols = s.mask_cols;
  w.mask_logits.assign(s.mask_logits.begin(), s.mask_logits.end());
  w.mask_gt = s.mask_gt;
  return w;
}

struct GradCheckRow {
  std::string name;
  std::int64_t checked = 0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  int samples = 0;
  double step = 0.0;
  double tolerance = 0.0;
  std::vector<GradCheckRow> rows;  // dL/dp_k, dL/dt, dL/dlogits

  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
  }
};

inline GradCheckReport run_loss_gradcheck(int samples, std::uint64_t seed,
                                          double step = 1e-5, double tol = 1e-4) {
  GradCheckReport report;
  report.samples = samples;
  report.step = step;
  report.tolerance = tol;
  report.rows = {{"dL/dp_k", 0, 0.0, true},
                 {"dL/dt^k", 0, 0.0, true},
                 {"dL/dmask_logits", 0, 0.0, true}};
  const LossWeights w;
  Rng rng(seed);
  const long double h = step;
  auto record = [&](GradCheckRow& row, double analytic, long double numeric) {
    const double err = relative_error(analytic, static_cast<double>(numeric));
    ++row.checked;
    row.max_rel_error = std::max(row.max_rel_error, err);
    if (!(err <= tol)) row.pass = false;
  };
  for (int n = 0; n < samples; ++n) {
    const RoISample<double> s = random_roi_sample(rng);
    const LossGradients<double> g = loss_gradients(s, w);
    RoISample<long double> x = widen(s);

    const int k = s.k_gt;
    record(report.rows[0], g.p[k], central_difference([&](long double v) {
             auto y = x;
             y.p[k] = v;
             return detail::loss_terms(y, w).total;
           }, x.p[k], h));

    if (k >= 1) {
      for (int i = 0; i < 4; ++i) {
        record(report.rows[1], g.t[i], central_difference([&](long double v) {
                 auto y = x;
                 y.t[k - 1][i] = v;
                 return detail::loss_terms(y, w).total;
               }, x.t[k - 1][i], h));
      }
    }
    for (std::size_t i = 0; i < s.mask_logits.size(); ++i) {
      record(report.rows[2], g.mask_logits[i], central_difference([&](long double v) {
               auto y = x;
               y.mask_logits[i] = v;
               return detail::loss_terms(y, w).total;
             }, x.mask_logits[i], h));
    }
  }
  return report;
}

}  // namespace dvscell
