/*
 * Copyright (C) 2026 The bplab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Finite-difference gradient checking for double-precision torch graphs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <torch/torch.h>

#include "bplab/random.hpp"

namespace bplab::testing {

struct GradProbe {
  torch::Tensor tensor;  // leaf with requires_grad
  int64_t index = 0;     // flat element index
};

/// Worst relative error between autograd and central differences over the
/// probes. Pairs where both magnitudes fall below `floor` are skipped.
inline double max_relative_grad_error(const std::function<torch::Tensor()>& f, const std::vector<GradProbe>& probes,
                                      double h = 1e-6, double floor = 1e-7) {
  for (const auto& p : probes)
    if (p.tensor.grad().defined()) p.tensor.grad().zero_();
  f().backward();
  double worst = 0.0;
  for (const auto& p : probes) {
    const double analytic = p.tensor.grad().reshape({-1})[p.index].item<double>();
    double numeric = 0.0;
    {
      torch::NoGradGuard guard;
      auto flat = p.tensor.view({-1});
      const double orig = flat[p.index].item<double>();
      flat[p.index] = orig + h;
      const double up = f().item<double>();
      flat[p.index] = orig - h;
      const double down = f().item<double>();
      flat[p.index] = orig;
      numeric = (up - down) / (2 * h);
    }
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < floor) continue;
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

/// `count` random (parameter, element) probes drawn with a fixed seed.
inline std::vector<GradProbe> random_probes(const std::vector<torch::Tensor>& params, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradProbe> out;
  for (int i = 0; i < count; ++i) {
    const auto& t = params[rng.uniform_int(0, static_cast<int>(params.size()) - 1)];
    out.push_back({t, rng.uniform_int(0, static_cast<int>(t.numel()) - 1)});
  }
  return out;
}

}  // namespace bplab::testing
