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

// Multi-level feature fusion network producing the 32-channel shared map and
// the 4-channel prior map (text probability, distance, direction x/y).

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace bplab::nn {

struct BackboneConfig {
  int stem_channels = 16;
  int levels = 4;
  int shared_channels = 32;
  int max_channels = 64;
  int head_channels = 16;
  int output_stride = 2;
  bool smooth_activation = false;  // SiLU instead of ReLU, for gradient checks
  std::uint64_t seed = 0;

  void validate() const {
    if (shared_channels != 32) throw std::invalid_argument("shared_channels must be 32");
    if (output_stride != 1 && output_stride != 2 && output_stride != 4)
      throw std::invalid_argument("output_stride must be 1, 2 or 4");
    if (levels < 2 || levels > 6) throw std::invalid_argument("levels must lie in [2, 6]");
    if (output_stride == 4 && levels < 2) throw std::invalid_argument("stride 4 needs at least two levels");
    if (stem_channels <= 0 || max_channels < stem_channels || head_channels <= 0)
      throw std::invalid_argument("bad channel widths");
  }

  /// Channels of pyramid level k (k = 0 sits at stride 2).
  [[nodiscard]] int level_channels(int k) const { return std::min(stem_channels << k, max_channels); }

  /// Finest pyramid level merged into the shared map (level k sits at stride 2^(k+1)).
  [[nodiscard]] int target_level() const { return output_stride == 4 ? 1 : 0; }

  [[nodiscard]] int input_multiple() const { return 1 << levels; }
};

/// Hand-computed parameter count of the configured layers.
inline std::int64_t analytic_parameter_count(const BackboneConfig& cfg) {
  auto conv = [](std::int64_t k, std::int64_t cin, std::int64_t cout) { return k * k * cin * cout + cout; };
  const int s = cfg.shared_channels;
  std::int64_t n = 0;
  int prev = 3;
  for (int k = 0; k < cfg.levels; ++k) {
    const int c = cfg.level_channels(k);
    n += conv(3, prev, c) + 2 * conv(3, c, c);
    prev = c;
  }
  for (int k = cfg.target_level(); k < cfg.levels; ++k) n += conv(1, cfg.level_channels(k), s);
  n += conv(3, s, s);                          // fused-map smoothing
  n += conv(3, s, cfg.head_channels) + conv(3, cfg.head_channels, cfg.head_channels) +
       conv(1, cfg.head_channels, 4);  // prior head
  return n;
}

struct FeatureMaps {
  torch::Tensor shared;  // B x 32 x h x w
  torch::Tensor prior;   // B x 4 x h x w: cls prob, dist, dir x, dir y
  int stride = 1;
};

namespace detail {

inline torch::nn::Conv2d conv(int cin, int cout, int k, int stride = 1, int dilation = 1) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(cin, cout, k).stride(stride).padding(dilation * (k / 2)).dilation(dilation));
}

}  // namespace detail

class BackboneImpl : public torch::nn::Module {
 public:
  explicit BackboneImpl(const BackboneConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    int prev = 3;
    for (int k = 0; k < cfg_.levels; ++k) {
      const int c = cfg_.level_channels(k);
      const std::string id = std::to_string(k);
      down_.push_back(register_module("down" + id, detail::conv(prev, c, 3, 2)));
      res_a_.push_back(register_module("res" + id + "a", detail::conv(c, c, 3)));
      res_b_.push_back(register_module("res" + id + "b", detail::conv(c, c, 3)));
      prev = c;
    }
    const int s = cfg_.shared_channels;
    for (int k = cfg_.target_level(); k < cfg_.levels; ++k)
      lateral_.push_back(
          register_module("lateral" + std::to_string(k), detail::conv(cfg_.level_channels(k), s, 1)));
    smooth_ = register_module("smooth", detail::conv(s, s, 3));
    const int hc = cfg_.head_channels;
    head_a_ = register_module("head_a", detail::conv(s, hc, 3, 1, 1));
    head_b_ = register_module("head_b", detail::conv(hc, hc, 3, 1, 2));
    head_out_ = register_module("head_out", detail::conv(hc, 4, 1));
    init_parameters(cfg_.seed);
  }

  /// Deterministic re-initialization: Kaiming-uniform weights, zero biases.
  void init_parameters(std::uint64_t seed) {
    torch::NoGradGuard guard;
    auto gen = at::detail::createCPUGenerator(seed);
    for (auto& p : named_parameters()) {
      auto& t = p.value();
      if (t.dim() == 1) {
        t.zero_();
        continue;
      }
      const double fan_in = static_cast<double>(t.numel() / t.size(0));
      const double bound = std::sqrt(6.0 / fan_in);
      t.uniform_(-bound, bound, gen);
    }
    // Start the prior head near a neutral output.
    head_out_->weight.mul_(0.1);
  }

  [[nodiscard]] const BackboneConfig& config() const { return cfg_; }

  FeatureMaps forward(const torch::Tensor& image) {
    TORCH_CHECK(image.dim() == 4 && image.size(1) == 3, "expected B x 3 x H x W input");
    const int64_t h = image.size(2), w = image.size(3);
    const int64_t m = cfg_.input_multiple();
    const int64_t ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
    torch::Tensor x = image;
    if (ph != h || pw != w) x = torch::nn::functional::pad(x, torch::nn::functional::PadFuncOptions({0, pw - w, 0, ph - h}));

    std::vector<torch::Tensor> feats;
    torch::Tensor cur = x;
    for (int k = 0; k < cfg_.levels; ++k) {
      cur = act(down_[k]->forward(cur));
      cur = act(cur + res_b_[k]->forward(act(res_a_[k]->forward(cur))));
      feats.push_back(cur);
    }
    const int t0 = cfg_.target_level();
    torch::Tensor p = lateral_.back()->forward(feats.back());
    for (int k = cfg_.levels - 2; k >= t0; --k) p = up2(p) + lateral_[k - t0]->forward(feats[k]);
    if (cfg_.output_stride == 1) p = up2(p);
    torch::Tensor shared = act(smooth_->forward(p));
    torch::Tensor raw = head_out_->forward(act(head_b_->forward(act(head_a_->forward(shared)))));

    const int s = cfg_.output_stride;
    const int64_t oh = (h + s - 1) / s, ow = (w + s - 1) / s;
    using torch::indexing::Slice;
    shared = shared.index({Slice(), Slice(), Slice(0, oh), Slice(0, ow)});
    raw = raw.index({Slice(), Slice(), Slice(0, oh), Slice(0, ow)});
    torch::Tensor prior = torch::cat({torch::sigmoid(raw.narrow(1, 0, 1)), raw.narrow(1, 1, 3)}, 1);
    return {shared, prior, s};
  }

 private:
  torch::Tensor act(const torch::Tensor& x) const { return cfg_.smooth_activation ? torch::silu(x) : torch::relu(x); }

  static torch::Tensor up2(const torch::Tensor& x) {
    return torch::nn::functional::interpolate(
        x, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{x.size(2) * 2, x.size(3) * 2})
               .mode(torch::kBilinear)
               .align_corners(false));
  }

  BackboneConfig cfg_;
  torch::nn::Conv2d smooth_{nullptr};
  torch::nn::Conv2d head_a_{nullptr}, head_b_{nullptr}, head_out_{nullptr};
  std::vector<torch::nn::Conv2d> down_, res_a_, res_b_, lateral_;
};
TORCH_MODULE(Backbone);

inline std::int64_t parameter_count(torch::nn::Module& m) {
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

/// uint8 BGR image (H x W x 3) to a normalized 1 x 3 x H x W float tensor.
inline torch::Tensor image_to_tensor(const std::uint8_t* data, int rows, int cols) {
  torch::Tensor t = torch::from_blob(const_cast<std::uint8_t*>(data), {rows, cols, 3}, torch::kUInt8)
                        .to(torch::kFloat32)
                        .permute({2, 0, 1})
                        .unsqueeze(0)
                        .contiguous();
  return (t / 255.0 - 0.5) / 0.25;
}

}  // namespace bplab::nn
