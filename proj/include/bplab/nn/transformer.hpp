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

// Control-point feature sampling, the residual transformer encoder, the
// pointwise offset decoder and the iterative deformation loop.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "bplab/nn/backbone.hpp"

namespace bplab::nn {

struct TransformerConfig {
  int in_dim = 36;
  int encoder_layers = 3;
  int embed_dim = 128;
  int heads = 4;
  int mlp_hidden = 256;
  double max_offset = 16.0;
  int iterations = 3;
  bool decoder_uses_projection = false;  // Conv1x1 reads the projected X instead of raw X
  bool smooth_activation = false;        // SiLU in the decoder, for gradient checks
  std::uint64_t seed = 1;

  void validate() const {
    if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0)
      throw std::invalid_argument("embed_dim must be a positive multiple of heads");
    if (max_offset <= 0) throw std::invalid_argument("max_offset must be positive");
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (encoder_layers < 0 || mlp_hidden <= 0 || in_dim <= 0) throw std::invalid_argument("bad transformer sizes");
  }
};

// ---------------------------------------------------------------------------
// Sampling

/// Bilinear lookup in grid-index coordinates: integer (x, y) hits cell
/// (row y, col x) exactly; coordinates are clamped to [0, w-1] x [0, h-1].
/// grid: B x C x h x w, points: K x N x 2, batch: K indices into B.
/// Returns K x N x C. Differentiable in both grid and points.
inline torch::Tensor bilinear_sample(const torch::Tensor& grid, const torch::Tensor& points,
                                     const torch::Tensor& batch) {
  const int64_t B = grid.size(0), C = grid.size(1), h = grid.size(2), w = grid.size(3);
  const int64_t K = points.size(0), N = points.size(1);
  const torch::Tensor x = points.select(2, 0).clamp(0.0, static_cast<double>(w - 1));
  const torch::Tensor y = points.select(2, 1).clamp(0.0, static_cast<double>(h - 1));
  torch::Tensor x0 = x.detach().floor().clamp(0, std::max<int64_t>(w - 2, 0));
  torch::Tensor y0 = y.detach().floor().clamp(0, std::max<int64_t>(h - 2, 0));
  const torch::Tensor fx = (x - x0).unsqueeze(-1);
  const torch::Tensor fy = (y - y0).unsqueeze(-1);
  const torch::Tensor xi0 = x0.to(torch::kLong), yi0 = y0.to(torch::kLong);
  const torch::Tensor xi1 = (xi0 + 1).clamp_max(w - 1), yi1 = (yi0 + 1).clamp_max(h - 1);

  const torch::Tensor flat = grid.permute({0, 2, 3, 1}).reshape({B * h * w, C});
  const torch::Tensor base = (batch.to(torch::kLong) * (h * w)).view({K, 1});
  auto at = [&](const torch::Tensor& yy, const torch::Tensor& xx) {
    return flat.index_select(0, (base + yy * w + xx).reshape({-1})).view({K, N, C});
  };
  return at(yi0, xi0) * ((1 - fx) * (1 - fy)) + at(yi0, xi1) * (fx * (1 - fy)) + at(yi1, xi0) * ((1 - fx) * fy) +
         at(yi1, xi1) * (fx * fy);
}

/// Single-map convenience: grid C x h x w, points N x 2 -> N x C.
inline torch::Tensor bilinear_sample(const torch::Tensor& grid, const torch::Tensor& points) {
  return bilinear_sample(grid.unsqueeze(0), points.unsqueeze(0), torch::zeros({1}, torch::kLong)).squeeze(0);
}

/// Image coordinates (pixel centers at +0.5) to grid-index coordinates.
inline torch::Tensor image_to_grid(const torch::Tensor& points, double stride) { return points / stride - 0.5; }

/// K x N x 36 control-point features: 32 shared channels then cls, dist and a
/// unit (or zero) direction.
inline torch::Tensor build_features(const FeatureMaps& maps, const torch::Tensor& points, const torch::Tensor& batch) {
  const torch::Tensor g = image_to_grid(points, maps.stride);
  const torch::Tensor fs = bilinear_sample(maps.shared, g, batch);
  const torch::Tensor fp = bilinear_sample(maps.prior, g, batch);
  const torch::Tensor dir = fp.narrow(2, 2, 2);
  const torch::Tensor n = dir.norm(2, 2, true);
  const torch::Tensor unit = torch::where(n > 1e-12, dir / n.clamp_min(1e-12), torch::zeros_like(dir));
  return torch::cat({fs, fp.narrow(2, 0, 2), unit}, 2);
}

// ---------------------------------------------------------------------------
// Encoder

class SelfAttentionImpl : public torch::nn::Module {
 public:
  SelfAttentionImpl(int dim, int heads) : heads_(heads) {
    qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
    out_ = register_module("out", torch::nn::Linear(dim, dim));
  }

  /// x: B x N x D. Stores the B x heads x N x N attention weights.
  torch::Tensor forward(const torch::Tensor& x) {
    const int64_t B = x.size(0), N = x.size(1), D = x.size(2), dh = D / heads_;
    auto qkv = qkv_->forward(x).view({B, N, 3, heads_, dh}).permute({2, 0, 3, 1, 4});
    const torch::Tensor q = qkv[0], k = qkv[1], v = qkv[2];
    attention = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh)), -1);
    const torch::Tensor ctx = torch::matmul(attention, v).permute({0, 2, 1, 3}).reshape({B, N, D});
    return out_->forward(ctx);
  }

  torch::Tensor attention;

 private:
  int heads_;
  torch::nn::Linear qkv_{nullptr}, out_{nullptr};
};
TORCH_MODULE(SelfAttention);

/// Pre-norm residual block: y = x + MHSA(LN x); out = y + MLP(LN y).
class TransBlockImpl : public torch::nn::Module {
 public:
  TransBlockImpl(int dim, int heads, int hidden) {
    ln1_ = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    attn_ = register_module("attn", SelfAttention(dim, heads));
    ln2_ = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    fc1_ = register_module("fc1", torch::nn::Linear(dim, hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, dim));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    const torch::Tensor y = x + attn_->forward(ln1_->forward(x));
    return y + fc2_->forward(torch::gelu(fc1_->forward(ln2_->forward(y))));
  }

  [[nodiscard]] torch::Tensor attention() const { return attn_->attention; }

 private:
  torch::nn::LayerNorm ln1_{nullptr}, ln2_{nullptr};
  SelfAttention attn_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(TransBlock);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const TransformerConfig& cfg) {
    proj_ = register_module("proj", torch::nn::Linear(cfg.in_dim, cfg.embed_dim));
    for (int i = 0; i < cfg.encoder_layers; ++i)
      blocks_.push_back(register_module("block" + std::to_string(i), TransBlock(cfg.embed_dim, cfg.heads, cfg.mlp_hidden)));
  }

  torch::Tensor project(const torch::Tensor& x) { return proj_->forward(x); }

  torch::Tensor forward(const torch::Tensor& x) {
    torch::Tensor h = project(x);
    for (auto& b : blocks_) h = b->forward(h);
    return h;
  }

  [[nodiscard]] const std::vector<TransBlock>& blocks() const { return blocks_; }

 private:
  torch::nn::Linear proj_{nullptr};
  std::vector<TransBlock> blocks_;
};
TORCH_MODULE(Encoder);

// ---------------------------------------------------------------------------
// Decoder

/// Y = MLP(ReLU(Conv1x1(X)) || X'''), applied independently per point.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const TransformerConfig& cfg) : smooth_(cfg.smooth_activation) {
    const int in = cfg.decoder_uses_projection ? cfg.embed_dim : cfg.in_dim;
    conv_ = register_module("conv1x1", torch::nn::Linear(in, cfg.embed_dim));
    fc1_ = register_module("fc1", torch::nn::Linear(2 * cfg.embed_dim, 128));
    fc2_ = register_module("fc2", torch::nn::Linear(128, 64));
    fc3_ = register_module("fc3", torch::nn::Linear(64, 2));
  }

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& encoded) {
    const torch::Tensor h = torch::cat({act(conv_->forward(x)), encoded}, -1);
    return fc3_->forward(act(fc2_->forward(act(fc1_->forward(h)))));
  }

  torch::nn::Linear& last() { return fc3_; }

 private:
  torch::Tensor act(const torch::Tensor& t) const { return smooth_ ? torch::silu(t) : torch::relu(t); }

  bool smooth_;
  torch::nn::Linear conv_{nullptr}, fc1_{nullptr}, fc2_{nullptr}, fc3_{nullptr};
};
TORCH_MODULE(Decoder);

/// Rescales each row so its L2 norm is at most `max_norm`; directions are kept.
inline torch::Tensor clamp_offsets(const torch::Tensor& y, double max_norm) {
  const torch::Tensor n = y.norm(2, -1, true);
  const torch::Tensor scale = (max_norm / n.clamp_min(1e-12)).clamp_max(1.0);
  return y * scale;
}

class BoundaryTransformerImpl : public torch::nn::Module {
 public:
  explicit BoundaryTransformerImpl(const TransformerConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    encoder_ = register_module("encoder", Encoder(cfg_));
    decoder_ = register_module("decoder", Decoder(cfg_));
    init_parameters(cfg_.seed);
  }

  /// Xavier-uniform weights, zero biases, unit LayerNorm scales.
  void init_parameters(std::uint64_t seed) {
    torch::NoGradGuard guard;
    auto gen = at::detail::createCPUGenerator(seed);
    for (auto& p : named_parameters()) {
      auto& t = p.value();
      const std::string& key = p.key();
      if (t.dim() == 1) {
        if (key.find(".ln") != std::string::npos && key.ends_with("weight"))
          t.fill_(1.0);
        else
          t.zero_();
        continue;
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(t.size(0) + t.size(1)));
      t.uniform_(-bound, bound, gen);
    }
    decoder_->last()->weight.mul_(0.1);
  }

  [[nodiscard]] const TransformerConfig& config() const { return cfg_; }

  /// Raw per-vertex offsets for K x N x in_dim features.
  torch::Tensor forward(const torch::Tensor& x) {
    const torch::Tensor enc = encoder_->forward(x);
    return decoder_->forward(cfg_.decoder_uses_projection ? encoder_->project(x) : x, enc);
  }

  Encoder& encoder() { return encoder_; }
  Decoder& decoder() { return decoder_; }

 private:
  TransformerConfig cfg_;
  Encoder encoder_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(BoundaryTransformer);

struct Refinement {
  std::vector<torch::Tensor> polygons;  // m tensors, K x N x 2 image coordinates
  std::vector<torch::Tensor> offsets;   // clamped offsets per iteration
};

/// P^k = P^{k-1} + clamp(Y(P^{k-1})), features re-sampled from the same maps at
/// detached points each iteration, points kept inside [0, W] x [0, H].
inline Refinement refine_iteratively(BoundaryTransformer& model, const FeatureMaps& maps, const torch::Tensor& proposals,
                                     const torch::Tensor& batch, int iterations, double image_w, double image_h) {
  if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  Refinement out;
  torch::Tensor cur = proposals;
  for (int k = 0; k < iterations; ++k) {
    const torch::Tensor anchor = cur.detach();
    const torch::Tensor y = clamp_offsets(model->forward(build_features(maps, anchor, batch)), model->config().max_offset);
    torch::Tensor next = anchor + y;
    next = torch::stack({next.select(2, 0).clamp(0.0, image_w), next.select(2, 1).clamp(0.0, image_h)}, 2);
    out.offsets.push_back(y);
    out.polygons.push_back(next);
    cur = next;
  }
  return out;
}

}  // namespace bplab::nn
