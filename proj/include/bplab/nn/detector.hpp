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

// Backbone plus boundary transformer, built from a RunConfig, and the
// single-image inference path (letterbox, proposals, iterative refinement).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "bplab/config.hpp"
#include "bplab/grid.hpp"
#include "bplab/nn/backbone.hpp"
#include "bplab/nn/checkpoint.hpp"
#include "bplab/nn/losses.hpp"
#include "bplab/nn/transformer.hpp"
#include "bplab/polygon_io.hpp"
#include "bplab/proposal.hpp"
#include "bplab/random.hpp"

namespace bplab::nn {

inline BackboneConfig backbone_config(const RunConfig& c) {
  BackboneConfig b;
  b.stem_channels = c.stem_channels;
  b.levels = c.levels;
  b.max_channels = c.max_channels;
  b.head_channels = c.head_channels;
  b.output_stride = c.output_stride;
  b.seed = Rng::mix(c.seed, 1);
  return b;
}

inline TransformerConfig transformer_config(const RunConfig& c) {
  TransformerConfig t;
  t.encoder_layers = c.encoder_layers;
  t.embed_dim = c.embed_dim;
  t.heads = c.heads;
  t.mlp_hidden = c.mlp_hidden;
  t.max_offset = c.max_offset;
  t.iterations = c.iterations;
  t.decoder_uses_projection = c.decoder_uses_projection;
  t.seed = Rng::mix(c.seed, 2);
  return t;
}

inline LossWeights loss_weights(const RunConfig& c) {
  LossWeights w;
  w.lambda = c.lambda;
  w.alpha = c.alpha;
  w.beta = c.beta;
  w.ohem_ratio = c.ohem_ratio;
  w.ohem_floor = c.ohem_floor;
  w.dir_background_weight = c.dir_background_weight;
  w.dir_background_as_segment = c.dir_background_as_segment;
  w.dir_normalize_weights = c.dir_normalize_weights;
  w.smooth_l1_delta = c.smooth_l1_delta;
  w.eps_epochs = std::max(c.epochs, 1);
  w.invert_schedule = c.invert_schedule;
  w.use_energy = c.use_energy;
  return w;
}

class DetectorImpl : public torch::nn::Module {
 public:
  explicit DetectorImpl(const RunConfig& cfg) : cfg_(cfg) {
    backbone = register_module("backbone", Backbone(backbone_config(cfg)));
    transformer = register_module("transformer", BoundaryTransformer(transformer_config(cfg)));
  }

  [[nodiscard]] const RunConfig& config() const { return cfg_; }

  Backbone backbone{nullptr};
  BoundaryTransformer transformer{nullptr};

 private:
  RunConfig cfg_;
};
TORCH_MODULE(Detector);

/// Rebuilds a detector from a checkpoint's embedded configuration.
inline Detector load_detector(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  Detector det(parse_config_text(ck.config));
  load_module_state(*det, ck.tensors);
  det->eval();
  return det;
}

inline Grid<double> to_grid(const torch::Tensor& t) {
  const torch::Tensor a = t.detach().to(torch::kFloat64).contiguous();
  Grid<double> g(static_cast<int>(a.size(0)), static_cast<int>(a.size(1)));
  std::copy_n(a.data_ptr<double>(), g.size(), g.data());
  return g;
}

inline torch::Tensor polygons_to_tensor(const std::vector<Polygon>& polys, int n_points) {
  torch::Tensor t = torch::empty({static_cast<int64_t>(polys.size()), n_points, 2}, torch::kFloat32);
  auto a = t.accessor<float, 3>();
  for (std::size_t k = 0; k < polys.size(); ++k)
    for (int i = 0; i < n_points; ++i) {
      a[k][i][0] = static_cast<float>(polys[k][i].x);
      a[k][i][1] = static_cast<float>(polys[k][i].y);
    }
  return t;
}

inline std::vector<Polygon> tensor_to_polygons(const torch::Tensor& t, double scale = 1.0) {
  const torch::Tensor a = t.detach().to(torch::kFloat64).contiguous();
  std::vector<Polygon> out(static_cast<std::size_t>(a.size(0)));
  auto acc = a.accessor<double, 3>();
  for (int64_t k = 0; k < a.size(0); ++k)
    for (int64_t i = 0; i < a.size(1); ++i) out[k].push_back({acc[k][i][0] * scale, acc[k][i][1] * scale});
  return out;
}

/// Scales the longer side to `size` and pads bottom/right to size x size.
inline cv::Mat letterbox(const cv::Mat& img, int size, double& scale) {
  scale = static_cast<double>(size) / std::max(img.rows, img.cols);
  cv::Mat resized;
  if (img.rows == size && img.cols == size) {
    resized = img;
  } else {
    const int w = std::clamp(static_cast<int>(std::lround(img.cols * scale)), 1, size);
    const int h = std::clamp(static_cast<int>(std::lround(img.rows * scale)), 1, size);
    cv::resize(img, resized, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
  }
  cv::Mat out(size, size, CV_8UC3, cv::Scalar(0, 0, 0));
  resized.copyTo(out(cv::Rect(0, 0, resized.cols, resized.rows)));
  return out;
}

struct DetectionTrace {
  std::vector<BoundaryProposal> proposals;      // letterbox coordinates
  std::vector<std::vector<Polygon>> iterations;  // [k][proposal], original image coordinates
  std::vector<Polygon> proposal_polygons;       // original image coordinates
  double scale = 1.0;
  FeatureMaps maps;
};

/// Full inference on one BGR image. `iterations` may differ from training.
inline DetectionTrace detect_image(Detector& det, const cv::Mat& bgr, const Thresholds& th, int iterations,
                                   int n_points = -1) {
  torch::NoGradGuard guard;
  const RunConfig& cfg = det->config();
  if (n_points <= 0) n_points = cfg.n_control_points;
  DetectionTrace tr;
  const cv::Mat boxed = letterbox(bgr, cfg.image_size, tr.scale);
  const cv::Mat cont = boxed.isContinuous() ? boxed : boxed.clone();
  tr.maps = det->backbone->forward(image_to_tensor(cont.data, cont.rows, cont.cols));
  const double stride = tr.maps.stride;
  tr.proposals = generate_proposals(to_grid(tr.maps.prior[0][1]), to_grid(tr.maps.prior[0][0]), th, n_points, stride);

  const double inv = 1.0 / tr.scale;
  auto back = [&](std::vector<Polygon> polys) {
    for (auto& p : polys)
      for (auto& q : p) q = {std::clamp(q.x * inv, 0.0, static_cast<double>(bgr.cols)),
                             std::clamp(q.y * inv, 0.0, static_cast<double>(bgr.rows))};
    return polys;
  };
  std::vector<Polygon> start;
  for (const auto& p : tr.proposals) start.push_back(p.points);
  tr.proposal_polygons = back(start);
  if (start.empty()) {
    tr.iterations.assign(static_cast<std::size_t>(iterations), {});
    return tr;
  }
  const torch::Tensor p0 = polygons_to_tensor(start, n_points);
  const torch::Tensor batch = torch::zeros({p0.size(0)}, torch::kLong);
  const Refinement ref = refine_iteratively(det->transformer, tr.maps, p0, batch, iterations, cfg.image_size,
                                            cfg.image_size);
  for (const auto& p : ref.polygons) tr.iterations.push_back(back(tensor_to_polygons(p)));
  return tr;
}

/// Polygons after iteration `k` (0 means the proposals) with proposal scores.
inline std::vector<ScoredPolygon> detections_at(const DetectionTrace& tr, int k) {
  std::vector<ScoredPolygon> out;
  const std::vector<Polygon>& polys = k == 0 ? tr.proposal_polygons : tr.iterations[static_cast<std::size_t>(k - 1)];
  for (std::size_t i = 0; i < polys.size(); ++i) out.push_back({polys[i], tr.proposals[i].score});
  return out;
}

}  // namespace bplab::nn
