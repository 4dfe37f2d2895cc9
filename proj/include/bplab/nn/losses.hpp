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

// Training objectives: field losses (classification, OHEM distance,
// direction), cyclic point matching, boundary energy and the schedule that
// combines them.

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

#include <torch/torch.h>

#include "bplab/nn/transformer.hpp"

namespace bplab::nn {

struct LossWeights {
  double lambda = 0.1;
  double alpha = 3.0;
  double beta = 0.5;
  double ohem_ratio = 3.0;
  int ohem_floor = 192;           // negatives kept when an image has no positives
  double dir_background_weight = 1.0;
  bool dir_background_as_segment = false;
  bool dir_normalize_weights = false;
  double smooth_l1_delta = 1.0;
  int eps_epochs = 1;
  bool invert_schedule = false;
  bool use_energy = true;

  void validate() const {
    if (lambda <= 0 || alpha <= 0 || beta <= 0 || ohem_ratio <= 0) throw std::invalid_argument("loss weights must be positive");
    if (eps_epochs <= 0) throw std::invalid_argument("eps_epochs must be positive");
    if (dir_background_weight < 0 || smooth_l1_delta <= 0) throw std::invalid_argument("bad loss parameters");
  }
};

/// Weight on L_BT at epoch i: lambda / (1 + exp((i - eps) / eps)).
inline double schedule_coefficient(const LossWeights& w, double epoch) {
  const double z = (epoch - w.eps_epochs) / static_cast<double>(w.eps_epochs);
  return w.lambda / (1.0 + std::exp(w.invert_schedule ? -z : z));
}

/// Mean binary cross-entropy over non-ignored pixels. pred holds probabilities.
inline torch::Tensor loss_cls(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& ignore) {
  const torch::Tensor keep = ignore.logical_not();
  const auto n = keep.sum().item<int64_t>();
  if (n == 0) {
    std::cerr << "warning: every pixel is ignored; classification loss set to 0\n";
    return pred.sum() * 0.0;
  }
  const torch::Tensor p = pred.clamp(1e-7, 1.0 - 1e-7);
  const torch::Tensor ce = -(gt * torch::log(p) + (1 - gt) * torch::log(1 - p));
  return (ce * keep).sum() / static_cast<double>(n);
}

/// Squared error over positives plus the k hardest negatives (k = ratio x
/// positives, or `floor` when there are none), averaged over the selection.
/// Computed per image and averaged over the batch. Inputs are B x h x w.
inline torch::Tensor loss_dist(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& cls,
                               const torch::Tensor& ignore, double ratio = 3.0, int floor = 192) {
  const int64_t B = pred.size(0);
  torch::Tensor total = pred.sum() * 0.0;
  for (int64_t b = 0; b < B; ++b) {
    const torch::Tensor err = (pred[b] - gt[b]).pow(2).reshape({-1});
    const torch::Tensor keep = ignore[b].logical_not().reshape({-1});
    const torch::Tensor pos = (cls[b].reshape({-1}) > 0.5).logical_and(keep);
    const torch::Tensor neg = (cls[b].reshape({-1}) <= 0.5).logical_and(keep);
    const auto n_pos = pos.sum().item<int64_t>();
    const auto n_neg = neg.sum().item<int64_t>();
    int64_t k = n_pos > 0 ? static_cast<int64_t>(std::llround(ratio * static_cast<double>(n_pos))) : floor;
    k = std::min(k, n_neg);
    if (n_pos + k == 0) continue;
    torch::Tensor sel = err.masked_select(pos).sum();
    if (k > 0) sel = sel + std::get<0>(err.masked_select(neg).topk(k)).sum();
    total = total + sel / static_cast<double>(n_pos + k);
  }
  return total / static_cast<double>(B);
}

/// Per-pixel weights for the direction loss: 1/sqrt(instance size) on text,
/// `background` elsewhere, 0 on ignored pixels. With `background_as_segment`
/// the background is weighted like one more segment, 1/sqrt(its size).
/// labels: h x w int64.
inline torch::Tensor direction_weights(const torch::Tensor& labels, const torch::Tensor& ignore, double background,
                                       bool background_as_segment = false) {
  const torch::Tensor flat = labels.reshape({-1}).to(torch::kLong);
  const torch::Tensor counts = torch::bincount(flat).to(torch::kDouble);
  torch::Tensor w = counts.index_select(0, flat).clamp_min(1.0).rsqrt();
  if (!background_as_segment) w = torch::where(flat > 0, w, torch::full_like(w, background));
  w = w * ignore.reshape({-1}).logical_not();
  return w.view(labels.sizes());
}

/// Sum of w(p) |V_p - V^_p|^2 plus the mean angle term (1 - cos) over text
/// pixels with a non-zero target. A zero-length prediction counts as 1.
/// `normalize_weights` rescales w to sum to one per image.
/// pred, gt: B x 2 x h x w; labels, ignore: B x h x w.
inline torch::Tensor loss_dir(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& labels,
                              const torch::Tensor& ignore, double background = 1.0,
                              bool background_as_segment = false, bool normalize_weights = false) {
  const int64_t B = pred.size(0);
  torch::Tensor total = pred.sum() * 0.0;
  for (int64_t b = 0; b < B; ++b) {
    torch::Tensor w = direction_weights(labels[b], ignore[b], background, background_as_segment).to(pred.dtype());
    if (normalize_weights) w = w / w.sum().clamp_min(1e-12);
    const torch::Tensor diff = (pred[b] - gt[b]).pow(2).sum(0);
    total = total + (w * diff).sum();

    const torch::Tensor pn = pred[b].norm(2, 0);
    const torch::Tensor gn = gt[b].norm(2, 0);
    const torch::Tensor text = (labels[b] > 0).logical_and(ignore[b].logical_not()).logical_and(gn > 1e-12);
    const auto n = text.sum().item<int64_t>();
    if (n == 0) continue;
    const torch::Tensor dotp = (pred[b] * gt[b]).sum(0);
    const torch::Tensor cosv = torch::where(pn > 1e-12, dotp / (pn.clamp_min(1e-12) * gn.clamp_min(1e-12)),
                                            torch::zeros_like(dotp));
    total = total + ((1 - cosv) * text).sum() / static_cast<double>(n);
  }
  return total / static_cast<double>(B);
}

inline torch::Tensor smooth_l1(const torch::Tensor& d, double delta) {
  const torch::Tensor a = d.abs();
  return torch::where(a < delta, 0.5 * d * d / delta, a - 0.5 * delta);
}

/// Per-instance matching loss: min over cyclic shifts j of
/// (1/N) sum_i smoothL1(p_i - q_{(i+j) % N}) summed over x and y.
/// p, q: K x N x 2. Returns K values.
inline torch::Tensor match_per_instance(const torch::Tensor& p, const torch::Tensor& q, double delta = 1.0) {
  if (p.sizes() != q.sizes()) throw std::invalid_argument("loss_match: point sets differ in size");
  const int64_t N = p.size(1);
  const torch::Tensor i = torch::arange(N).view({1, N});
  const torch::Tensor j = torch::arange(N).view({N, 1});
  const torch::Tensor idx = ((i + j) % N).reshape({-1});                     // shift-major
  const torch::Tensor shifted = q.index_select(1, idx).view({q.size(0), N, N, 2});  // K x shift x N x 2
  const torch::Tensor cost = smooth_l1(p.unsqueeze(1) - shifted, delta).sum(-1).mean(-1);  // K x shift
  return std::get<0>(cost.min(1));
}

inline torch::Tensor loss_match(const torch::Tensor& p, const torch::Tensor& q, double delta = 1.0) {
  if (p.size(0) == 0) return p.sum() * 0.0;
  return match_per_instance(p, q, delta).mean();
}

/// E(P) = sum of bilinearly sampled distance values at the control points.
/// points: K x N x 2 image coordinates; dist: B x h x w at `stride`.
inline torch::Tensor boundary_energy(const torch::Tensor& points, const torch::Tensor& dist, const torch::Tensor& batch,
                                     double stride) {
  const torch::Tensor v = bilinear_sample(dist.unsqueeze(1), image_to_grid(points, stride), batch);
  return v.sum({1, 2});
}

struct EnergyTerms {
  torch::Tensor be;  // mean current energy
  torch::Tensor ie;  // mean hinge on energy increase
};

inline EnergyTerms loss_energy(const torch::Tensor& current, const torch::Tensor& previous) {
  return {current.mean(), torch::relu(current - previous).mean()};
}

struct BoundaryLoss {
  torch::Tensor total;  // L_BT
  torch::Tensor match;  // mean over iterations of L_P
  torch::Tensor be;     // mean over iterations of L_be
  torch::Tensor ie;     // mean over iterations of L_ie
  std::vector<double> mean_energy;  // E(P^0) ... E(P^m), averaged over instances
};

/// (1/m) sum_i (L_E(i) + L_P(i)); the energy part is skipped when
/// `use_energy` is false. proposals are P^0, targets the resampled GT points.
inline BoundaryLoss loss_bt(const std::vector<torch::Tensor>& polygons, const torch::Tensor& proposals,
                            const torch::Tensor& targets, const torch::Tensor& dist, const torch::Tensor& batch,
                            double stride, bool use_energy = true, double delta = 1.0) {
  if (polygons.empty()) throw std::invalid_argument("loss_bt needs at least one iteration");
  BoundaryLoss out;
  const double m = static_cast<double>(polygons.size());
  torch::Tensor zero = proposals.sum() * 0.0;
  out.match = zero;
  out.be = zero;
  out.ie = zero;
  torch::Tensor prev = boundary_energy(proposals, dist, batch, stride);
  out.mean_energy.push_back(prev.numel() ? prev.mean().item<double>() : 0.0);
  for (const auto& poly : polygons) {
    const torch::Tensor e = boundary_energy(poly, dist, batch, stride);
    out.match = out.match + loss_match(poly, targets, delta);
    if (poly.size(0) > 0) {
      const EnergyTerms t = loss_energy(e, prev);
      out.be = out.be + t.be;
      out.ie = out.ie + t.ie;
    }
    out.mean_energy.push_back(e.numel() ? e.mean().item<double>() : 0.0);
    prev = e;
  }
  out.match = out.match / m;
  out.be = out.be / m;
  out.ie = out.ie / m;
  out.total = use_energy ? out.match + out.be + out.ie : out.match;
  return out;
}

/// L_BP = L_cls + alpha L_D + beta L_V.
inline torch::Tensor prior_loss(const torch::Tensor& cls, const torch::Tensor& dist, const torch::Tensor& dir,
                                const LossWeights& w) {
  return cls + w.alpha * dist + w.beta * dir;
}

inline torch::Tensor total_loss(const torch::Tensor& l_bp, const torch::Tensor& l_bt, const LossWeights& w,
                                double epoch) {
  return l_bp + schedule_coefficient(w, epoch) * l_bt;
}

}  // namespace bplab::nn
