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

// Training loop, dataset loading and dataset-level evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <torch/torch.h>

#include "bplab/config.hpp"
#include "bplab/eval.hpp"
#include "bplab/nn/detector.hpp"
#include "bplab/prior_fields.hpp"
#include "bplab/proposal.hpp"
#include "bplab/synth.hpp"

namespace bplab {

namespace fs = std::filesystem;

struct Sample {
  std::string id;
  cv::Mat image;  // BGR
  std::vector<PolygonAnnotation> annotations;
};

/// Ids of `images/*.png`, sorted.
inline std::vector<std::string> list_image_ids(const fs::path& images_dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(images_dir)) throw std::runtime_error("missing image directory " + images_dir.string());
  for (const auto& e : fs::directory_iterator(images_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Loads `dir/images/{id}.png` with `dir/gts/{id}.txt`. A missing or
/// unreadable file is an error naming the file.
inline std::vector<Sample> load_dataset(const fs::path& dir, int max_images = 0) {
  std::vector<std::string> ids = list_image_ids(dir / "images");
  if (max_images > 0 && static_cast<int>(ids.size()) > max_images) ids.resize(static_cast<std::size_t>(max_images));
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    Sample s;
    s.id = id;
    const fs::path img = dir / "images" / (id + ".png");
    s.image = cv::imread(img.string(), cv::IMREAD_COLOR);
    if (s.image.empty()) throw std::runtime_error("unreadable image " + img.string());
    const fs::path gt = dir / "gts" / (id + ".txt");
    if (!fs::exists(gt)) throw std::runtime_error("missing ground truth " + gt.string());
    s.annotations = read_gt_file(gt.string());
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-sample training targets

struct PreparedSample {
  cv::Mat image;
  std::vector<PolygonAnnotation> annotations;
  FieldTargets targets;                 // at the output stride
  std::vector<int> care;                // indices of care annotations with usable targets
  std::vector<Polygon> target_points;   // N resampled points per entry of `care`
  std::vector<Polygon> fallback;        // proposal from GT fields per entry of `care` (may be empty)
};

inline PreparedSample prepare_sample(const Sample& s, const RunConfig& cfg, std::uint64_t aug_seed) {
  PreparedSample p;
  if (cfg.augment) {
    AugmentConfig ac;
    ac.out_size = cfg.image_size;
    std::tie(p.image, p.annotations) = augment(s.image, s.annotations, aug_seed, ac);
  } else {
    double scale = 1.0;
    p.image = nn::letterbox(s.image, cfg.image_size, scale);
    p.annotations = s.annotations;
    for (auto& a : p.annotations)
      for (auto& q : a.vertices) q = scale * q;
  }
  const int s_out = cfg.output_stride;
  const Size2 grid{(cfg.image_size + s_out - 1) / s_out, (cfg.image_size + s_out - 1) / s_out};
  p.targets = compute_field_targets(p.annotations, grid, s_out);

  // Fallback proposals come from the ground-truth fields themselves.
  const Thresholds th{cfg.th_d, 0.5};
  const auto gt_props = generate_proposals(p.targets.maps.dist, p.targets.maps.cls, th, cfg.n_control_points, s_out);
  for (std::size_t i = 0; i < p.annotations.size(); ++i) {
    const auto& a = p.annotations[i];
    if (a.is_ignore || p.targets.pixel_count[i + 1] == 0 || perimeter(a.vertices) <= 0.0) continue;
    p.care.push_back(static_cast<int>(i));
    p.target_points.push_back(resample_uniform(a.vertices, cfg.n_control_points));
    Polygon best;
    double best_iou = 0.0;
    for (const auto& gp : gt_props) {
      const double iou = polygon_iou(gp.points, a.vertices);
      if (iou > best_iou) {
        best_iou = iou;
        best = gp.points;
      }
    }
    p.fallback.push_back(std::move(best));
  }
  return p;
}

template <class T>
torch::Tensor grid_tensor(const Grid<T>& g, torch::ScalarType out) {
  if constexpr (std::is_same_v<T, double>) {
    return torch::from_blob(const_cast<double*>(g.data()), {g.rows(), g.cols()}, torch::kFloat64).to(out);
  } else {
    std::vector<double> v(g.values().begin(), g.values().end());
    return torch::from_blob(v.data(), {g.rows(), g.cols()}, torch::kFloat64).to(out);
  }
}

// ---------------------------------------------------------------------------
// Training

struct StepLosses {
  int epoch = 0;
  long step = 0;
  double total = 0, cls = 0, dist = 0, dir = 0, match = 0, be = 0, ie = 0;
};

inline std::string format_step(const StepLosses& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", s.epoch, s.step, s.total, s.cls, s.dist,
                s.dir, s.match, s.be, s.ie);
  return buf;
}

inline constexpr char kMetricsHeader[] = "epoch,step,L,L_cls,L_D,L_V,L_P,L_be,L_ie";

struct TrainOptions {
  bool resume = false;
  long stop_after_steps = -1;              // stop early (for tests); no checkpoint is written
  long inject_non_finite_at_step = -1;     // testing aid for the divergence guard
  std::function<void(const std::string&)> progress;
};

struct TrainSummary {
  int epochs_completed = 0;
  long steps = 0;
  std::vector<StepLosses> history;  // steps run in this call
  fs::path checkpoint;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void save_training_state(const fs::path& path, nn::Detector& det, const torch::optim::Adam& opt,
                                const RunConfig& cfg, int epochs_done, long steps) {
  nn::Checkpoint ck;
  ck.config = dump_config(cfg);
  ck.tensors = nn::module_state(*det);
  ck.tensors.emplace_back("train.epochs_done", torch::tensor({static_cast<int64_t>(epochs_done)}));
  ck.tensors.emplace_back("train.steps", torch::tensor({static_cast<int64_t>(steps)}));
  ck.optimizer = nn::serialize_optimizer(opt);
  nn::save_checkpoint(path.string(), ck);
}

inline int64_t stored_int(const nn::NamedTensors& t, const std::string& key) {
  for (const auto& [k, v] : t)
    if (k == key) return v.item<int64_t>();
  throw std::runtime_error("checkpoint lacks " + key);
}

/// Keeps only metric rows of epochs before `epoch`.
inline void truncate_metrics(const fs::path& path, int epoch) {
  std::ifstream is(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("epoch", 0) == 0 || std::stoi(line.substr(0, line.find(','))) < epoch) keep.push_back(line);
  }
  is.close();
  std::ofstream os(path, std::ios::trunc);
  for (const auto& l : keep) os << l << '\n';
}

}  // namespace detail

/// Trains a detector on `data_dir`, writing config.txt, metrics.csv and
/// last.ckpt into `out_dir`.
inline TrainSummary train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                          const TrainOptions& opts = {}) {
  cfg.validate();
  torch::set_num_threads(cfg.threads);
  fs::create_directories(out_dir);
  const fs::path ckpt_path = out_dir / "last.ckpt";
  const fs::path metrics_path = out_dir / "metrics.csv";
  {
    std::ofstream c(out_dir / "config.txt");
    c << dump_config(cfg);
  }

  const std::vector<Sample> data = load_dataset(data_dir, cfg.max_images);
  if (data.empty()) throw std::runtime_error("training set is empty");

  nn::Detector det(cfg);
  if (!cfg.init_from.empty()) {
    const nn::NamedTensors all = nn::load_checkpoint(cfg.init_from).tensors;
    if (cfg.init_backbone_only) {
      nn::NamedTensors part;
      for (const auto& [k, v] : all)
        if (k.rfind("backbone.", 0) == 0) part.emplace_back(k.substr(9), v);
      nn::load_module_state(*det->backbone, part);
    } else {
      nn::load_module_state(*det, all);
    }
  }
  std::vector<torch::Tensor> params =
      cfg.freeze_backbone ? det->transformer->parameters() : det->parameters();
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr)
                                     .betas({cfg.adam_beta1, cfg.adam_beta2})
                                     .eps(cfg.adam_eps));

  int start_epoch = 0;
  long step = 0;
  if (opts.resume && fs::exists(ckpt_path)) {
    const nn::Checkpoint ck = nn::load_checkpoint(ckpt_path.string());
    nn::load_module_state(*det, ck.tensors);
    nn::deserialize_optimizer(opt, ck.optimizer);
    start_epoch = static_cast<int>(detail::stored_int(ck.tensors, "train.epochs_done"));
    step = static_cast<long>(detail::stored_int(ck.tensors, "train.steps"));
    detail::truncate_metrics(metrics_path, start_epoch);
  } else {
    std::ofstream m(metrics_path, std::ios::trunc);
    m << kMetricsHeader << '\n';
  }
  std::ofstream metrics(metrics_path, std::ios::app);

  const nn::LossWeights lw = nn::loss_weights(cfg);
  const Thresholds th{cfg.th_d, cfg.th_s};
  const int n = cfg.n_control_points;
  const double stride = cfg.output_stride;
  const double size = cfg.image_size;
  TrainSummary summary;
  summary.checkpoint = ckpt_path;
  det->train();

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    for (auto& group : opt.param_groups())
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(cfg.lr_at(epoch));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(Rng::mix(cfg.seed, 0x5000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i) - 1))]);

    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::vector<PreparedSample> batch;
      std::vector<torch::Tensor> imgs, cls_t, dist_t, dir_t, lab_t, ign_t;
      for (std::size_t i = b0; i < b1; ++i) {
        const std::uint64_t aug_seed = Rng::mix(Rng::mix(cfg.seed, 0xA000 + static_cast<std::uint64_t>(epoch)), order[i]);
        batch.push_back(prepare_sample(data[order[i]], cfg, aug_seed));
        const PreparedSample& p = batch.back();
        const cv::Mat img = p.image.isContinuous() ? p.image : p.image.clone();
        imgs.push_back(nn::image_to_tensor(img.data, img.rows, img.cols));
        const PriorMaps& m = p.targets.maps;
        cls_t.push_back(grid_tensor(m.cls, torch::kFloat32));
        dist_t.push_back(grid_tensor(m.dist, torch::kFloat32));
        dir_t.push_back(torch::stack({grid_tensor(m.dir_x, torch::kFloat32), grid_tensor(m.dir_y, torch::kFloat32)}));
        lab_t.push_back(grid_tensor(p.targets.raster.labels, torch::kLong));
        ign_t.push_back(grid_tensor(m.ignore, torch::kBool));
      }
      const torch::Tensor images = torch::cat(imgs);
      const torch::Tensor gt_cls = torch::stack(cls_t), gt_dist = torch::stack(dist_t), gt_dir = torch::stack(dir_t);
      const torch::Tensor gt_lab = torch::stack(lab_t), gt_ign = torch::stack(ign_t);

      nn::FeatureMaps maps;
      if (cfg.freeze_backbone) {
        torch::NoGradGuard g;
        maps = det->backbone->forward(images);
      } else {
        maps = det->backbone->forward(images);
      }
      const torch::Tensor pr = maps.prior;
      const torch::Tensor l_cls = nn::loss_cls(pr.select(1, 0), gt_cls, gt_ign);
      const torch::Tensor l_d = nn::loss_dist(pr.select(1, 1), gt_dist, gt_cls, gt_ign, lw.ohem_ratio, lw.ohem_floor);
      const torch::Tensor l_v = nn::loss_dir(pr.narrow(1, 2, 2), gt_dir, gt_lab, gt_ign, lw.dir_background_weight,
                                                  lw.dir_background_as_segment, lw.dir_normalize_weights);
      const torch::Tensor l_bp = nn::prior_loss(l_cls, l_d, l_v, lw);

      // Proposals from the predicted fields, assigned to the GT of maximal IoU;
      // instances left uncovered fall back to GT-field proposals.
      std::vector<Polygon> starts, goals;
      std::vector<int64_t> owner;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const PreparedSample& p = batch[i];
        if (p.care.empty()) continue;
        auto preds = generate_proposals(nn::to_grid(pr[static_cast<int64_t>(i)][1]),
                                        nn::to_grid(pr[static_cast<int64_t>(i)][0]), th, n, stride);
        std::stable_sort(preds.begin(), preds.end(), [](const auto& a, const auto& c) { return a.score > c.score; });
        if (static_cast<int>(preds.size()) > cfg.max_train_proposals) preds.resize(static_cast<std::size_t>(cfg.max_train_proposals));
        std::vector<char> covered(p.care.size(), 0);
        for (const auto& pp : preds) {
          int best = -1;
          double best_iou = 0.0;
          for (std::size_t g = 0; g < p.care.size(); ++g) {
            const double iou = polygon_iou(pp.points, p.annotations[static_cast<std::size_t>(p.care[g])].vertices);
            if (iou > best_iou) {
              best_iou = iou;
              best = static_cast<int>(g);
            }
          }
          if (best < 0) continue;
          covered[static_cast<std::size_t>(best)] = 1;
          starts.push_back(pp.points);
          goals.push_back(p.target_points[static_cast<std::size_t>(best)]);
          owner.push_back(static_cast<int64_t>(i));
        }
        for (std::size_t g = 0; g < p.care.size(); ++g) {
          if (covered[g] || p.fallback[g].empty()) continue;
          starts.push_back(p.fallback[g]);
          goals.push_back(p.target_points[g]);
          owner.push_back(static_cast<int64_t>(i));
        }
      }

      StepLosses rec;
      rec.epoch = epoch;
      rec.step = step;
      torch::Tensor l_bt = l_bp * 0.0;
      if (!starts.empty()) {
        const torch::Tensor p0 = nn::polygons_to_tensor(starts, n);
        const torch::Tensor goal = nn::polygons_to_tensor(goals, n);
        const torch::Tensor who = torch::tensor(owner, torch::kLong);
        const nn::Refinement ref = nn::refine_iteratively(det->transformer, maps, p0, who, cfg.iterations, size, size);
        const nn::BoundaryLoss bt = nn::loss_bt(ref.polygons, p0, goal, gt_dist, who, stride, lw.use_energy,
                                                lw.smooth_l1_delta);
        l_bt = bt.total;
        rec.match = bt.match.item<double>();
        rec.be = bt.be.item<double>();
        rec.ie = bt.ie.item<double>();
      }
      const double coef = nn::schedule_coefficient(lw, epoch);
      const torch::Tensor total = cfg.freeze_backbone ? coef * l_bt : nn::total_loss(l_bp, l_bt, lw, epoch);
      rec.cls = l_cls.item<double>();
      rec.dist = l_d.item<double>();
      rec.dir = l_v.item<double>();
      rec.total = (l_bp + coef * l_bt).item<double>();
      if (step == opts.inject_non_finite_at_step) rec.total = std::nan("");
      if (!std::isfinite(rec.total))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                              "; last good checkpoint kept at " + ckpt_path.string());

      opt.zero_grad();
      total.backward();
      opt.step();

      metrics << format_step(rec) << '\n';
      metrics.flush();
      summary.history.push_back(rec);
      ++step;
      if (opts.progress && step % 25 == 0) opts.progress(format_step(rec));
      if (opts.stop_after_steps >= 0 && static_cast<long>(summary.history.size()) >= opts.stop_after_steps) {
        summary.steps = step;
        return summary;
      }
    }
    summary.epochs_completed = epoch + 1;
    if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)
      detail::save_training_state(ckpt_path, det, opt, cfg, epoch + 1, step);
    if (opts.progress) opts.progress("epoch " + std::to_string(epoch + 1) + " done");
  }
  if (cfg.epochs == start_epoch) detail::save_training_state(ckpt_path, det, opt, cfg, start_epoch, step);
  summary.epochs_completed = cfg.epochs;
  summary.steps = step;
  return summary;
}

// ---------------------------------------------------------------------------
// Inference over a dataset

struct IterationEval {
  std::vector<EvalReport> reports;  // index k: after k refinement steps (0 = proposals)
  std::vector<double> mean_energy;  // E(P^k) averaged over all proposals
  long proposals = 0;
};

/// Runs detection on every sample, scoring each refinement step against the
/// ground truth and measuring boundary energy on the ground-truth distance
/// field at the model's output stride.
inline IterationEval evaluate_iterations(nn::Detector& det, const std::vector<Sample>& samples, const Thresholds& th,
                                         int iterations, double iou_threshold = 0.5, int n_points = -1) {
  torch::NoGradGuard guard;
  det->eval();
  IterationEval out;
  out.reports.resize(static_cast<std::size_t>(iterations) + 1);
  for (auto& r : out.reports) r.iou_threshold = iou_threshold;
  std::vector<double> energy_sum(static_cast<std::size_t>(iterations) + 1, 0.0);
  const RunConfig& cfg = det->config();
  const int s = cfg.output_stride;
  for (const Sample& smp : samples) {
    const nn::DetectionTrace tr = nn::detect_image(det, smp.image, th, iterations, n_points);
    for (int k = 0; k <= iterations; ++k)
      out.reports[static_cast<std::size_t>(k)].add(smp.id, match_detections(nn::detections_at(tr, k), smp.annotations, iou_threshold));
    if (tr.proposals.empty()) continue;
    std::vector<PolygonAnnotation> boxed = smp.annotations;
    for (auto& a : boxed)
      for (auto& q : a.vertices) q = tr.scale * q;
    const Size2 grid{(cfg.image_size + s - 1) / s, (cfg.image_size + s - 1) / s};
    const FieldTargets ft = compute_field_targets(boxed, grid, s);
    const torch::Tensor field = grid_tensor(ft.maps.dist, torch::kFloat32).unsqueeze(0);
    const torch::Tensor who = torch::zeros({static_cast<int64_t>(tr.proposals.size())}, torch::kLong);
    const int np = static_cast<int>(tr.proposals.front().points.size());
    for (int k = 0; k <= iterations; ++k) {
      std::vector<Polygon> polys;
      for (const auto& sp : nn::detections_at(tr, k)) {
        Polygon q = sp.points;
        for (auto& v : q) v = tr.scale * v;
        polys.push_back(std::move(q));
      }
      const torch::Tensor e = nn::boundary_energy(nn::polygons_to_tensor(polys, np), field, who, s);
      energy_sum[static_cast<std::size_t>(k)] += e.sum().item<double>();
    }
    out.proposals += static_cast<long>(tr.proposals.size());
  }
  for (double e : energy_sum) out.mean_energy.push_back(out.proposals ? e / static_cast<double>(out.proposals) : 0.0);
  for (auto& r : out.reports) r.mean_energy_per_iteration = out.mean_energy;
  return out;
}

struct DetectSummary {
  int images = 0;
  std::vector<std::string> errors;
};

/// Writes `out/{id}.txt` (refined polygons) and `out/proposals/{id}.txt` for
/// every image in `images_dir`; unreadable images go to `out/errors.txt`.
inline DetectSummary detect_directory(nn::Detector& det, const fs::path& images_dir, const fs::path& out_dir,
                                      const Thresholds& th, int iterations) {
  fs::create_directories(out_dir / "proposals");
  DetectSummary sum;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string ext = f.extension().string();
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg" && ext != ".bmp") continue;
    const cv::Mat img = cv::imread(f.string(), cv::IMREAD_COLOR);
    if (img.empty()) {
      sum.errors.push_back(f.filename().string() + ": unreadable image");
      continue;
    }
    const nn::DetectionTrace tr = nn::detect_image(det, img, th, iterations);
    const std::string id = f.stem().string();
    write_scored_file((out_dir / (id + ".txt")).string(), nn::detections_at(tr, iterations));
    write_scored_file((out_dir / "proposals" / (id + ".txt")).string(), nn::detections_at(tr, 0));
    ++sum.images;
  }
  std::ofstream errs(out_dir / "errors.txt", std::ios::trunc);
  for (const auto& e : sum.errors) errs << e << '\n';
  return sum;
}

}  // namespace bplab
