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

// bplab command-line tool: synthetic data, training, detection, evaluation
// and overlay rendering.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>

#include "bplab/config.hpp"
#include "bplab/eval_dirs.hpp"
#include "bplab/nn/detector.hpp"
#include "bplab/render.hpp"
#include "bplab/synth.hpp"
#include "bplab/train.hpp"

namespace fs = std::filesystem;
using namespace bplab;

namespace {

int gen_synth(const std::string& spec_path, const fs::path& out, std::optional<std::uint64_t> seed,
              std::optional<int> count_flag) {
  int count = 100;
  SceneSpec spec;
  if (!spec_path.empty()) {
    std::ifstream is(spec_path);
    if (!is) throw std::runtime_error("cannot open scene spec " + spec_path);
    spec = parse_scene_spec(is, count);
  }
  if (seed) spec.seed = *seed;
  if (count_flag) count = *count_flag;
  if (count < 0) throw std::invalid_argument("count must be non-negative");
  const int short_scenes = write_dataset(out, spec, count);
  std::cout << "wrote " << count << " scenes to " << out.string() << " (" << short_scenes
            << " placed fewer instances than requested)\n";
  return 0;
}

int run_train(const std::string& config, const fs::path& data, const fs::path& out, bool resume, int threads) {
  RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
  if (threads > 0) cfg.threads = threads;
  TrainOptions o;
  o.resume = resume;
  o.progress = [](const std::string& line) { std::cerr << line << '\n'; };
  const TrainSummary s = train(cfg, data, out, o);
  std::cout << "trained " << s.epochs_completed << " epochs (" << s.steps << " steps); checkpoint "
            << s.checkpoint.string() << '\n';
  return 0;
}

int run_detect(const std::string& ckpt, const fs::path& images, const fs::path& out, std::optional<double> th_d,
               std::optional<double> th_s, std::optional<int> iters) {
  nn::Detector det = nn::load_detector(ckpt);
  const RunConfig& cfg = det->config();
  Thresholds th{th_d.value_or(cfg.th_d), th_s.value_or(cfg.th_s)};
  th.validate();
  const int m = iters.value_or(cfg.iterations);
  if (m < 1) throw std::invalid_argument("--iters must be at least 1");
  const DetectSummary s = detect_directory(det, images, out, th, m);
  std::cout << "detected on " << s.images << " images; " << s.errors.size() << " skipped (see "
            << (out / "errors.txt").string() << ")\n";
  return 0;
}

int run_eval(const fs::path& gt, const fs::path& pred, double iou, const std::string& report_path) {
  const DirectoryEval e = evaluate_directories(gt, pred, iou);
  write_file_report(std::cerr, e);
  e.report.write(std::cout);
  if (!report_path.empty()) {
    std::ofstream os(report_path);
    write_file_report(os, e);
    e.report.write(os);
  }
  return e.missing_predictions.empty() && e.unmatched_predictions.empty() ? 0 : 3;
}

void render_one(const fs::path& image, const fs::path& pred, const fs::path& gt, const fs::path& proposals,
                const fs::path& out) {
  const cv::Mat img = cv::imread(image.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw std::runtime_error("unreadable image " + image.string());
  std::vector<PolygonAnnotation> g;
  std::vector<ScoredPolygon> p, r;
  if (!gt.empty() && fs::exists(gt)) g = read_gt_file(gt.string());
  if (!proposals.empty() && fs::exists(proposals)) p = read_scored_file(proposals.string());
  if (!pred.empty()) r = read_scored_file(pred.string());
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  if (!cv::imwrite(out.string(), render_overlay(img, g, p, r))) throw std::runtime_error("cannot write " + out.string());
}

fs::path default_proposals(const fs::path& pred) {
  return pred.empty() ? fs::path() : pred.parent_path() / "proposals" / pred.filename();
}

int run_render(const fs::path& image, const fs::path& pred, const fs::path& gt, fs::path proposals,
               const fs::path& out) {
  if (!fs::is_directory(image)) {
    if (proposals.empty()) proposals = default_proposals(pred);
    render_one(image, pred, gt, proposals, out);
    return 0;
  }
  int n = 0;
  for (const auto& id : list_image_ids(image)) {
    const fs::path pr = pred / (id + ".txt");
    const fs::path pp = proposals.empty() ? default_proposals(pr) : proposals / (id + ".txt");
    render_one(image / (id + ".png"), fs::exists(pr) ? pr : fs::path(), gt.empty() ? gt : gt / (id + ".txt"), pp,
               out / (id + ".png"));
    ++n;
  }
  std::cout << "rendered " << n << " overlays into " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-proposal text detector toolkit"};
  app.require_subcommand(1);

  std::string spec_path, config, ckpt, report;
  fs::path out, data, images, gt, pred, proposals, image;
  std::optional<std::uint64_t> seed;
  std::optional<int> count, iters;
  std::optional<double> th_d, th_s;
  bool resume = false;
  int threads = 0;
  double iou = 0.5;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic curved-text dataset");
  gen->add_option("--spec", spec_path, "Scene description (key = value)")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Dataset seed (overrides the spec)");
  gen->add_option("--count", count, "Number of scenes (overrides the spec)");

  auto* tr = app.add_subcommand("train", "Train a detector");
  tr->add_option("--config", config, "Run configuration (key = value)")->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Dataset directory with images/ and gts/")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Run directory")->required();
  tr->add_flag("--resume", resume, "Continue from <out>/last.ckpt when present");
  tr->add_option("--threads", threads, "Intra-op threads (overrides the config)");

  auto* det = app.add_subcommand("detect", "Detect text boundaries in a directory of images");
  det->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  det->add_option("--images", images, "Image directory")->required()->check(CLI::ExistingDirectory);
  det->add_option("--out", out, "Prediction directory")->required();
  det->add_option("--th-d", th_d, "Distance threshold");
  det->add_option("--th-s", th_s, "Confidence threshold");
  det->add_option("--iters", iters, "Refinement iterations");

  auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
  ev->add_option("--gt", gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--pred", pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--iou", iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--report", report, "Also write the report to this file");

  auto* ren = app.add_subcommand("render", "Draw proposals, refined boundaries and ground truth");
  ren->add_option("--image", image, "Image file or directory")->required()->check(CLI::ExistingPath);
  ren->add_option("--pred", pred, "Prediction file or directory");
  ren->add_option("--gt", gt, "Ground-truth file or directory");
  ren->add_option("--proposals", proposals, "Proposal file or directory (default: <pred dir>/proposals)");
  ren->add_option("--out", out, "Output PNG or directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_synth(spec_path, out, seed, count);
    if (*tr) return run_train(config, data, out, resume, threads);
    if (*det) return run_detect(ckpt, images, out, th_d, th_s, iters);
    if (*ev) return run_eval(gt, pred, iou, report);
    if (*ren) return run_render(image, pred, gt, proposals, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
