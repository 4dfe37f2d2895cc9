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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <opencv2/imgcodecs.hpp>

#include "bplab/polygon_io.hpp"
#include "bplab/prior_fields.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "bplab_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "scene.txt") << "rows = 128\ncols = 128\nlength_min = 50\nlength_max = 100\n"
                                      "width_min = 16\nwidth_max = 24\ncount = 5\n";
    std::ofstream(d / "run.txt") << "image_size = 128\nembed_dim = 32\nheads = 2\nmlp_hidden = 64\n"
                                    "epochs = 1\nbatch_size = 5\n";
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BPLAB_EXE) + " " + args + " > " + (work() / "last.log").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.string() + '\n' + slurp(dir / f);
  return all;
}

const fs::path& trained() {
  static const fs::path ckpt = [] {
    const fs::path w = work();
    EXPECT_EQ(run_cli("gen-synth --spec " + (w / "scene.txt").string() + " --out " + (w / "data").string() + " --seed 3"), 0);
    EXPECT_EQ(run_cli("train --config " + (w / "run.txt").string() + " --data " + (w / "data").string() + " --out " +
                    (w / "run").string()),
              0);
    return w / "run" / "last.ckpt";
  }();
  return ckpt;
}

}  // namespace

TEST(Cli, GenSynthIsReproducible) {
  const fs::path w = work();
  ASSERT_EQ(run_cli("gen-synth --spec " + (w / "scene.txt").string() + " --out " + (w / "g1").string() + " --seed 7"), 0);
  ASSERT_EQ(run_cli("gen-synth --spec " + (w / "scene.txt").string() + " --out " + (w / "g2").string() + " --seed 7"), 0);
  EXPECT_EQ(tree_bytes(w / "g1"), tree_bytes(w / "g2"));
  EXPECT_EQ(run_cli("gen-synth --spec " + (w / "scene.txt").string() + " --out " + (w / "g3").string() + " --seed 8"), 0);
  EXPECT_NE(tree_bytes(w / "g1"), tree_bytes(w / "g3"));
}

TEST(Cli, EvalOfGroundTruthIsPerfect) {
  const fs::path w = work();
  ASSERT_EQ(run_cli("gen-synth --spec " + (w / "scene.txt").string() + " --out " + (w / "ev").string() + " --seed 4"), 0);
  fs::create_directories(w / "ev_pred");
  for (const auto& e : fs::directory_iterator(w / "ev" / "gts")) {
    std::vector<bplab::ScoredPolygon> preds;
    for (const auto& a : bplab::read_gt_file(e.path().string()))
      if (!a.is_ignore) preds.push_back({a.vertices, 1.0});
    bplab::write_scored_file((w / "ev_pred" / e.path().filename()).string(), preds);
  }
  ASSERT_EQ(run_cli("eval --gt " + (w / "ev" / "gts").string() + " --pred " + (w / "ev_pred").string() + " --iou 0.5"), 0);
  EXPECT_NE(slurp(w / "last.log").find("f_measure = 1\n"), std::string::npos) << slurp(w / "last.log");
}

TEST(Cli, EvalReportsMismatchedFiles) {
  const fs::path w = work();
  fs::create_directories(w / "mm_gt");
  fs::create_directories(w / "mm_pred");
  std::ofstream(w / "mm_gt" / "a.txt") << "0,0,10,0,10,10,0,10\n";
  std::ofstream(w / "mm_gt" / "b.txt") << "0,0,10,0,10,10,0,10\n";
  std::ofstream(w / "mm_pred" / "a.txt") << "0.9;0,0,10,0,10,10,0,10\n";
  std::ofstream(w / "mm_pred" / "c.txt") << "";
  EXPECT_EQ(run_cli("eval --gt " + (w / "mm_gt").string() + " --pred " + (w / "mm_pred").string()), 3);
  const std::string log = slurp(w / "last.log");
  EXPECT_NE(log.find("missing prediction: b.txt"), std::string::npos) << log;
  EXPECT_NE(log.find("prediction without ground truth: c.txt"), std::string::npos) << log;
  EXPECT_NE(log.find("recall = 0.5"), std::string::npos) << log;
}

TEST(Cli, DetectIsDeterministicAndRespectsThresholds) {
  const fs::path w = work();
  const fs::path ckpt = trained();
  ASSERT_TRUE(fs::exists(ckpt)) << slurp(w / "last.log");
  const std::string imgs = (w / "data" / "images").string();
  ASSERT_EQ(run_cli("detect --ckpt " + ckpt.string() + " --images " + imgs + " --out " + (w / "p1").string() +
                  " --th-d 0.3 --th-s 0.3 --iters 3"),
            0);
  ASSERT_EQ(run_cli("detect --ckpt " + ckpt.string() + " --images " + imgs + " --out " + (w / "p2").string() +
                  " --th-d 0.3 --th-s 0.3 --iters 3"),
            0);
  EXPECT_EQ(tree_bytes(w / "p1"), tree_bytes(w / "p2"));

  ASSERT_EQ(run_cli("detect --ckpt " + ckpt.string() + " --images " + imgs + " --out " + (w / "p_strict").string() +
                  " --th-s 1.0"),
            0);
  for (const auto& e : fs::directory_iterator(w / "p_strict"))
    if (e.path().extension() == ".txt") EXPECT_EQ(fs::file_size(e.path()), 0u) << e.path();
}

TEST(Cli, BackgroundOnlyImageGivesEmptyFile) {
  const fs::path w = work();
  const fs::path ckpt = trained();
  fs::create_directories(w / "bg");
  cv::imwrite((w / "bg" / "blank.png").string(), cv::Mat(128, 128, CV_8UC3, cv::Scalar(128, 128, 128)));
  std::ofstream(w / "bg" / "corrupt.png") << "definitely not a png";
  ASSERT_EQ(run_cli("detect --ckpt " + ckpt.string() + " --images " + (w / "bg").string() + " --out " + (w / "bg_out").string()),
            0);
  EXPECT_EQ(fs::file_size(w / "bg_out" / "blank.txt"), 0u);
  EXPECT_NE(slurp(w / "bg_out" / "errors.txt").find("corrupt.png"), std::string::npos);
}

TEST(Cli, RenderWritesOnePngPerImage) {
  const fs::path w = work();
  const fs::path ckpt = trained();
  ASSERT_EQ(run_cli("detect --ckpt " + ckpt.string() + " --images " + (w / "data" / "images").string() + " --out " +
                  (w / "rp").string() + " --th-s 0.3"),
            0);
  ASSERT_EQ(run_cli("render --image " + (w / "data" / "images").string() + " --pred " + (w / "rp").string() + " --gt " +
                  (w / "data" / "gts").string() + " --out " + (w / "overlays").string()),
            0);
  int n = 0;
  for (const auto& e : fs::directory_iterator(w / "overlays")) {
    const cv::Mat m = cv::imread(e.path().string());
    EXPECT_EQ(m.rows, 128);
    ++n;
  }
  EXPECT_EQ(n, 5);

  // Single file form; the green ground truth contour must be visible.
  const fs::path one = w / "one.png";
  ASSERT_EQ(run_cli("render --image " + (w / "data" / "images" / "img_00000.png").string() + " --pred " +
                  (w / "rp" / "img_00000.txt").string() + " --gt " + (w / "data" / "gts" / "img_00000.txt").string() +
                  " --out " + one.string()),
            0);
  const cv::Mat m = cv::imread(one.string());
  int green = 0;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const cv::Vec3b p = m.at<cv::Vec3b>(r, c);
      green += p[1] > 150 && p[0] < 60 && p[2] < 60;
    }
  EXPECT_GT(green, 20);
}

TEST(Cli, BadInputsFailCleanly) {
  const fs::path w = work();
  std::ofstream(w / "bad.txt") << "epochs = 1\nwarmup = 3\n";
  EXPECT_EQ(run_cli("train --config " + (w / "bad.txt").string() + " --data " + w.string() + " --out " +
                  (w / "bad_run").string()),
            1);
  EXPECT_NE(slurp(w / "last.log").find("unknown key 'warmup'"), std::string::npos);
  EXPECT_NE(run_cli("detect --images " + w.string() + " --out x"), 0);
}
