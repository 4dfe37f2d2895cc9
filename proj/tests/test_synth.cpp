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

#include <filesystem>
#include <fstream>

#include "bplab/synth.hpp"
#include "oracles.hpp"

using namespace bplab;

namespace {

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  return s;
}

cv::Mat mask_of(const std::vector<PolygonAnnotation>& anns, Size2 size) {
  const auto raster = rasterize_instances(anns, size);
  cv::Mat m(size.rows, size.cols, CV_8UC3, cv::Scalar(0, 0, 0));
  for (int r = 0; r < size.rows; ++r)
    for (int c = 0; c < size.cols; ++c)
      if (raster.labels(r, c)) m.at<cv::Vec3b>(r, c) = {255, 255, 255};
  return m;
}

}  // namespace

TEST(GenerateScene, BitIdenticalOnRegeneration) {
  const Scene a = generate_scene(small_spec(7));
  const Scene b = generate_scene(small_spec(7));
  ASSERT_EQ(a.image.size(), b.image.size());
  EXPECT_EQ(cv::norm(a.image, b.image, cv::NORM_INF), 0.0);
  ASSERT_EQ(a.annotations.size(), b.annotations.size());
  for (std::size_t i = 0; i < a.annotations.size(); ++i) EXPECT_EQ(a.annotations[i].vertices, b.annotations[i].vertices);
  const Scene c = generate_scene(small_spec(8));
  EXPECT_GT(cv::norm(a.image, c.image, cv::NORM_INF), 0.0);
}

TEST(GenerateScene, ZeroInstancesGivesBackgroundOnly) {
  SceneSpec s = small_spec(3);
  s.min_instances = s.max_instances = 0;
  const Scene sc = generate_scene(s);
  EXPECT_TRUE(sc.annotations.empty());
  EXPECT_EQ(sc.image.rows, 256);
  EXPECT_EQ(sc.image.type(), CV_8UC3);
}

TEST(GenerateScene, RejectsInvalidSpec) {
  SceneSpec s;
  s.clutter_level = 1.5;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = SceneSpec{};
  s.max_instances = 0;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
}

TEST(GenerateScene, PolygonsSurviveNormalizationAndMeetInvariants) {
  int placed = 0, requested = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SceneSpec spec = small_spec(seed);
    const Scene sc = generate_scene(spec);
    requested += sc.requested_instances;
    placed += sc.placed_instances;
    for (const auto& ann : sc.annotations) {
      PolygonAnnotation copy = ann;
      ASSERT_TRUE(normalize_annotation(copy, spec.size.cols, spec.size.rows));
      EXPECT_EQ(copy.vertices, ann.vertices);  // already clean
      EXPECT_TRUE(is_simple(ann.vertices));
      EXPECT_GT(signed_area(ann.vertices), 0.0);
      EXPECT_GE(ann.vertices.size(), 14u);
      EXPECT_LE(ann.vertices.size(), 30u);
    }
    const auto raster = rasterize_instances(sc.annotations, spec.size);
    EXPECT_TRUE(raster.overlapped.empty());
    // Boundary pixel counts.
    std::vector<int> boundary(sc.annotations.size() + 1, 0);
    for (int r = 0; r < spec.size.rows; ++r)
      for (int c = 0; c < spec.size.cols; ++c)
        if (raster.labels(r, c) && oracle::boundary_pred(raster.labels, r, c)) ++boundary[raster.labels(r, c)];
    for (std::size_t k = 1; k < boundary.size(); ++k) EXPECT_GE(boundary[k], 2 * spec.n_control_points);
    // At least two background pixels between different instances.
    for (int r = 0; r < spec.size.rows; ++r)
      for (int c = 0; c < spec.size.cols; ++c) {
        const int id = raster.labels(r, c);
        if (!id) continue;
        for (int dr = -2; dr <= 2; ++dr)
          for (int dc = -2; dc <= 2; ++dc) {
            if (!raster.labels.in_bounds(r + dr, c + dc)) continue;
            const int other = raster.labels(r + dr, c + dc);
            ASSERT_TRUE(other == 0 || other == id) << "seed " << seed;
          }
      }
  }
  EXPECT_GT(placed, requested * 8 / 10);
}

TEST(Augment, SampledAnglesStayInsideTruncation) {
  Rng rng(11);
  double lo = 0, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = sample_rotation(rng, 15.0, 30.0);
    ASSERT_GT(a, -30.0);
    ASSERT_LT(a, 30.0);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  EXPECT_LT(lo, -25.0);
  EXPECT_GT(hi, 25.0);
}

TEST(Augment, IdentityLeavesInputUnchanged) {
  const Scene sc = generate_scene(small_spec(5));
  const auto [img, anns] = apply_augment(sc.image, sc.annotations, AugmentParams{}, sc.image.cols);
  EXPECT_EQ(cv::norm(img, sc.image, cv::NORM_INF), 0.0);
  ASSERT_EQ(anns.size(), sc.annotations.size());
  for (std::size_t i = 0; i < anns.size(); ++i) EXPECT_EQ(anns[i].vertices, sc.annotations[i].vertices);
}

TEST(Augment, FlipTwiceRestoresPolygons) {
  const Scene sc = generate_scene(small_spec(9));
  AugmentParams p;
  p.flip = true;
  p.crop_x = 20;
  p.crop_y = 10;
  p.crop_w = 200;
  p.crop_h = 200;
  const auto [img1, once] = apply_augment(sc.image, sc.annotations, p, 200);
  AugmentParams q;
  q.flip = true;
  const auto [img2, twice] = apply_augment(img1, once, q, 200);
  EXPECT_EQ(cv::norm(img1, img2, cv::NORM_INF) > 0.0, true);
  const auto [ref_img, ref] = apply_augment(sc.image, sc.annotations, AugmentParams{0, 20, 10, 200, 200, false}, 200);
  EXPECT_EQ(cv::norm(ref_img, img2, cv::NORM_INF), 0.0);
  ASSERT_EQ(twice.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ASSERT_EQ(twice[i].vertices.size(), ref[i].vertices.size());
    for (std::size_t k = 0; k < ref[i].vertices.size(); ++k) {
      EXPECT_NEAR(twice[i].vertices[k].x, ref[i].vertices[k].x, 1e-6);
      EXPECT_NEAR(twice[i].vertices[k].y, ref[i].vertices[k].y, 1e-6);
    }
  }
}

TEST(Augment, PolygonsTrackTheImage) {
  // Paint the GT mask into an image, augment, and compare the warped mask
  // against the rasterized transformed polygons.
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const Scene sc = generate_scene(small_spec(100 + seed));
    if (sc.annotations.empty()) continue;
    const cv::Mat painted = mask_of(sc.annotations, {256, 256});
    const auto [img, anns] = augment(painted, sc.annotations, seed, AugmentConfig{.out_size = 192});
    ASSERT_EQ(img.rows, 192);
    const auto raster = rasterize_instances(anns, {192, 192});
    int both = 0, either = 0;
    for (int r = 0; r < 192; ++r)
      for (int c = 0; c < 192; ++c) {
        const bool a = img.at<cv::Vec3b>(r, c)[0] >= 128;
        const bool b = raster.labels(r, c) != 0;
        both += a && b;
        either += a || b;
      }
    if (either == 0) continue;
    EXPECT_GT(static_cast<double>(both) / either, 0.9) << "seed " << seed;
  }
}

TEST(Augment, RasterPixelsLieInsideOutlines) {
  Rng pick(4);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10 && checked < 1000; ++seed) {
    const Scene sc = generate_scene(small_spec(200 + seed));
    const auto [img, anns] = augment(sc.image, sc.annotations, seed);
    const auto raster = rasterize_instances(anns, {img.rows, img.cols});
    std::vector<std::pair<int, int>> px;
    for (int r = 0; r < img.rows; ++r)
      for (int c = 0; c < img.cols; ++c)
        if (raster.labels(r, c)) px.emplace_back(r, c);
    for (int k = 0; k < 150 && !px.empty(); ++k, ++checked) {
      const auto [r, c] = px[pick.uniform_int(0, static_cast<int>(px.size()) - 1)];
      const auto& poly = anns[raster.labels(r, c) - 1].vertices;
      EXPECT_TRUE(contains(poly, {c + 0.5, r + 0.5}));
    }
  }
  EXPECT_GE(checked, 1000);
}

TEST(Augment, CropKeepsAnInstanceWhenPossible) {
  int kept = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Scene sc = generate_scene(small_spec(300 + seed));
    if (sc.annotations.empty()) continue;
    ++total;
    const auto [img, anns] = augment(sc.image, sc.annotations, seed);
    kept += !anns.empty();
  }
  EXPECT_EQ(kept, total);
}

TEST(Augment, DeterministicPerSeed) {
  const Scene sc = generate_scene(small_spec(1));
  const auto [a, pa] = augment(sc.image, sc.annotations, 42);
  const auto [b, pb] = augment(sc.image, sc.annotations, 42);
  EXPECT_EQ(cv::norm(a, b, cv::NORM_INF), 0.0);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].vertices, pb[i].vertices);
}

TEST(Dataset, WritesLayoutAndRoundTrips) {
  const auto dir = std::filesystem::temp_directory_path() / "bplab_synth_test";
  std::filesystem::remove_all(dir);
  SceneSpec spec = small_spec(7);
  write_dataset(dir, spec, 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "meta.txt"));
  for (int i = 0; i < 3; ++i) {
    const std::string id = sample_id(i);
    const cv::Mat img = cv::imread((dir / "images" / (id + ".png")).string(), cv::IMREAD_COLOR);
    ASSERT_FALSE(img.empty());
    SceneSpec s = spec;
    s.seed = scene_seed(spec.seed, i);
    const Scene sc = generate_scene(s);
    EXPECT_EQ(cv::norm(img, sc.image, cv::NORM_INF), 0.0);
    const auto anns = read_gt_file((dir / "gts" / (id + ".txt")).string());
    ASSERT_EQ(anns.size(), sc.annotations.size());
    for (std::size_t k = 0; k < anns.size(); ++k)
      for (std::size_t v = 0; v < anns[k].vertices.size(); ++v) {
        EXPECT_NEAR(anns[k].vertices[v].x, sc.annotations[k].vertices[v].x, 1e-6);
        EXPECT_NEAR(anns[k].vertices[v].y, sc.annotations[k].vertices[v].y, 1e-6);
      }
  }
  std::ifstream meta(dir / "meta.txt");
  std::string first;
  std::getline(meta, first);
  EXPECT_EQ(first, "rows = 256");
  std::filesystem::remove_all(dir);
}
