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

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "bplab/prior_fields.hpp"
#include "oracles.hpp"

using namespace bplab;

namespace {

PolygonAnnotation rect(double x0, double y0, double x1, double y1, bool ignore = false) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, ignore};
}

std::vector<PolygonAnnotation> random_scene(Rng& rng, int n, int size) {
  std::vector<PolygonAnnotation> polys;
  for (int i = 0; i < n; ++i) {
    const Point2 c{rng.uniform(8, size - 8), rng.uniform(8, size - 8)};
    PolygonAnnotation a{oracle::random_star(rng, c, 3.0, rng.uniform(6.0, 16.0), rng.uniform_int(3, 12)), false};
    normalize_annotation(a, size, size);
    polys.push_back(a);
  }
  return polys;
}

}  // namespace

TEST(Rasterize, EmptyListGivesZeroGrid) {
  const auto r = rasterize_instances({}, {10, 12});
  for (int v : r.labels.values()) EXPECT_EQ(v, 0);
}

TEST(Rasterize, IntegerSquareCoversSixteenPixels) {
  const std::vector<PolygonAnnotation> p{rect(2, 3, 6, 7)};
  const auto r = rasterize_instances(p, {12, 12});
  int count = 0;
  for (int v : r.labels.values()) count += v == 1;
  EXPECT_EQ(count, 16);
  EXPECT_EQ(r.labels(3, 2), 1);
  EXPECT_EQ(r.labels(6, 5), 1);
  EXPECT_EQ(r.labels(7, 6), 0);
}

TEST(Rasterize, DegeneratePolygonSkipped) {
  const std::vector<PolygonAnnotation> p{{{{1, 1}, {1.5, 1}, {1.5, 1.5}}, false}, rect(4, 4, 8, 8)};
  const auto r = rasterize_instances(p, {10, 10});
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0], 1);
}

TEST(Rasterize, LaterInstanceWinsAndIsFlagged) {
  const std::vector<PolygonAnnotation> p{rect(0, 0, 6, 6), rect(3, 3, 9, 9)};
  const auto r = rasterize_instances(p, {10, 10});
  EXPECT_EQ(r.labels(4, 4), 2);
  ASSERT_EQ(r.overlapped.size(), 1u);
  EXPECT_EQ(r.overlapped[0], 2);
}

TEST(Rasterize, MatchesPerPixelRayCasting) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto polys = random_scene(rng, 20, 64);
    const auto r = rasterize_instances(polys, {64, 64});
    EXPECT_EQ(r.labels, oracle::raster_by_point_test(polys, 64, 64)) << "trial " << trial;
  }
}

TEST(NearestBoundary, BoundaryPixelMapsToItself) {
  const std::vector<PolygonAnnotation> p{rect(2, 2, 9, 9)};
  const auto r = rasterize_instances(p, {12, 12});
  const auto nb = nearest_boundary(r.labels);
  EXPECT_EQ(nb(2, 5), (BoundaryRef{2, 5}));
  EXPECT_EQ(nb(0, 0), (BoundaryRef{0, 0}));  // background
}

TEST(NearestBoundary, CenterOfOddSquareIsRadiusAway) {
  const int rad = 4;
  const std::vector<PolygonAnnotation> p{rect(3, 3, 3 + 2 * rad + 1, 3 + 2 * rad + 1)};
  const auto r = rasterize_instances(p, {20, 20});
  const auto nb = nearest_boundary(r.labels);
  const BoundaryRef b = nb(3 + rad, 3 + rad);
  EXPECT_DOUBLE_EQ(std::hypot(b.row - (3 + rad), b.col - (3 + rad)), rad);
  // Tie among four sides resolves to the smallest row.
  EXPECT_EQ(b, (BoundaryRef{3, 3 + rad}));
}

TEST(NearestBoundary, MatchesExhaustiveSearch) {
  Rng rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    const auto polys = random_scene(rng, 6, 32);
    const auto r = rasterize_instances(polys, {32, 32});
    const auto nb = nearest_boundary(r.labels);
    const auto ref = oracle::exhaustive_nearest(r.labels);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        EXPECT_EQ(nb(y, x).row, ref(y, x).row);
        EXPECT_EQ(nb(y, x).col, ref(y, x).col);
      }
  }
}

TEST(NearestBoundary, AdjacentInstancesNeverCrossReference) {
  // One background row between the two instances.
  const std::vector<PolygonAnnotation> p{rect(1, 1, 15, 7), rect(1, 8, 15, 14)};
  const auto r = rasterize_instances(p, {16, 16});
  const auto nb = nearest_boundary(r.labels);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const int id = r.labels(y, x);
      if (id == 0) continue;
      EXPECT_EQ(r.labels(nb(y, x).row, nb(y, x).col), id);
    }
}

TEST(DirectionField, BackgroundIsZero) {
  const std::vector<PolygonAnnotation> p{rect(2, 2, 9, 9)};
  const auto r = rasterize_instances(p, {12, 12});
  auto [dx, dy] = compute_direction_field(r.labels);
  EXPECT_EQ(dx(0, 0), 0.0);
  EXPECT_EQ(dy(0, 0), 0.0);
}

TEST(DirectionField, AxisAlignedCase) {
  // Pixel (5,5) with its nearest boundary at column 8 of the same row.
  const std::vector<PolygonAnnotation> p{rect(1, 0, 9, 12)};
  const auto r = rasterize_instances(p, {12, 12});
  const auto nb = nearest_boundary(r.labels);
  ASSERT_EQ(nb(5, 5), (BoundaryRef{5, 8}));
  auto [dx, dy] = compute_direction_field(r.labels, nb);
  EXPECT_DOUBLE_EQ(dx(5, 5), 1.0);
  EXPECT_DOUBLE_EQ(dy(5, 5), 0.0);
}

TEST(DirectionField, UnitNormOnInteriorTextPixels) {
  Rng rng(9);
  const auto polys = random_scene(rng, 5, 48);
  const auto r = rasterize_instances(polys, {48, 48});
  const auto ref = oracle::exhaustive_nearest(r.labels);
  auto [dx, dy] = compute_direction_field(r.labels);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      const double n = std::hypot(dx(y, x), dy(y, x));
      if (r.labels(y, x) == 0 || ref(y, x).dist == 0.0) {
        EXPECT_EQ(n, 0.0);
      } else {
        EXPECT_NEAR(n, 1.0, 1e-6);
        EXPECT_NEAR(dx(y, x), (ref(y, x).col - x) / ref(y, x).dist, 1e-6);
        EXPECT_NEAR(dy(y, x), (ref(y, x).row - y) / ref(y, x).dist, 1e-6);
      }
    }
}

TEST(DistanceField, BackgroundZeroAndMaximumOne) {
  const std::vector<PolygonAnnotation> p{rect(2, 2, 11, 11)};
  const auto r = rasterize_instances(p, {14, 14});
  const auto df = compute_distance_field(r.labels);
  EXPECT_EQ(df.dist(0, 0), 0.0);
  double mx = 0.0;
  for (double v : df.dist.values()) mx = std::max(mx, v);
  EXPECT_DOUBLE_EQ(mx, 1.0);
  EXPECT_DOUBLE_EQ(df.dist(6, 6), 1.0);
  EXPECT_DOUBLE_EQ(df.scale[1], 4.0);
}

TEST(DistanceField, ThinInstanceFlagged) {
  const std::vector<PolygonAnnotation> p{rect(2, 2, 12, 3)};  // one pixel tall
  const auto r = rasterize_instances(p, {8, 16});
  const auto df = compute_distance_field(r.labels);
  EXPECT_EQ(df.thin[1], 1);
  for (double v : df.dist.values()) EXPECT_EQ(v, 0.0);
}

TEST(DistanceField, MatchesOracleAndScaleConsistency) {
  Rng rng(21);
  const auto polys = random_scene(rng, 8, 64);
  const auto r = rasterize_instances(polys, {64, 64});
  const auto ref = oracle::exhaustive_nearest(r.labels);
  const auto df = compute_distance_field(r.labels);
  std::vector<double> L(polys.size() + 1, 0.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) L[r.labels(y, x)] = std::max(L[r.labels(y, x)], ref(y, x).dist);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const int id = r.labels(y, x);
      const double expect = id == 0 || L[id] == 0.0 ? 0.0 : ref(y, x).dist / L[id];
      EXPECT_NEAR(df.dist(y, x), expect, 1e-6);
      if (id > 0 && !df.thin[id]) EXPECT_NEAR(df.dist(y, x) * df.scale[id], ref(y, x).dist, 1e-6);
    }
}

TEST(ClassificationMap, IndicatorAndIgnoreMask) {
  const std::vector<PolygonAnnotation> none;
  const auto empty = rasterize_instances(none, {6, 6});
  const auto empty_cls = compute_classification_map(empty.labels);
  for (double v : empty_cls.values()) EXPECT_EQ(v, 0.0);

  const std::vector<PolygonAnnotation> p{rect(1, 1, 4, 4), rect(6, 6, 9, 8, true)};
  const auto r = rasterize_instances(p, {10, 10});
  const auto cls = compute_classification_map(r.labels);
  double sum = 0.0;
  for (double v : cls.values()) sum += v;
  EXPECT_EQ(sum, 9.0 + 6.0);
  const auto ign = compute_ignore_mask(r.labels, p);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(ign(y, x), r.labels(y, x) == 2 ? 1 : 0);
  EXPECT_EQ(cls(7, 7), 1.0);
}

TEST(Fields, RecomputationIsBitIdentical) {
  Rng rng(3);
  const auto polys = random_scene(rng, 5, 40);
  const auto a = compute_field_targets(polys, {40, 40});
  const auto b = compute_field_targets(polys, {40, 40});
  EXPECT_EQ(a.maps.dist, b.maps.dist);
  EXPECT_EQ(a.maps.dir_x, b.maps.dir_x);
  EXPECT_EQ(a.maps.dir_y, b.maps.dir_y);
  EXPECT_EQ(a.maps.cls, b.maps.cls);
}

TEST(Annotation, NormalizeMakesCounterClockwiseAndClips) {
  PolygonAnnotation a{{{-5, 2}, {2, 8}, {8, 2}}, false};  // clockwise in shoelace terms
  ASSERT_LT(signed_area(a.vertices), 0.0);
  ASSERT_TRUE(normalize_annotation(a, 10, 10));
  EXPECT_GT(signed_area(a.vertices), 0.0);
  for (const auto& p : a.vertices) EXPECT_GE(p.x, 0.0);
}

TEST(GtFormat, ParsesIgnoreSuffixAndDecimals) {
  const auto a = parse_gt_line("1,2,10.5,2,10.5,8,1,8,#ignore");
  EXPECT_TRUE(a.is_ignore);
  ASSERT_EQ(a.vertices.size(), 4u);
  EXPECT_DOUBLE_EQ(a.vertices[1].x, 10.5);
  EXPECT_FALSE(parse_gt_line("0,0,4,0,4,4").is_ignore);
  EXPECT_THROW(parse_gt_line("0,0,4,0,4"), std::invalid_argument);
  EXPECT_THROW(parse_gt_line("0,0,4,x,4,4"), std::invalid_argument);
}

TEST(GtFormat, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "bplab_gt_roundtrip.txt").string();
  const std::vector<PolygonAnnotation> p{rect(1, 2, 3.25, 4), rect(5, 5, 9, 9, true)};
  write_gt_file(path, p);
  EXPECT_EQ(read_gt_file(path), p);
  std::remove(path.c_str());
}
