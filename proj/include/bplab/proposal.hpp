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

// Coarse boundary proposals from a distance field and a classification map:
// threshold, label components, score, filter, trace, resample.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bplab/geometry.hpp"
#include "bplab/grid.hpp"
#include "bplab/polygon_io.hpp"

namespace bplab {

struct Thresholds {
  double th_d = 0.3;
  double th_s = 0.85;

  void validate() const {
    if (!(th_d > 0.0 && th_d < 1.0)) throw std::invalid_argument("th_d must lie in (0, 1)");
    if (!(th_s > 0.0 && th_s <= 1.0)) throw std::invalid_argument("th_s must lie in (0, 1]");
  }
};

struct BoundaryProposal {
  Polygon points;  // N control points, counter-clockwise, image pixels
  double score = 0.0;
  int source_component = 0;
};

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Region {
  int id = 0;                 // 1-based, raster order of first pixel
  std::vector<Pixel> pixels;  // raster order
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // inclusive bounding box
};

struct Components {
  Grid<int> labels;  // 0 = not in mask
  std::vector<Region> regions;
};

inline Grid<std::uint8_t> binarize_distance(const Grid<double>& dist, double th_d) {
  Grid<std::uint8_t> mask(dist.rows(), dist.cols(), 0);
  for (int r = 0; r < dist.rows(); ++r)
    for (int c = 0; c < dist.cols(); ++c) mask(r, c) = dist(r, c) > th_d ? 1 : 0;
  return mask;
}

/// 8-connected labeling by two-pass union-find; labels follow the raster
/// order of each component's first pixel.
inline Components connected_components(const Grid<std::uint8_t>& mask) {
  const int rows = mask.rows();
  const int cols = mask.cols();
  Grid<int> provisional(rows, cols, 0);
  std::vector<int> parent{0};

  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  };

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!mask(r, c)) continue;
      // Already-visited 8-neighbors: W, NW, N, NE.
      const std::array<Pixel, 4> prior{{{r, c - 1}, {r - 1, c - 1}, {r - 1, c}, {r - 1, c + 1}}};
      int label = 0;
      for (const Pixel& q : prior) {
        if (!mask.in_bounds(q.row, q.col) || !mask(q.row, q.col)) continue;
        const int l = provisional(q.row, q.col);
        if (label == 0) label = l;
        else unite(label, l);
      }
      if (label == 0) {
        label = static_cast<int>(parent.size());
        parent.push_back(label);
      }
      provisional(r, c) = label;
    }
  }

  Components out{Grid<int>(rows, cols, 0), {}};
  std::vector<int> final_id(parent.size(), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int l = provisional(r, c);
      if (l == 0) continue;
      const int root = find(l);
      if (final_id[root] == 0) {
        final_id[root] = static_cast<int>(out.regions.size()) + 1;
        out.regions.push_back(Region{final_id[root], {}, r, c, r, c});
      }
      const int id = final_id[root];
      out.labels(r, c) = id;
      Region& reg = out.regions[id - 1];
      reg.pixels.push_back({r, c});
      reg.row0 = std::min(reg.row0, r);
      reg.row1 = std::max(reg.row1, r);
      reg.col0 = std::min(reg.col0, c);
      reg.col1 = std::max(reg.col1, c);
    }
  }
  return out;
}

/// Mean classification probability over the region.
inline double score_region(const Region& region, const Grid<double>& cls) {
  if (region.pixels.empty()) throw std::invalid_argument("score_region: empty region");
  double sum = 0.0;
  for (const Pixel& p : region.pixels) sum += cls(p.row, p.col);
  return sum / static_cast<double>(region.pixels.size());
}

/// Indices of regions with score >= th_s and at least `min_pixels` pixels.
inline std::vector<std::size_t> filter_candidates(std::span<const Region> regions,
                                                  std::span<const double> scores, double th_s,
                                                  std::size_t min_pixels) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (scores[i] >= th_s && regions[i].pixels.size() >= min_pixels) keep.push_back(i);
  return keep;
}

inline std::size_t min_region_pixels(int n_points) {
  return static_cast<std::size_t>(std::max(n_points, 16));
}

/// Outer contour of an 8-connected region by Moore-neighbor tracing with
/// Jacob's stopping rule. Vertices are pixel centers in grid coordinates,
/// counter-clockwise, starting at the region's topmost-then-leftmost pixel.
/// Holes are never visited. Pixels outside the grid count as background.
inline Polygon trace_contour(const Region& region, const Grid<int>& labels) {
  if (region.pixels.empty()) return {};
  const int id = region.id;
  auto inside = [&](int r, int c) { return labels.in_bounds(r, c) && labels(r, c) == id; };

  // Clockwise on screen (y down), starting west.
  constexpr std::array<Pixel, 8> kDirs{{{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}}};
  auto dir_index = [&](int dr, int dc) {
    for (int k = 0; k < 8; ++k)
      if (kDirs[k].row == dr && kDirs[k].col == dc) return k;
    return -1;
  };

  const Pixel start = region.pixels.front();
  std::vector<Pixel> chain{start};

  // Returns the next contour pixel and updates `back` (a background cell
  // 8-adjacent to the returned pixel).
  auto step = [&](Pixel cur, Pixel& back) -> std::optional<Pixel> {
    const int b = dir_index(back.row - cur.row, back.col - cur.col);
    Pixel prev = back;
    for (int k = 1; k <= 8; ++k) {
      const Pixel d = kDirs[(b + k) % 8];
      const Pixel cand{cur.row + d.row, cur.col + d.col};
      if (inside(cand.row, cand.col)) {
        back = prev;
        return cand;
      }
      prev = cand;
    }
    return std::nullopt;
  };

  Pixel back{start.row, start.col - 1};
  Pixel cur = start;
  auto first = step(cur, back);
  if (!first) return {{start.col + 0.5, start.row + 0.5}};
  const Pixel first_next = *first;
  const Pixel first_back = back;
  cur = first_next;
  const std::size_t limit = 4 * region.pixels.size() + 16;
  while (chain.size() <= limit) {
    if (cur == start) {
      Pixel b = back;
      auto nxt = step(cur, b);
      if (nxt && *nxt == first_next && b == first_back) break;
    }
    chain.push_back(cur);
    Pixel b = back;
    auto nxt = step(cur, b);
    if (!nxt) break;
    back = b;
    cur = *nxt;
  }

  Polygon poly;
  poly.reserve(chain.size());
  for (const Pixel& p : chain) {
    const Point2 v{p.col + 0.5, p.row + 0.5};
    if (poly.empty() || !(poly.back() == v)) poly.push_back(v);
  }
  while (poly.size() > 1 && poly.back() == poly.front()) poly.pop_back();
  if (signed_area(poly) < 0.0) std::reverse(poly.begin() + 1, poly.end());
  return poly;
}

/// Index of the topmost-then-leftmost vertex.
inline std::size_t canonical_start(std::span<const Point2> poly) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    if (poly[i].y < poly[best].y || (poly[i].y == poly[best].y && poly[i].x < poly[best].x)) best = i;
  }
  return best;
}

/// N points at equal arc-length spacing along the closed polygon, starting at
/// its topmost-then-leftmost vertex, counter-clockwise.
inline Polygon resample_uniform(std::span<const Point2> polygon, int n_points) {
  if (n_points <= 0) throw std::invalid_argument("resample_uniform: N must be positive");
  if (polygon.empty()) throw std::invalid_argument("resample_uniform: empty polygon");

  const std::size_t s = canonical_start(polygon);
  Polygon ring;
  ring.reserve(polygon.size());
  for (std::size_t i = 0; i < polygon.size(); ++i) ring.push_back(polygon[(s + i) % polygon.size()]);
  if (signed_area(ring) < 0.0) std::reverse(ring.begin() + 1, ring.end());

  const std::size_t m = ring.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + norm(ring[(i + 1) % m] - ring[i]);
  const double total = cum[m];
  if (!(total > 0.0)) throw std::invalid_argument("resample_uniform: zero perimeter");

  Polygon out;
  out.reserve(static_cast<std::size_t>(n_points));
  std::size_t seg = 0;
  for (int k = 0; k < n_points; ++k) {
    const double target = total * k / n_points;
    while (seg + 1 < m && cum[seg + 1] <= target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? (target - cum[seg]) / len : 0.0;
    const Point2 a = ring[seg];
    const Point2 b = ring[(seg + 1) % m];
    out.push_back(a + t * (b - a));
  }
  return out;
}

/// Binarize, label, score, filter, trace and resample. Grids are at
/// `stride` pixels per cell; emitted points are in image pixels.
inline std::vector<BoundaryProposal> generate_proposals(const Grid<double>& dist, const Grid<double>& cls,
                                                        const Thresholds& th, int n_points,
                                                        double stride = 1.0) {
  if (dist.rows() != cls.rows() || dist.cols() != cls.cols())
    throw std::invalid_argument("generate_proposals: grid sizes differ");

  const Components comps = connected_components(binarize_distance(dist, th.th_d));
  std::vector<double> scores;
  scores.reserve(comps.regions.size());
  for (const Region& r : comps.regions) scores.push_back(score_region(r, cls));
  const auto keep = filter_candidates(comps.regions, scores, th.th_s, min_region_pixels(n_points));

  std::vector<BoundaryProposal> out;
  for (std::size_t i : keep) {
    const Region& reg = comps.regions[i];
    Polygon contour = trace_contour(reg, comps.labels);
    for (Point2& p : contour) p = stride * p;
    if (contour.size() < 3 || signed_area(contour) <= 0.0) continue;
    if (perimeter(contour) < 2.0 * n_points) continue;
    Polygon points = resample_uniform(contour, n_points);
    if (signed_area(points) <= 0.0) continue;
    out.push_back({std::move(points), scores[i], reg.id});
  }
  return out;
}

inline ScoredPolygon to_scored(const BoundaryProposal& p) { return {p.points, p.score}; }

}  // namespace bplab
