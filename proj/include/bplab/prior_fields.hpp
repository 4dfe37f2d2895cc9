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

// Ground-truth priors computed from polygon annotations: instance raster,
// nearest-boundary map, direction field, normalized distance field and the
// text/non-text classification map.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bplab/geometry.hpp"
#include "bplab/grid.hpp"
#include "bplab/polygon_io.hpp"

namespace bplab {

struct PolygonAnnotation {
  Polygon vertices;
  bool is_ignore = false;
  friend bool operator==(const PolygonAnnotation&, const PolygonAnnotation&) = default;
};

/// Per-pixel priors. Background pixels carry dist = 0 and dir = (0, 0).
struct PriorMaps {
  Grid<double> cls;
  Grid<double> dist;
  Grid<double> dir_x;
  Grid<double> dir_y;
  Grid<std::uint8_t> ignore;  // 1 on pixels of ignore-flagged instances
};

struct InstanceRaster {
  Grid<int> labels;            // 0 = background, i + 1 = annotation i
  std::vector<int> skipped;    // ids dropped as degenerate (area < 1 px^2)
  std::vector<int> overlapped; // ids that overwrote pixels of an earlier id
};

struct BoundaryRef {
  int row = 0;
  int col = 0;
  friend bool operator==(const BoundaryRef&, const BoundaryRef&) = default;
};

struct DistanceField {
  Grid<double> dist;
  std::vector<double> scale;    // InstanceScale L per id (index 0 unused)
  std::vector<std::uint8_t> thin;  // 1 when L == 0 for a non-empty instance
};

/// Clips to the image rectangle and orients counter-clockwise. Returns false
/// when fewer than three vertices survive.
inline bool normalize_annotation(PolygonAnnotation& ann, double width, double height) {
  Polygon clipped = clip_to_rect(ann.vertices, width, height);
  // Drop consecutive duplicates introduced by clipping.
  Polygon out;
  for (const Point2& p : clipped)
    if (out.empty() || norm(p - out.back()) > 1e-9) out.push_back(p);
  while (out.size() > 1 && norm(out.front() - out.back()) <= 1e-9) out.pop_back();
  if (out.size() < 3) return false;
  make_ccw(out);
  ann.vertices = std::move(out);
  return true;
}

/// Marks every pixel whose center lies inside polygon i (even-odd rule) with
/// id i + 1. Later polygons overwrite earlier ones.
inline InstanceRaster rasterize_instances(std::span<const PolygonAnnotation> polygons, Size2 size) {
  InstanceRaster out{Grid<int>(size.rows, size.cols, 0), {}, {}};
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const Polygon& poly = polygons[i].vertices;
    if (poly.size() < 3 || area(poly) < 1.0) {
      out.skipped.push_back(id);
      continue;
    }
    const Box box = bounding_box(poly);
    const int r0 = std::max(0, static_cast<int>(std::floor(box.y0 - 0.5)));
    const int r1 = std::min(size.rows - 1, static_cast<int>(std::ceil(box.y1 - 0.5)));
    bool overlap = false;
    std::vector<double> xs;
    for (int r = r0; r <= r1; ++r) {
      const double yc = r + 0.5;
      xs.clear();
      const std::size_t n = poly.size();
      for (std::size_t a = 0, b = n - 1; a < n; b = a++) {
        const Point2 pa = poly[a];
        const Point2 pb = poly[b];
        if ((pa.y > yc) != (pb.y > yc))
          xs.push_back((pb.x - pa.x) * (yc - pa.y) / (pb.y - pa.y) + pa.x);
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        // Centers strictly left of the right crossing and at/after the left one,
        // matching the ray-casting predicate (p.x < x_cross toggles).
        const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
        int c1 = static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1;
        c1 = std::min(c1, size.cols - 1);
        for (int c = c0; c <= c1; ++c) {
          int& cell = out.labels(r, c);
          if (cell != 0 && cell != id) overlap = true;
          cell = id;
        }
      }
    }
    if (overlap) out.overlapped.push_back(id);
  }
  return out;
}

/// A text pixel 4-adjacent to a differently labeled pixel or to the image border.
inline bool is_boundary_pixel(const Grid<int>& labels, int r, int c) {
  const int id = labels(r, c);
  if (id == 0) return false;
  constexpr int dr[4] = {-1, 1, 0, 0};
  constexpr int dc[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const int rr = r + dr[k];
    const int cc = c + dc[k];
    if (!labels.in_bounds(rr, cc) || labels(rr, cc) != id) return true;
  }
  return false;
}

inline Grid<std::uint8_t> boundary_mask(const Grid<int>& labels) {
  Grid<std::uint8_t> mask(labels.rows(), labels.cols(), 0);
  for (int r = 0; r < labels.rows(); ++r)
    for (int c = 0; c < labels.cols(); ++c) mask(r, c) = is_boundary_pixel(labels, r, c) ? 1 : 0;
  return mask;
}

/// Nearest boundary pixel of the pixel's own instance (Euclidean). Ties are
/// broken by smallest row, then smallest column. Background maps to itself.
///
/// Searches square rings of growing Chebyshev radius around each pixel and
/// stops once the ring radius alone exceeds the best distance found.
inline Grid<BoundaryRef> nearest_boundary(const Grid<int>& labels) {
  const int rows = labels.rows();
  const int cols = labels.cols();
  const Grid<std::uint8_t> edge = boundary_mask(labels);
  Grid<BoundaryRef> out(rows, cols);

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out(r, c) = {r, c};
      const int id = labels(r, c);
      if (id == 0 || edge(r, c)) continue;

      long best_d2 = -1;
      BoundaryRef best{r, c};
      auto consider = [&](int rr, int cc) {
        if (!labels.in_bounds(rr, cc) || labels(rr, cc) != id || !edge(rr, cc)) return;
        const long d2 = static_cast<long>(rr - r) * (rr - r) + static_cast<long>(cc - c) * (cc - c);
        if (best_d2 < 0 || d2 < best_d2 || (d2 == best_d2 && (rr < best.row || (rr == best.row && cc < best.col)))) {
          best_d2 = d2;
          best = {rr, cc};
        }
      };
      const int max_radius = std::max(rows, cols);
      for (int rad = 1; rad <= max_radius; ++rad) {
        if (best_d2 >= 0 && static_cast<long>(rad) * rad > best_d2) break;
        for (int dc = -rad; dc <= rad; ++dc) {
          consider(r - rad, c + dc);
          consider(r + rad, c + dc);
        }
        for (int dr = -rad + 1; dr <= rad - 1; ++dr) {
          consider(r + dr, c - rad);
          consider(r + dr, c + rad);
        }
      }
      out(r, c) = best;
    }
  }
  return out;
}

/// Unit vector from each text pixel toward its nearest boundary pixel.
/// Background and on-boundary pixels get (0, 0).
inline std::pair<Grid<double>, Grid<double>> compute_direction_field(const Grid<int>& labels,
                                                                     const Grid<BoundaryRef>& nearest) {
  Grid<double> dx(labels.rows(), labels.cols(), 0.0);
  Grid<double> dy(labels.rows(), labels.cols(), 0.0);
  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      if (labels(r, c) == 0) continue;
      const BoundaryRef b = nearest(r, c);
      const double vx = b.col - c;
      const double vy = b.row - r;
      const double len = std::hypot(vx, vy);
      if (len == 0.0) continue;
      dx(r, c) = vx / len;
      dy(r, c) = vy / len;
    }
  }
  return {std::move(dx), std::move(dy)};
}

inline std::pair<Grid<double>, Grid<double>> compute_direction_field(const Grid<int>& labels) {
  return compute_direction_field(labels, nearest_boundary(labels));
}

/// Distance to the nearest boundary pixel divided by the instance's maximum
/// such distance. Instances with L == 0 are flagged thin and left at zero.
inline DistanceField compute_distance_field(const Grid<int>& labels, const Grid<BoundaryRef>& nearest) {
  int max_id = 0;
  for (int v : labels.values()) max_id = std::max(max_id, v);

  DistanceField out{Grid<double>(labels.rows(), labels.cols(), 0.0),
                    std::vector<double>(static_cast<std::size_t>(max_id) + 1, 0.0),
                    std::vector<std::uint8_t>(static_cast<std::size_t>(max_id) + 1, 0)};
  std::vector<int> count(static_cast<std::size_t>(max_id) + 1, 0);

  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      const int id = labels(r, c);
      if (id == 0) continue;
      const BoundaryRef b = nearest(r, c);
      const double d = std::hypot(static_cast<double>(b.col - c), static_cast<double>(b.row - r));
      out.dist(r, c) = d;
      out.scale[id] = std::max(out.scale[id], d);
      ++count[id];
    }
  }
  for (int id = 1; id <= max_id; ++id)
    if (count[id] > 0 && out.scale[id] == 0.0) out.thin[id] = 1;

  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      const int id = labels(r, c);
      if (id == 0) continue;
      const double L = out.scale[id];
      out.dist(r, c) = L > 0.0 ? out.dist(r, c) / L : 0.0;
    }
  }
  return out;
}

inline DistanceField compute_distance_field(const Grid<int>& labels) {
  return compute_distance_field(labels, nearest_boundary(labels));
}

inline Grid<double> compute_classification_map(const Grid<int>& labels) {
  Grid<double> cls(labels.rows(), labels.cols(), 0.0);
  for (int r = 0; r < labels.rows(); ++r)
    for (int c = 0; c < labels.cols(); ++c) cls(r, c) = labels(r, c) != 0 ? 1.0 : 0.0;
  return cls;
}

inline Grid<std::uint8_t> compute_ignore_mask(const Grid<int>& labels,
                                              std::span<const PolygonAnnotation> polygons) {
  Grid<std::uint8_t> mask(labels.rows(), labels.cols(), 0);
  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      const int id = labels(r, c);
      if (id > 0 && polygons[static_cast<std::size_t>(id) - 1].is_ignore) mask(r, c) = 1;
    }
  }
  return mask;
}

/// Everything the training losses need for one image at one raster scale.
struct FieldTargets {
  PriorMaps maps;
  InstanceRaster raster;
  std::vector<double> scale;      // InstanceScale per id
  std::vector<int> pixel_count;   // |GT_p| per id
};

/// Builds targets on a grid of `size` after scaling annotation coordinates by
/// 1 / stride. Annotations must already be normalized.
inline FieldTargets compute_field_targets(std::span<const PolygonAnnotation> annotations, Size2 size,
                                          double stride = 1.0) {
  std::vector<PolygonAnnotation> scaled(annotations.begin(), annotations.end());
  if (stride != 1.0)
    for (auto& a : scaled)
      for (auto& p : a.vertices) p = (1.0 / stride) * p;

  FieldTargets t;
  t.raster = rasterize_instances(scaled, size);
  const Grid<int>& labels = t.raster.labels;
  const Grid<BoundaryRef> nearest = nearest_boundary(labels);
  auto [dx, dy] = compute_direction_field(labels, nearest);
  DistanceField df = compute_distance_field(labels, nearest);

  t.maps.cls = compute_classification_map(labels);
  t.maps.dist = std::move(df.dist);
  t.maps.dir_x = std::move(dx);
  t.maps.dir_y = std::move(dy);
  t.maps.ignore = compute_ignore_mask(labels, scaled);
  t.scale = std::move(df.scale);
  t.scale.resize(scaled.size() + 1, 0.0);
  t.pixel_count.assign(scaled.size() + 1, 0);
  for (int v : labels.values())
    if (v > 0) ++t.pixel_count[v];
  return t;
}

// ---------------------------------------------------------------------------
// Ground-truth text format: one instance per line, "x1,y1,...,xk,yk[,#ignore]".

inline PolygonAnnotation parse_gt_line(std::string_view line) {
  PolygonAnnotation ann;
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t next = line.find(',', pos);
    if (next == std::string_view::npos) next = line.size();
    std::string_view tok = line.substr(pos, next - pos);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
      tok.remove_suffix(1);
    if (tok == "#ignore") {
      if (next != line.size()) throw std::invalid_argument("'#ignore' must be the last field");
      ann.is_ignore = true;
    } else {
      values.push_back(detail::parse_double(tok));
    }
    pos = next + 1;
  }
  if (values.size() % 2 != 0) throw std::invalid_argument("odd number of coordinates");
  if (values.size() < 6) throw std::invalid_argument("polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < values.size(); i += 2) ann.vertices.push_back({values[i], values[i + 1]});
  return ann;
}

inline std::string format_gt_line(const PolygonAnnotation& ann) {
  std::string s;
  for (std::size_t i = 0; i < ann.vertices.size(); ++i) {
    if (i) s += ',';
    s += detail::fmt(ann.vertices[i].x) + ',' + detail::fmt(ann.vertices[i].y);
  }
  if (ann.is_ignore) s += ",#ignore";
  return s;
}

inline std::vector<PolygonAnnotation> read_gt_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground-truth file " + path);
  std::vector<PolygonAnnotation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_gt_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_gt_file(const std::string& path, std::span<const PolygonAnnotation> anns) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ground-truth file " + path);
  for (const auto& a : anns) out << format_gt_line(a) << '\n';
}

}  // namespace bplab
