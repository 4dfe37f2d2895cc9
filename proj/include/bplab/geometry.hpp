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

// Planar polygon helpers.
//
// Coordinate convention used across the library: pixel (row r, col c) covers
// the unit square [c, c+1) x [r, r+1), so its center sits at (c + 0.5, r + 0.5).
// "Counter-clockwise" means a positive shoelace sum; in y-down image space this
// is the visually clockwise orientation, but only the sign matters here.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace bplab {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

using Polygon = std::vector<Point2>;

inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

/// Shoelace signed area; positive for counter-clockwise vertex order.
inline double signed_area(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

inline double area(std::span<const Point2> poly) { return std::abs(signed_area(poly)); }

inline double perimeter(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 2) return 0.0;
  double len = 0.0;
  for (std::size_t i = 0; i < n; ++i) len += norm(poly[(i + 1) % n] - poly[i]);
  return len;
}

/// Reverses the vertex order in place when the polygon is clockwise.
inline void make_ccw(Polygon& poly) {
  if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
}

/// Even-odd ray casting. Points exactly on an edge may land on either side.
inline bool contains(std::span<const Point2> poly, Point2 p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  [[nodiscard]] bool overlaps(const Box& o) const {
    return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
  }
};

inline Box bounding_box(std::span<const Point2> poly) {
  Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point2& p : poly) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

namespace detail {

inline int orientation(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  constexpr double kEps = 1e-12;
  if (v > kEps) return 1;
  if (v < -kEps) return -1;
  return 0;
}

inline bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace detail

/// True when no two non-adjacent edges touch. O(n^2).
inline bool is_simple(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = poly[i];
    const Point2 b = poly[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // shares a vertex
      if (detail::segments_intersect(a, b, poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

/// Sutherland-Hodgman clip of `subject` against a convex counter-clockwise `clip`.
inline Polygon clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  Polygon out(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % m];
    const Point2 edge = b - a;
    Polygon in = std::move(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 cur = in[i];
      const Point2 prev = in[(i + n - 1) % n];
      const double s_cur = cross(edge, cur - a);
      const double s_prev = cross(edge, prev - a);
      if (s_cur >= 0.0) {
        if (s_prev < 0.0) out.push_back(prev + (s_prev / (s_prev - s_cur)) * (cur - prev));
        out.push_back(cur);
      } else if (s_prev >= 0.0) {
        out.push_back(prev + (s_prev / (s_prev - s_cur)) * (cur - prev));
      }
    }
  }
  return out;
}

/// Clips a polygon to the axis-aligned rectangle [0, width] x [0, height].
inline Polygon clip_to_rect(std::span<const Point2> poly, double width, double height) {
  const Polygon rect{{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}};
  const bool ccw = signed_area(poly) >= 0.0;
  if (ccw) return clip_convex(poly, rect);
  Polygon rev(poly.rbegin(), poly.rend());
  Polygon out = clip_convex(rev, rect);
  std::reverse(out.begin(), out.end());
  return out;
}

using Triangle = std::array<Point2, 3>;

/// Ear-clipping triangulation of a simple polygon (either orientation).
/// Returns std::nullopt when no ear can be found, which only happens for
/// self-intersecting input.
inline std::optional<std::vector<Triangle>> triangulate(std::span<const Point2> poly) {
  std::vector<Point2> v(poly.begin(), poly.end());
  if (v.size() < 3) return std::vector<Triangle>{};
  if (signed_area(v) < 0.0) std::reverse(v.begin(), v.end());

  std::vector<Triangle> tris;
  tris.reserve(v.size() - 2);
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  auto is_ear = [&](std::size_t k) {
    const std::size_t n = idx.size();
    const Point2 a = v[idx[(k + n - 1) % n]];
    const Point2 b = v[idx[k]];
    const Point2 c = v[idx[(k + 1) % n]];
    if (cross(b - a, c - b) <= 0.0) return false;  // reflex or collinear
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k || j == (k + 1) % n || j == (k + n - 1) % n) continue;
      const Point2 p = v[idx[j]];
      if (p == a || p == b || p == c) continue;
      if (cross(b - a, p - a) >= 0.0 && cross(c - b, p - b) >= 0.0 && cross(a - c, p - c) >= 0.0)
        return false;
    }
    return true;
  };

  std::size_t guard = 0;
  while (idx.size() > 3) {
    bool clipped = false;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!is_ear(k)) continue;
      const std::size_t n = idx.size();
      tris.push_back({v[idx[(k + n - 1) % n]], v[idx[k]], v[idx[(k + 1) % n]]});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
      clipped = true;
      break;
    }
    if (!clipped) {
      // Drop collinear vertices before giving up.
      bool removed = false;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::size_t n = idx.size();
        const Point2 a = v[idx[(k + n - 1) % n]];
        const Point2 b = v[idx[k]];
        const Point2 c = v[idx[(k + 1) % n]];
        if (std::abs(cross(b - a, c - b)) <= 1e-12) {
          idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
          removed = true;
          break;
        }
      }
      if (!removed) return std::nullopt;
    }
    if (++guard > 4 * v.size() * v.size()) return std::nullopt;
  }
  if (idx.size() == 3) {
    const Triangle t{v[idx[0]], v[idx[1]], v[idx[2]]};
    if (cross(t[1] - t[0], t[2] - t[0]) > 0.0) tris.push_back(t);
  }
  return tris;
}

}  // namespace bplab
