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

// Polygon-level detection evaluation: exact polygon IoU, greedy one-to-one
// matching, precision / recall / F-measure.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "bplab/geometry.hpp"
#include "bplab/polygon_io.hpp"
#include "bplab/prior_fields.hpp"

namespace bplab {

namespace detail {

// Even-odd coverage areas on a fine lattice; only used for self-intersecting input.
inline std::array<double, 3> raster_areas(std::span<const Point2> a, std::span<const Point2> b) {
  const Box ba = bounding_box(a);
  const Box bb = bounding_box(b);
  const double x0 = std::min(ba.x0, bb.x0), y0 = std::min(ba.y0, bb.y0);
  const double x1 = std::max(ba.x1, bb.x1), y1 = std::max(ba.y1, bb.y1);
  const double step = std::max({x1 - x0, y1 - y0, 1e-9}) / 400.0;
  double in_a = 0, in_b = 0, in_both = 0;
  for (double y = y0 + 0.5 * step; y < y1; y += step) {
    for (double x = x0 + 0.5 * step; x < x1; x += step) {
      const bool pa = contains(a, {x, y});
      const bool pb = contains(b, {x, y});
      in_a += pa;
      in_b += pb;
      in_both += pa && pb;
    }
  }
  const double cell = step * step;
  return {in_a * cell, in_b * cell, in_both * cell};
}

}  // namespace detail

/// Area of A intersect B for simple polygons: both are triangulated and the
/// convex triangle pairs are clipped exactly. Returns std::nullopt if either
/// polygon cannot be triangulated.
inline std::optional<double> intersection_area(std::span<const Point2> a, std::span<const Point2> b) {
  const auto ta = triangulate(a);
  const auto tb = triangulate(b);
  if (!ta || !tb) return std::nullopt;
  double total = 0.0;
  for (const Triangle& s : *ta) {
    const Box bs = bounding_box(s);
    for (const Triangle& t : *tb) {
      if (!bs.overlaps(bounding_box(t))) continue;
      total += area(clip_convex(s, t));
    }
  }
  return total;
}

/// Intersection over union; zero for degenerate input.
inline double polygon_iou(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  if (!bounding_box(a).overlaps(bounding_box(b))) return 0.0;
  if (is_simple(a) && is_simple(b)) {
    const double area_a = area(a);
    const double area_b = area(b);
    if (area_a <= 1e-12 || area_b <= 1e-12) return 0.0;
    if (auto inter = intersection_area(a, b)) {
      const double uni = area_a + area_b - *inter;
      return uni > 0.0 ? std::clamp(*inter / uni, 0.0, 1.0) : 0.0;
    }
  }
  const auto [ra, rb, both] = detail::raster_areas(a, b);
  const double uni = ra + rb - both;
  return uni > 0.0 ? both / uni : 0.0;
}

struct MatchPair {
  int detection = 0;
  int ground_truth = 0;
  double iou = 0.0;
};

struct ImageMatch {
  std::vector<MatchPair> pairs;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  int ignored_detections = 0;
  int care_ground_truths = 0;
  int counted_detections = 0;
};

/// Greedy one-to-one matching in descending score order (index ascending on
/// ties). A detection matches the unmatched care ground truth of highest IoU
/// when that IoU reaches the threshold. Unmatched detections that reach the
/// threshold against an ignore-flagged ground truth are dropped from counts.
inline ImageMatch match_detections(std::span<const ScoredPolygon> detections,
                                   std::span<const PolygonAnnotation> ground_truths,
                                   double iou_threshold = 0.5) {
  ImageMatch m;
  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<char> taken(ground_truths.size(), 0);
  for (const auto& g : ground_truths) m.care_ground_truths += g.is_ignore ? 0 : 1;

  for (int d : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (ground_truths[g].is_ignore || taken[g]) continue;
      const double iou = polygon_iou(detections[d].points, ground_truths[g].vertices);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      taken[best] = 1;
      m.pairs.push_back({d, best, best_iou});
      ++m.true_positives;
      ++m.counted_detections;
      continue;
    }
    bool on_ignore = false;
    for (const auto& g : ground_truths) {
      if (g.is_ignore && polygon_iou(detections[d].points, g.vertices) >= iou_threshold) {
        on_ignore = true;
        break;
      }
    }
    if (on_ignore) {
      ++m.ignored_detections;
    } else {
      ++m.false_positives;
      ++m.counted_detections;
    }
  }
  m.false_negatives = m.care_ground_truths - m.true_positives;
  return m;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

inline PRF prf_from_counts(long tp, long fp, long fn) {
  PRF r;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double s = r.precision + r.recall;
  r.f_measure = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double iou_threshold = 0.5;
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
  std::map<std::string, ImageMatch> per_image;
  std::vector<double> mean_energy_per_iteration;

  void add(const std::string& image_id, ImageMatch m) {
    true_positives += m.true_positives;
    false_positives += m.false_positives;
    false_negatives += m.false_negatives;
    per_image[image_id] = std::move(m);
    const PRF p = prf_from_counts(true_positives, false_positives, false_negatives);
    precision = p.precision;
    recall = p.recall;
    f_measure = p.f_measure;
  }

  /// Plain key = value summary followed by a per-image table.
  void write(std::ostream& os) const {
    os << "iou_threshold = " << iou_threshold << '\n'
       << "precision = " << precision << '\n'
       << "recall = " << recall << '\n'
       << "f_measure = " << f_measure << '\n'
       << "true_positives = " << true_positives << '\n'
       << "false_positives = " << false_positives << '\n'
       << "false_negatives = " << false_negatives << '\n';
    if (!mean_energy_per_iteration.empty()) {
      os << "mean_energy_per_iteration =";
      for (double e : mean_energy_per_iteration) os << ' ' << e;
      os << '\n';
    }
    os << "\nimage\ttp\tfp\tfn\tignored\n";
    for (const auto& [id, m] : per_image)
      os << id << '\t' << m.true_positives << '\t' << m.false_positives << '\t' << m.false_negatives
         << '\t' << m.ignored_detections << '\n';
  }
};

}  // namespace bplab
