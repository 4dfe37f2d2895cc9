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

// Contour overlays: green ground truth, blue proposals, red refined boundaries.

#include <cmath>
#include <span>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "bplab/geometry.hpp"
#include "bplab/polygon_io.hpp"
#include "bplab/prior_fields.hpp"

namespace bplab {

inline const cv::Scalar kGroundTruthColor{0, 200, 0};
inline const cv::Scalar kProposalColor{255, 80, 0};
inline const cv::Scalar kRefinedColor{0, 0, 255};

inline void draw_contour(cv::Mat& img, std::span<const Point2> poly, const cv::Scalar& color, int thickness = 1) {
  if (poly.size() < 2) return;
  std::vector<cv::Point> pts;
  pts.reserve(poly.size());
  for (const Point2& p : poly)
    pts.emplace_back(static_cast<int>(std::lround((p.x - 0.5) * 16)), static_cast<int>(std::lround((p.y - 0.5) * 16)));
  cv::polylines(img, pts, true, color, thickness, cv::LINE_AA, 4);
}

/// Copy of `image` with the three contour sets drawn over it. Ignore-flagged
/// ground truth is drawn thinner.
inline cv::Mat render_overlay(const cv::Mat& image, std::span<const PolygonAnnotation> gt,
                              std::span<const ScoredPolygon> proposals, std::span<const ScoredPolygon> refined) {
  cv::Mat out = image.channels() == 3 ? image.clone() : cv::Mat();
  if (out.empty()) cv::cvtColor(image, out, cv::COLOR_GRAY2BGR);
  for (const auto& g : gt) draw_contour(out, g.vertices, kGroundTruthColor, g.is_ignore ? 1 : 2);
  for (const auto& p : proposals) draw_contour(out, p.points, kProposalColor);
  for (const auto& r : refined) draw_contour(out, r.points, kRefinedColor, 2);
  return out;
}

}  // namespace bplab
