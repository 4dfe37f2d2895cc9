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

// Synthetic curved-text scenes: ribbons swept along low-order polynomial
// spines, filled with glyph-like strokes over a cluttered background, plus
// the training-time augmentations (rotation, crop, flip, resize).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bplab/geometry.hpp"
#include "bplab/prior_fields.hpp"
#include "bplab/random.hpp"

namespace bplab {

struct SceneSpec {
  Size2 size{256, 256};
  int min_instances = 1;
  int max_instances = 4;
  double curvature_min = 0.0;
  double curvature_max = 1.0;
  double width_min = 20.0;   // ribbon height in px
  double width_max = 36.0;
  double length_min = 80.0;  // spine length in px
  double length_max = 200.0;
  double clutter_level = 0.5;
  int n_control_points = 20;  // instances need at least 2N boundary pixels
  std::uint64_t seed = 0;

  void validate() const {
    if (size.rows <= 0 || size.cols <= 0) throw std::invalid_argument("scene size must be positive");
    if (min_instances < 0 || max_instances < min_instances)
      throw std::invalid_argument("bad instance count range");
    if (width_min <= 0 || width_max < width_min) throw std::invalid_argument("bad ribbon width range");
    if (length_min <= 0 || length_max < length_min) throw std::invalid_argument("bad ribbon length range");
    if (curvature_min < 0 || curvature_max < curvature_min) throw std::invalid_argument("bad curvature range");
    if (clutter_level < 0 || clutter_level > 1) throw std::invalid_argument("clutter_level must lie in [0, 1]");
  }
};

struct Scene {
  cv::Mat image;  // CV_8UC3
  std::vector<PolygonAnnotation> annotations;
  int requested_instances = 0;
  int placed_instances = 0;
};

namespace detail {

struct Ribbon {
  Polygon outline;
  std::vector<Point2> spine;     // dense samples
  std::vector<Point2> normals;
  std::vector<double> widths;
};

inline Ribbon make_ribbon(Rng& rng, const SceneSpec& spec) {
  const double len = rng.uniform(spec.length_min, spec.length_max);
  const double w0 = rng.uniform(spec.width_min, spec.width_max);
  const double curv = rng.uniform(spec.curvature_min, spec.curvature_max);
  const double c2 = rng.uniform(-1.0, 1.0) * 0.35 * curv;
  const double c3 = rng.uniform(-1.0, 1.0) * 0.25 * curv;
  const double taper = rng.uniform(-0.15, 0.15);
  const double theta = rng.uniform(-std::numbers::pi / 3.0, std::numbers::pi / 3.0);
  const Point2 center{rng.uniform(0.0, spec.size.cols), rng.uniform(0.0, spec.size.rows)};
  const int per_side = rng.uniform_int(7, 15);

  const double ct = std::cos(theta), st = std::sin(theta);
  auto to_world = [&](double u, double v) {
    return Point2{center.x + ct * u - st * v, center.y + st * u + ct * v};
  };
  auto local = [&](double t) {
    const double half = 0.5 * len;
    return std::pair{t * half, half * (c2 * t * t + c3 * t * t * t)};
  };
  auto local_tangent = [&](double t) {
    const double half = 0.5 * len;
    const double du = half;
    const double dv = half * (2.0 * c2 * t + 3.0 * c3 * t * t);
    const double n = std::hypot(du, dv);
    return std::pair{du / n, dv / n};
  };

  auto side_point = [&](double t, double sign) {
    const auto [u, v] = local(t);
    const auto [tu, tv] = local_tangent(t);
    const double w = 0.5 * w0 * (1.0 + taper * t);
    return to_world(u - sign * tv * w, v + sign * tu * w);
  };

  Ribbon rb;
  for (int k = 0; k < per_side; ++k) {
    const double t = -1.0 + 2.0 * k / (per_side - 1);
    rb.outline.push_back(side_point(t, -1.0));
  }
  for (int k = per_side - 1; k >= 0; --k) {
    const double t = -1.0 + 2.0 * k / (per_side - 1);
    rb.outline.push_back(side_point(t, 1.0));
  }
  const int dense = std::max(16, static_cast<int>(len));
  for (int k = 0; k <= dense; ++k) {
    const double t = -1.0 + 2.0 * k / dense;
    const auto [u, v] = local(t);
    const auto [tu, tv] = local_tangent(t);
    rb.spine.push_back(to_world(u, v));
    rb.normals.push_back(Point2{ct * -tv - st * tu, st * -tv + ct * tu});  // rotated (-tv, tu)
    rb.widths.push_back(w0 * (1.0 + taper * t));
  }
  return rb;
}

inline cv::Scalar random_color(Rng& rng) {
  return cv::Scalar(rng.uniform_int(0, 255), rng.uniform_int(0, 255), rng.uniform_int(0, 255));
}

inline double luminance(const cv::Scalar& c) { return 0.114 * c[0] + 0.587 * c[1] + 0.299 * c[2]; }

inline cv::Point to_cv(Point2 p) {
  // Drawing uses 4 fractional bits; pixel centers sit at +0.5.
  return {static_cast<int>(std::lround((p.x - 0.5) * 16.0)), static_cast<int>(std::lround((p.y - 0.5) * 16.0))};
}

inline void draw_background(cv::Mat& img, Rng& rng, double clutter) {
  const cv::Scalar a = random_color(rng);
  const cv::Scalar b = random_color(rng);
  const bool vertical = rng.bernoulli(0.5);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const double t = vertical ? static_cast<double>(r) / img.rows : static_cast<double>(c) / img.cols;
      auto& px = img.at<cv::Vec3b>(r, c);
      for (int k = 0; k < 3; ++k) px[k] = cv::saturate_cast<uchar>(a[k] * (1 - t) + b[k] * t);
    }
  }
  const int shapes = static_cast<int>(std::lround(clutter * 14.0));
  for (int i = 0; i < shapes; ++i) {
    const cv::Scalar col = random_color(rng);
    const Point2 p{rng.uniform(0, img.cols), rng.uniform(0, img.rows)};
    switch (rng.uniform_int(0, 3)) {
      case 0: {
        const Point2 q{rng.uniform(0, img.cols), rng.uniform(0, img.rows)};
        cv::line(img, to_cv(p), to_cv(q), col, rng.uniform_int(1, 4), cv::LINE_AA, 4);
        break;
      }
      case 1:
        cv::circle(img, to_cv(p), static_cast<int>(rng.uniform(3, 30) * 16), col, rng.uniform_int(-1, 3) == 0 ? -1 : 2,
                   cv::LINE_AA, 4);
        break;
      case 2: {
        const Point2 q{p.x + rng.uniform(-40, 40), p.y + rng.uniform(-40, 40)};
        cv::rectangle(img, to_cv(p), to_cv(q), col, rng.bernoulli(0.5) ? -1 : 2, cv::LINE_AA, 4);
        break;
      }
      default:
        cv::ellipse(img, to_cv(p), cv::Size(static_cast<int>(rng.uniform(4, 40) * 16), static_cast<int>(rng.uniform(2, 12) * 16)),
                    rng.uniform(0, 180), 0, 360, col, -1, cv::LINE_AA, 4);
        break;
    }
  }
}

// A glyph is 2-4 strokes between points of a 3x3 lattice in the local frame.
inline void draw_glyphs(cv::Mat& img, const Ribbon& rb, Rng& rng, const cv::Scalar& ink) {
  const double mean_w = rb.widths[rb.widths.size() / 2];
  const int thickness = std::max(1, static_cast<int>(std::lround(mean_w / 9.0)));
  double walk = rng.uniform(0.2, 0.5) * mean_w;
  double travelled = 0.0;
  for (std::size_t k = 1; k < rb.spine.size(); ++k) {
    travelled += norm(rb.spine[k] - rb.spine[k - 1]);
    if (travelled < walk) continue;
    if (k + 2 >= rb.spine.size()) break;
    travelled = 0.0;
    const double w = rb.widths[k];
    walk = rng.uniform(0.55, 0.85) * w;
    const Point2 c = rb.spine[k];
    const Point2 n = rb.normals[k];
    const Point2 t{n.y, -n.x};
    const double gh = 0.34 * w;  // half height
    const double gw = 0.22 * w;  // half width
    auto lattice = [&](int i, int j) { return c + ((i - 1) * gw) * t + ((j - 1) * gh) * n; };
    const int strokes = rng.uniform_int(2, 4);
    for (int s = 0; s < strokes; ++s) {
      const Point2 a = lattice(rng.uniform_int(0, 2), rng.uniform_int(0, 2));
      const Point2 b = lattice(rng.uniform_int(0, 2), rng.uniform_int(0, 2));
      if (a == b) continue;
      cv::line(img, to_cv(a), to_cv(b), ink, thickness, cv::LINE_AA, 4);
    }
  }
}

}  // namespace detail

/// Deterministic scene for `spec` (the seed lives in the spec).
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(Rng::mix(spec.seed, 0x5CE7E));
  Scene scene;
  scene.image = cv::Mat(spec.size.rows, spec.size.cols, CV_8UC3, cv::Scalar(0, 0, 0));
  detail::draw_background(scene.image, rng, spec.clutter_level);

  scene.requested_instances = rng.uniform_int(spec.min_instances, spec.max_instances);
  cv::Mat occupied(spec.size.rows, spec.size.cols, CV_8U, cv::Scalar(0));
  const cv::Mat grow = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(5, 5));
  std::vector<detail::Ribbon> ribbons;

  for (int inst = 0; inst < scene.requested_instances; ++inst) {
    for (int attempt = 0; attempt < 60; ++attempt) {
      detail::Ribbon rb = detail::make_ribbon(rng, spec);
      const Box box = bounding_box(rb.outline);
      if (box.x0 < 2 || box.y0 < 2 || box.x1 > spec.size.cols - 2 || box.y1 > spec.size.rows - 2) continue;
      if (!is_simple(rb.outline)) continue;
      PolygonAnnotation ann{rb.outline, false};
      make_ccw(ann.vertices);
      const std::vector<PolygonAnnotation> one{ann};
      const auto raster = rasterize_instances(one, spec.size);
      int boundary = 0;
      for (int r = 0; r < spec.size.rows; ++r)
        for (int c = 0; c < spec.size.cols; ++c) boundary += is_boundary_pixel(raster.labels, r, c);
      if (boundary < 2 * spec.n_control_points) continue;

      cv::Mat mask(spec.size.rows, spec.size.cols, CV_8U, cv::Scalar(0));
      for (int r = 0; r < spec.size.rows; ++r)
        for (int c = 0; c < spec.size.cols; ++c)
          if (raster.labels(r, c)) mask.at<uchar>(r, c) = 1;
      cv::Mat dilated;
      cv::dilate(mask, dilated, grow);  // two pixels of clearance
      if (cv::countNonZero(dilated & occupied) > 0) continue;
      occupied |= mask;
      scene.annotations.push_back(std::move(ann));
      ribbons.push_back(std::move(rb));
      break;
    }
  }
  scene.placed_instances = static_cast<int>(scene.annotations.size());

  for (const auto& rb : ribbons) {
    const Point2 mid = rb.spine[rb.spine.size() / 2];
    const int mr = std::clamp(static_cast<int>(mid.y), 0, spec.size.rows - 1);
    const int mc = std::clamp(static_cast<int>(mid.x), 0, spec.size.cols - 1);
    const cv::Vec3b under = scene.image.at<cv::Vec3b>(mr, mc);
    const double lum = 0.114 * under[0] + 0.587 * under[1] + 0.299 * under[2];
    if (rng.bernoulli(0.5)) {
      // Faint band behind the glyphs.
      std::vector<cv::Point> pts;
      for (const Point2& p : rb.outline) pts.push_back(detail::to_cv(p));
      const cv::Scalar band = detail::random_color(rng);
      cv::Mat layer = scene.image.clone();
      cv::fillPoly(layer, std::vector<std::vector<cv::Point>>{pts}, band, cv::LINE_AA, 4);
      cv::addWeighted(layer, 0.35, scene.image, 0.65, 0.0, scene.image);
    }
    cv::Scalar ink;
    do {
      ink = detail::random_color(rng);
    } while (std::abs(detail::luminance(ink) - lum) < 90.0);
    detail::draw_glyphs(scene.image, rb, rng, ink);
  }

  cv::GaussianBlur(scene.image, scene.image, cv::Size(3, 3), 0.6);
  cv::Mat noise(scene.image.size(), CV_16SC3);
  for (int r = 0; r < noise.rows; ++r)
    for (int c = 0; c < noise.cols; ++c)
      for (int k = 0; k < 3; ++k)
        noise.at<cv::Vec3s>(r, c)[k] = static_cast<short>(std::lround(rng.normal(0.0, 4.0)));
  cv::Mat acc;
  scene.image.convertTo(acc, CV_16SC3);
  acc += noise;
  acc.convertTo(scene.image, CV_8UC3);
  return scene;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentParams {
  double angle_deg = 0.0;
  double crop_x = 0.0, crop_y = 0.0, crop_w = 0.0, crop_h = 0.0;  // after rotation
  bool flip = false;
};

struct AugmentConfig {
  int out_size = 256;
  double angle_sigma_deg = 15.0;
  double angle_limit_deg = 30.0;
  double min_crop_fraction = 0.6;
  double flip_probability = 0.5;
  int crop_retries = 10;
};

/// Gaussian angle truncated to the open interval (-limit, limit) by rejection.
inline double sample_rotation(Rng& rng, double sigma, double limit) {
  for (;;) {
    const double a = rng.normal(0.0, sigma);
    if (a > -limit && a < limit) return a;
  }
}

namespace detail {

inline std::vector<PolygonAnnotation> transform_annotations(const std::vector<PolygonAnnotation>& anns,
                                                            const cv::Matx23d& m) {
  std::vector<PolygonAnnotation> out = anns;
  for (auto& a : out)
    for (auto& p : a.vertices) {
      // Affine maps act on pixel-index coordinates (centers at integers).
      const double xi = p.x - 0.5, yi = p.y - 0.5;
      p = {m(0, 0) * xi + m(0, 1) * yi + m(0, 2) + 0.5, m(1, 0) * xi + m(1, 1) * yi + m(1, 2) + 0.5};
    }
  return out;
}

inline std::vector<PolygonAnnotation> clip_all(std::vector<PolygonAnnotation> anns, double w, double h) {
  std::vector<PolygonAnnotation> out;
  for (auto& a : anns) {
    if (!normalize_annotation(a, w, h)) continue;
    if (area(a.vertices) < 1.0) continue;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace detail

/// Applies rotation about the image center, crop, horizontal flip and a resize
/// to `out_size` square. Polygons follow the same transform and are re-clipped.
inline std::pair<cv::Mat, std::vector<PolygonAnnotation>> apply_augment(const cv::Mat& image,
                                                                         const std::vector<PolygonAnnotation>& anns,
                                                                         const AugmentParams& p, int out_size) {
  const double w = image.cols, h = image.rows;
  cv::Mat rotated;
  std::vector<PolygonAnnotation> cur = anns;
  if (p.angle_deg == 0.0) {
    rotated = image;
  } else {
    const cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(static_cast<float>((w - 1) / 2), static_cast<float>((h - 1) / 2)),
                                              p.angle_deg, 1.0);
    cv::warpAffine(image, rotated, m, image.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(0, 0, 0));
    cv::Matx23d mx;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) mx(r, c) = m.at<double>(r, c);
    cur = detail::clip_all(detail::transform_annotations(cur, mx), w, h);
  }

  double cx = p.crop_x, cy = p.crop_y, cw = p.crop_w, ch = p.crop_h;
  if (cw <= 0 || ch <= 0) {
    cx = cy = 0;
    cw = w;
    ch = h;
  }
  const cv::Rect roi(static_cast<int>(cx), static_cast<int>(cy), static_cast<int>(cw), static_cast<int>(ch));
  cv::Mat crop = rotated(roi);
  for (auto& a : cur)
    for (auto& q : a.vertices) q = q - Point2{static_cast<double>(roi.x), static_cast<double>(roi.y)};
  cur = detail::clip_all(std::move(cur), roi.width, roi.height);

  cv::Mat flipped;
  if (p.flip) {
    cv::flip(crop, flipped, 1);
    for (auto& a : cur) {
      for (auto& q : a.vertices) q.x = roi.width - q.x;
      make_ccw(a.vertices);
    }
  } else {
    flipped = crop;
  }

  cv::Mat out;
  if (flipped.cols == out_size && flipped.rows == out_size) {
    out = flipped.clone();
  } else {
    cv::resize(flipped, out, cv::Size(out_size, out_size), 0, 0, cv::INTER_LINEAR);
    const double sx = static_cast<double>(out_size) / flipped.cols;
    const double sy = static_cast<double>(out_size) / flipped.rows;
    for (auto& a : cur)
      for (auto& q : a.vertices) q = {q.x * sx, q.y * sy};
  }
  cur = detail::clip_all(std::move(cur), out_size, out_size);
  return {out, cur};
}

/// Samples augmentation parameters. The crop keeps at least one instance with
/// half its area visible when any instance exists; after `crop_retries`
/// failures the last window is accepted as is.
inline AugmentParams sample_augment(const cv::Mat& image, const std::vector<PolygonAnnotation>& anns, Rng& rng,
                                    const AugmentConfig& cfg) {
  AugmentParams p;
  p.angle_deg = sample_rotation(rng, cfg.angle_sigma_deg, cfg.angle_limit_deg);
  const double w = image.cols, h = image.rows;
  std::vector<PolygonAnnotation> rotated = anns;
  if (p.angle_deg != 0.0) {
    const cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(static_cast<float>((w - 1) / 2), static_cast<float>((h - 1) / 2)),
                                              p.angle_deg, 1.0);
    cv::Matx23d mx;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) mx(r, c) = m.at<double>(r, c);
    rotated = detail::clip_all(detail::transform_annotations(anns, mx), w, h);
  }
  for (int attempt = 0; attempt < std::max(1, cfg.crop_retries); ++attempt) {
    const double f = rng.uniform(cfg.min_crop_fraction, 1.0);
    p.crop_w = std::floor(f * w);
    p.crop_h = std::floor(f * h);
    p.crop_x = std::floor(rng.uniform(0.0, w - p.crop_w + 1.0));
    p.crop_y = std::floor(rng.uniform(0.0, h - p.crop_h + 1.0));
    p.crop_x = std::min(p.crop_x, w - p.crop_w);
    p.crop_y = std::min(p.crop_y, h - p.crop_h);
    if (rotated.empty()) break;
    bool keeps_one = false;
    const Polygon window{{p.crop_x, p.crop_y}, {p.crop_x + p.crop_w, p.crop_y},
                         {p.crop_x + p.crop_w, p.crop_y + p.crop_h}, {p.crop_x, p.crop_y + p.crop_h}};
    for (const auto& a : rotated) {
      if (a.is_ignore) continue;
      const double full = area(a.vertices);
      if (full > 0 && area(clip_convex(a.vertices, window)) >= 0.5 * full) {
        keeps_one = true;
        break;
      }
    }
    if (keeps_one) break;
  }
  p.flip = rng.bernoulli(cfg.flip_probability);
  return p;
}

inline std::pair<cv::Mat, std::vector<PolygonAnnotation>> augment(const cv::Mat& image,
                                                                   const std::vector<PolygonAnnotation>& anns,
                                                                   std::uint64_t seed, const AugmentConfig& cfg = {}) {
  Rng rng(Rng::mix(seed, 0xA06));
  const AugmentParams p = sample_augment(image, anns, rng, cfg);
  return apply_augment(image, anns, p, cfg.out_size);
}

// ---------------------------------------------------------------------------
// Dataset layout: images/{id}.png, gts/{id}.txt, meta.txt

inline std::string sample_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05d", index);
  return buf;
}

inline std::string describe(const SceneSpec& s) {
  std::ostringstream os;
  os << "rows = " << s.size.rows << "\ncols = " << s.size.cols << "\nmin_instances = " << s.min_instances
     << "\nmax_instances = " << s.max_instances << "\ncurvature_min = " << s.curvature_min
     << "\ncurvature_max = " << s.curvature_max << "\nwidth_min = " << s.width_min << "\nwidth_max = " << s.width_max
     << "\nlength_min = " << s.length_min << "\nlength_max = " << s.length_max
     << "\nclutter_level = " << s.clutter_level << "\nn_control_points = " << s.n_control_points
     << "\nseed = " << s.seed << '\n';
  return os.str();
}

/// Reads a `key = value` scene description (the format `describe` writes).
/// `count` is taken from the optional `count` key. Unknown keys are errors.
inline SceneSpec parse_scene_spec(std::istream& is, int& count) {
  SceneSpec s;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto strip = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw std::invalid_argument(where + "bad number '" + value + "' for " + key);
    }
    const auto as_int = [&] { return static_cast<int>(v); };
    if (key == "rows") s.size.rows = as_int();
    else if (key == "cols") s.size.cols = as_int();
    else if (key == "min_instances") s.min_instances = as_int();
    else if (key == "max_instances") s.max_instances = as_int();
    else if (key == "curvature_min") s.curvature_min = v;
    else if (key == "curvature_max") s.curvature_max = v;
    else if (key == "width_min") s.width_min = v;
    else if (key == "width_max") s.width_max = v;
    else if (key == "length_min") s.length_min = v;
    else if (key == "length_max") s.length_max = v;
    else if (key == "clutter_level") s.clutter_level = v;
    else if (key == "n_control_points") s.n_control_points = as_int();
    else if (key == "seed") s.seed = std::stoull(value);
    else if (key == "count") count = as_int();
    else throw std::invalid_argument(where + "unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

/// Per-scene seed derived from the dataset seed.
inline std::uint64_t scene_seed(std::uint64_t dataset_seed, int index) {
  return Rng::mix(dataset_seed, static_cast<std::uint64_t>(index));
}

/// Writes `count` scenes. Returns the number of scenes that placed fewer
/// instances than requested.
inline int write_dataset(const std::filesystem::path& dir, const SceneSpec& spec, int count) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "gts");
  std::ofstream meta(dir / "meta.txt");
  if (!meta) throw std::runtime_error("cannot write " + (dir / "meta.txt").string());
  meta << describe(spec) << "count = " << count << "\n\n# id scene_seed requested placed\n";
  int short_scenes = 0;
  for (int i = 0; i < count; ++i) {
    SceneSpec s = spec;
    s.seed = scene_seed(spec.seed, i);
    const Scene scene = generate_scene(s);
    const std::string id = sample_id(i);
    if (!cv::imwrite((dir / "images" / (id + ".png")).string(), scene.image))
      throw std::runtime_error("failed to write image " + id);
    write_gt_file((dir / "gts" / (id + ".txt")).string(), scene.annotations);
    meta << id << ' ' << s.seed << ' ' << scene.requested_instances << ' ' << scene.placed_instances << '\n';
    short_scenes += scene.placed_instances < scene.requested_instances;
  }
  return short_scenes;
}

}  // namespace bplab
