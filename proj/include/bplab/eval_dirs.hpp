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

// Evaluation of a prediction directory against a ground-truth directory.

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "bplab/eval.hpp"
#include "bplab/polygon_io.hpp"
#include "bplab/prior_fields.hpp"

namespace bplab {

struct DirectoryEval {
  EvalReport report;
  std::vector<std::string> missing_predictions;  // ground truth with no prediction file (scored as empty)
  std::vector<std::string> unmatched_predictions;  // prediction files with no ground truth (not scored)
};

inline std::set<std::string> txt_stems(const std::filesystem::path& dir) {
  std::set<std::string> out;
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") out.insert(e.path().stem().string());
  return out;
}

inline DirectoryEval evaluate_directories(const std::filesystem::path& gt_dir, const std::filesystem::path& pred_dir,
                                          double iou_threshold = 0.5) {
  DirectoryEval out;
  out.report.iou_threshold = iou_threshold;
  const std::set<std::string> gts = txt_stems(gt_dir);
  std::set<std::string> preds = txt_stems(pred_dir);
  preds.erase("errors");
  for (const auto& id : gts) {
    const auto anns = read_gt_file((gt_dir / (id + ".txt")).string());
    std::vector<ScoredPolygon> dets;
    if (preds.count(id))
      dets = read_scored_file((pred_dir / (id + ".txt")).string());
    else
      out.missing_predictions.push_back(id);
    out.report.add(id, match_detections(dets, anns, iou_threshold));
  }
  std::set_difference(preds.begin(), preds.end(), gts.begin(), gts.end(), std::back_inserter(out.unmatched_predictions));
  return out;
}

inline void write_file_report(std::ostream& os, const DirectoryEval& e) {
  for (const auto& id : e.missing_predictions) os << "missing prediction: " << id << ".txt (scored as no detections)\n";
  for (const auto& id : e.unmatched_predictions) os << "prediction without ground truth: " << id << ".txt (ignored)\n";
}

}  // namespace bplab
