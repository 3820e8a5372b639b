// Copyright 2026 The MGPN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Top-k extraction with greedy NMS, R@n IoU=m, parameter counting and the
// full evaluation pass.

#include <string>
#include <vector>

#include "mgpn/comparison.hpp"
#include "mgpn/config.hpp"
#include "mgpn/data_io.hpp"
#include "mgpn/model.hpp"

namespace mgpn {

struct Prediction {
  double score = 0.0;
  MomentSpan span;
};

/// Valid blocks by descending score (ties: earlier start, then shorter);
/// a span is dropped when its IoU with a kept span exceeds nms_threshold.
/// Returns at most k spans. Throws ValidationError when k < 1.
std::vector<Prediction> topk_predictions(const ScoreMap& scores, const CandidateGrid& grid, int k,
                                         double nms_threshold);

/// Slack for IoU >= m comparisons; clip-aligned spans often hit m exactly.
inline constexpr double kIouTolerance = 1e-9;

/// Fraction of samples whose first n predictions include a span with
/// IoU >= m against the ground truth.
double recall_at(const std::vector<std::vector<Prediction>>& predictions,
                 const std::vector<MomentSpan>& ground_truth, int n, double m);

std::size_t param_count(const ParamStore& params);

struct MetricTable {
  std::vector<int> ranks;
  std::vector<double> ious;
  std::vector<std::vector<double>> rates;  // [rank][iou]

  /// Throws std::out_of_range for an (n, m) outside the grid.
  double at(int n, double m) const;
  /// Header "R@n" columns by "IoU=m" rows, rates with four decimals.
  std::string to_text() const;
};

struct EvalResult {
  MetricTable table;
  std::vector<std::vector<Prediction>> predictions;  // per sample
};

/// Scores every sample in evaluation mode and keeps max(ranks) predictions.
EvalResult evaluate(const Model& model, const Dataset& data, const EvalConfig& config);

/// One line per kept prediction: "video_id k score start end", k from 1
/// within each sample, numbers with six decimals.
std::string prediction_dump(const Dataset& data, const EvalResult& result);

}  // namespace mgpn
