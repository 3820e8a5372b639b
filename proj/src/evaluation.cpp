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

#include "mgpn/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "mgpn/errors.hpp"
#include "mgpn/training.hpp"

namespace mgpn {

std::vector<Prediction> topk_predictions(const ScoreMap& scores, const CandidateGrid& grid, int k,
                                         double nms_threshold) {
  if (k < 1) throw ValidationError("top-k needs k >= 1");
  struct Candidate {
    double score;
    int i, j;
  };
  std::vector<Candidate> cands;
  cands.reserve(grid.blocks.size());
  for (int b : grid.blocks) {
    const int i = b / grid.T, j = b % grid.T;
    cands.push_back({scores.scores(i, j), i, j});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<Prediction> kept;
  for (const auto& c : cands) {
    const MomentSpan span = span_of_block(c.i, c.j, grid.tau);
    bool suppressed = false;
    for (const auto& p : kept)
      if (temporal_iou(span, p.span) > nms_threshold) {
        suppressed = true;
        break;
      }
    if (suppressed) continue;
    kept.push_back({c.score, span});
    if (static_cast<int>(kept.size()) == k) break;
  }
  return kept;
}

double recall_at(const std::vector<std::vector<Prediction>>& predictions,
                 const std::vector<MomentSpan>& ground_truth, int n, double m) {
  if (predictions.size() != ground_truth.size())
    throw ValidationError("prediction and ground-truth counts differ");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const auto& p = predictions[s];
    const auto top = std::min<std::size_t>(p.size(), static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < top; ++r)
      if (temporal_iou(p[r].span, ground_truth[s]) >= m - kIouTolerance) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::size_t param_count(const ParamStore& params) { return params.element_count(); }

double MetricTable::at(int n, double m) const {
  for (std::size_t r = 0; r < ranks.size(); ++r)
    for (std::size_t c = 0; c < ious.size(); ++c)
      if (ranks[r] == n && ious[c] == m) return rates[r][c];
  throw std::out_of_range("metric (" + std::to_string(n) + ", " + std::to_string(m) +
                          ") not in table");
}

std::string MetricTable::to_text() const {
  std::string out = "metric";
  char buf[64];
  for (int n : ranks) {
    std::snprintf(buf, sizeof buf, "\tR@%d", n);
    out += buf;
  }
  out += '\n';
  for (std::size_t c = 0; c < ious.size(); ++c) {
    std::snprintf(buf, sizeof buf, "IoU=%.2f", ious[c]);
    out += buf;
    for (std::size_t r = 0; r < ranks.size(); ++r) {
      std::snprintf(buf, sizeof buf, "\t%.4f", rates[r][c]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

EvalResult evaluate(const Model& model, const Dataset& data, const EvalConfig& config) {
  config.validate();
  EvalResult result;
  const int k = *std::max_element(config.ranks.begin(), config.ranks.end());
  std::vector<MomentSpan> gts;
  for (int i = 0; i < data.size(); ++i) {
    const auto& s = data.samples()[static_cast<std::size_t>(i)];
    const auto inputs = make_inputs(data, {i});
    const CandidateGrid grid = batch_grid(model.config, s.duration);
    result.predictions.push_back(
        topk_predictions(predict_scores(model, inputs.front(), grid), grid, k,
                         config.nms_threshold));
    gts.push_back(s.gt_span);
  }
  result.table.ranks = config.ranks;
  result.table.ious = config.ious;
  for (int n : config.ranks) {
    std::vector<double> row;
    for (double m : config.ious) row.push_back(recall_at(result.predictions, gts, n, m));
    result.table.rates.push_back(std::move(row));
  }
  return result;
}

std::string prediction_dump(const Dataset& data, const EvalResult& result) {
  std::string out;
  char buf[128];
  for (std::size_t s = 0; s < result.predictions.size(); ++s) {
    const auto& id = data.samples()[s].video_id;
    int k = 0;
    for (const auto& p : result.predictions[s]) {
      std::snprintf(buf, sizeof buf, " %d %.6f %.6f %.6f\n", ++k, p.score, p.span.start_s,
                    p.span.end_s);
      out += id;
      out += buf;
    }
  }
  return out;
}

}  // namespace mgpn
