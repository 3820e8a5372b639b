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

// Conditioned interaction. A condition vector (query: linear map of the
// channel-wise max over real tokens; video: linear map of the clip mean)
// is broadcast over the grid, multiplied into the boundary map, squashed
// by a sigmoid and used to gate the content map:
//   gate[b] = sigmoid(A_B[b] (.) cond),   out[b] = gate[b] (.) A_C[b]
// Only valid blocks are computed; the rest stay zero.
//
// Parameters: "interact.query.{weight,bias}", "interact.video.{weight,bias}"
// ([C x C], [C]).

#include <vector>

#include "mgpn/fine_grained.hpp"
#include "mgpn/proposal_map.hpp"
#include "mgpn/tensor.hpp"

namespace mgpn {

struct GateCache {
  Vec pooled;  // pre-linear summary
  Vec cond;    // broadcast condition vector
  Mat gate;    // (T*T) x C, zero at invalid blocks
};

struct QueryGateCache : GateCache {
  std::vector<int> argmax;  // token row of the max per channel
};

/// A-bar_1. Throws ValidationError when the query has no real token.
Mat query_branch(const FineQuery& query, const MomentFeatureMaps& maps,
                 const CandidateGrid& grid, const ParamStore& params,
                 QueryGateCache* cache = nullptr);
/// A-bar_2.
Mat video_branch(const FineVideo& video, const MomentFeatureMaps& maps,
                 const CandidateGrid& grid, const ParamStore& params,
                 GateCache* cache = nullptr);

/// Channel concat [first | second]; throws ValidationError on a shape mismatch.
Mat align(const Mat& query_aware, const Mat& video_aware);

/// Gate backward shared by both branches. Accumulates into d_boundary,
/// d_content; returns d cond.
Vec gated_backward(const MomentFeatureMaps& maps, const CandidateGrid& grid,
                   const GateCache& cache, const Mat& d_out, Mat& d_boundary, Mat& d_content);

/// Accumulates into d_query (L x C).
void query_branch_backward(const QueryGateCache& cache, const Vec& d_cond,
                           const ParamStore& params, ParamStore& grads, Mat& d_query);
/// Accumulates into d_video (T x C).
void video_branch_backward(const GateCache& cache, const Vec& d_cond, const ParamStore& params,
                           ParamStore& grads, Mat& d_video);

}  // namespace mgpn
