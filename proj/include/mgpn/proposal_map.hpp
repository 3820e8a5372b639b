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

// The 2D candidate grid. Block (i, j) is the moment that starts at clip i
// and ends after clip j, i.e. [i * tau, (j + 1) * tau). Blocks with i > j
// are never valid; the sparse scheme additionally strides long moments.
// Moment maps are (T*T) x C matrices, row i*T + j, zero at invalid blocks.

#include <cstdint>
#include <vector>

#include "mgpn/config.hpp"
#include "mgpn/moment_span.hpp"
#include "mgpn/tensor.hpp"

namespace mgpn {

struct CandidateGrid {
  int T = 0;
  double tau = 0.0;  // seconds per clip
  std::vector<std::uint8_t> valid;  // T*T, row-major
  std::vector<int> blocks;          // flat indices of valid blocks, ascending

  bool is_valid(int i, int j) const {
    return valid[static_cast<std::size_t>(i * T + j)] != 0;
  }
  int count() const { return static_cast<int>(blocks.size()); }
};

/// Stride for moments of `length` clips: 1 up to the base granularity
/// G = max(1, T/4), then 2^ceil(log2(length / G)).
int sparse_stride(int length, int T);

CandidateGrid build_grid(int T, double duration, GridScheme scheme);

/// Throws ValidationError when i > j.
MomentSpan span_of_block(int i, int j, double tau);

struct MomentFeatureMaps {
  Mat content;   // A_C: max over the moment's clips
  Mat boundary;  // A_B: start clip + end clip
};

/// Per block and channel, the clip row holding the max (-1 at invalid
/// blocks). Needed to route gradients through the content map.
using ContentArgmax = std::vector<int>;

/// Max-pooled content map built with the incremental sweep
/// max(A_C[i][j-1], v_j).
Mat content_map(const Mat& fused_video, const CandidateGrid& grid,
                ContentArgmax* argmax = nullptr);
Mat boundary_map(const Mat& fused_video, const CandidateGrid& grid);
MomentFeatureMaps build_moment_maps(const Mat& fused_video, const CandidateGrid& grid,
                                    ContentArgmax* argmax = nullptr);

/// Accumulates the clip-feature gradient of both maps into d_video (T x C).
void moment_maps_backward(const CandidateGrid& grid, const ContentArgmax& argmax,
                          const Mat& d_content, const Mat& d_boundary, Mat& d_video);

double temporal_iou(const MomentSpan& a, const MomentSpan& b);

/// Zeroes every row of a (T*T) x C map that is not a valid block.
void apply_grid_mask(const CandidateGrid& grid, Mat& map);

}  // namespace mgpn
