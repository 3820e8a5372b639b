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

#include "mgpn/proposal_map.hpp"

#include <algorithm>

#include "mgpn/errors.hpp"

namespace mgpn {

int sparse_stride(int length, int T) {
  const int base = std::max(1, T / 4);
  if (length <= base) return 1;
  // smallest power of two s with s * base >= length
  int stride = 1;
  while (stride * base < length) stride *= 2;
  return stride;
}

CandidateGrid build_grid(int T, double duration, GridScheme scheme) {
  if (T < 1) throw ValidationError("grid size must be >= 1");
  if (!(duration > 0.0)) throw ValidationError("duration must be positive");
  CandidateGrid g;
  g.T = T;
  g.tau = duration / T;
  g.valid.assign(static_cast<std::size_t>(T) * T, 0);
  for (int i = 0; i < T; ++i) {
    for (int j = i; j < T; ++j) {
      bool ok = true;
      if (scheme == GridScheme::kSparse) {
        const int s = sparse_stride(j - i + 1, T);
        ok = i % s == 0 && (j + 1) % s == 0;
      }
      if (ok) {
        g.valid[static_cast<std::size_t>(i * T + j)] = 1;
        g.blocks.push_back(i * T + j);
      }
    }
  }
  return g;
}

MomentSpan span_of_block(int i, int j, double tau) {
  if (i < 0 || i > j) throw ValidationError("block start must not exceed its end");
  return {i * tau, (j + 1) * tau};
}

Mat content_map(const Mat& fused_video, const CandidateGrid& grid, ContentArgmax* argmax) {
  const int T = grid.T;
  const Eigen::Index C = fused_video.cols();
  if (fused_video.rows() != T) throw ValidationError("content_map: clip count != grid size");
  Mat out = Mat::Zero(static_cast<Eigen::Index>(T) * T, C);
  if (argmax) argmax->assign(static_cast<std::size_t>(T * T * C), -1);

  Vec running(C);
  std::vector<int> where(static_cast<std::size_t>(C));
  for (int i = 0; i < T; ++i) {
    running = fused_video.row(i).transpose();
    std::fill(where.begin(), where.end(), i);
    for (int j = i; j < T; ++j) {
      if (j > i) {
        for (Eigen::Index c = 0; c < C; ++c) {
          if (fused_video(j, c) > running(c)) {
            running(c) = fused_video(j, c);
            where[static_cast<std::size_t>(c)] = j;
          }
        }
      }
      if (!grid.is_valid(i, j)) continue;
      const int row = i * T + j;
      out.row(row) = running.transpose();
      if (argmax)
        std::copy(where.begin(), where.end(),
                  argmax->begin() + static_cast<std::ptrdiff_t>(row) * C);
    }
  }
  return out;
}

Mat boundary_map(const Mat& fused_video, const CandidateGrid& grid) {
  const int T = grid.T;
  if (fused_video.rows() != T) throw ValidationError("boundary_map: clip count != grid size");
  Mat out = Mat::Zero(static_cast<Eigen::Index>(T) * T, fused_video.cols());
  for (int b : grid.blocks) {
    const int i = b / T, j = b % T;
    out.row(b) = fused_video.row(i) + fused_video.row(j);
  }
  return out;
}

MomentFeatureMaps build_moment_maps(const Mat& fused_video, const CandidateGrid& grid,
                                    ContentArgmax* argmax) {
  return {content_map(fused_video, grid, argmax), boundary_map(fused_video, grid)};
}

void moment_maps_backward(const CandidateGrid& grid, const ContentArgmax& argmax,
                          const Mat& d_content, const Mat& d_boundary, Mat& d_video) {
  const int T = grid.T;
  const Eigen::Index C = d_video.cols();
  for (int b : grid.blocks) {
    const int i = b / T, j = b % T;
    const int* src = argmax.data() + static_cast<std::ptrdiff_t>(b) * C;
    for (Eigen::Index c = 0; c < C; ++c) d_video(src[c], c) += d_content(b, c);
    d_video.row(i) += d_boundary.row(b);
    d_video.row(j) += d_boundary.row(b);
  }
}

double temporal_iou(const MomentSpan& a, const MomentSpan& b) {
  const double inter = std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
  return uni > 0.0 ? inter / uni : 0.0;
}

void apply_grid_mask(const CandidateGrid& grid, Mat& map) {
  for (std::size_t k = 0; k < grid.valid.size(); ++k)
    if (!grid.valid[k]) map.row(static_cast<Eigen::Index>(k)).setZero();
}

}  // namespace mgpn
