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

// Multi-modal co-attention. Each modality is summarized by a softmax over a
// linear score per row, and that summary gates the other modality by a
// Hadamard product followed by per-row l2 normalization.
//
// Parameters: "coattn.query_score.weight" [1 x C],
//             "coattn.video_score.weight" [1 x C].

#include <vector>

#include "mgpn/coarse_encoding.hpp"
#include "mgpn/tensor.hpp"

namespace mgpn {

inline constexpr double kNormEps = 1e-8;

struct AttendedQuery {
  Vec weights;  // length L, zero at padded positions
  Vec q_attn;   // length C
};

struct FusedVideo {
  Mat feats;  // T x C, unit rows
};

/// Softmax over the first n_real rows of linear scores w . row.
AttendedQuery attention_pool(const Mat& rows, int n_real, const Eigen::Ref<const Vec>& score_w);
/// Accumulates into d_rows and g_score_w.
void attention_pool_backward(const Mat& rows, int n_real, const AttendedQuery& pooled,
                             const Vec& d_pooled, const Eigen::Ref<const Vec>& score_w,
                             Mat& d_rows, Eigen::Ref<Vec> g_score_w);

/// u / (||u|| + eps) per row; optionally returns the row norms.
Mat normalize_rows(const Mat& u, Vec* norms = nullptr);
Mat normalize_rows_backward(const Mat& u, const Vec& norms, const Mat& d_out);

/// Throws ValidationError when every position is masked.
AttendedQuery attend_query(const EncodedQuery& query, const ParamStore& params);
FusedVideo fuse_query_to_video(const EncodedVideo& video, const Vec& q_attn);
/// Mirror branch: attention over clips, then row-normalized gating of the
/// query rows. Padded rows stay zero.
Mat fuse_video_to_query(const EncodedQuery& query, const EncodedVideo& video,
                        const ParamStore& params);

struct CoattentionCache {
  int n_real = 0;
  AttendedQuery query_attn;
  AttendedQuery video_attn;
  Mat video_product;  // q_attn (.) v_t
  Vec video_norms;
  Mat query_product;  // v_attn (.) q_j over real rows
  Vec query_norms;
};

struct CoattentionOutput {
  Mat fused_video;  // V-hat, T x C
  Mat fused_query;  // Q-hat, L x C
};

CoattentionOutput coattend(const EncodedVideo& video, const EncodedQuery& query,
                           const ParamStore& params, CoattentionCache* cache = nullptr);

void coattend_backward(const EncodedVideo& video, const EncodedQuery& query,
                       const CoattentionCache& cache, const Mat& d_fused_video,
                       const Mat& d_fused_query, const ParamStore& params, ParamStore& grads,
                       Mat& d_video, Mat& d_query);

}  // namespace mgpn
