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

// Coarse encoders: clip features are projected to C channels by a kernel-1
// temporal convolution and average-pooled to T clips; both modalities then
// pass through stacked bidirectional GRUs with C/2 hidden units per
// direction, the two directions concatenated per step.
//
// Parameter names under a prefix P (P = "video.gru" or "query.gru"):
//   P.l<k>.<fwd|bwd>.w_ih [3H x in]  gates stacked r, z, n
//   P.l<k>.<fwd|bwd>.w_hh [3H x H]
//   P.l<k>.<fwd|bwd>.b_ih [3H],  P.l<k>.<fwd|bwd>.b_hh [3H]

#include <string>
#include <utility>
#include <vector>

#include "mgpn/tensor.hpp"

namespace mgpn {

/// Input rows [first, second) averaged into output position t:
/// [floor(t * in / out), ceil((t + 1) * in / out)).
std::pair<int, int> pool_window(int t, int in_len, int out_len);
Mat adaptive_avg_pool(const Mat& x, int out_len);
Mat adaptive_avg_pool_backward(const Mat& d_out, int in_len);

/// Projection ("video.proj.weight" [C x D_v], "video.proj.bias" [C]) then
/// pooling to T rows.
Mat sample_video(const Mat& clip_feats, const ParamStore& params, int T);
void sample_video_backward(const Mat& clip_feats, const Mat& d_sampled,
                           const ParamStore& params, ParamStore& grads);

struct GruDirectionCache {
  Mat input;   // n x in
  Mat h_prev;  // hidden state entering each step
  Mat r, z, n, gh_n;
};

struct BiGruCache {
  std::vector<GruDirectionCache> fwd, bwd;  // one per layer
};

void add_bigru_params(ParamStore& params, const std::string& prefix, int in_dim, int hidden,
                      int layers);

/// Runs over every row of x (n x in); returns n x 2H.
Mat bigru_forward(const Mat& x, const ParamStore& params, const std::string& prefix,
                  int layers, BiGruCache* cache = nullptr);
/// Returns d x; parameter gradients accumulate into grads.
Mat bigru_backward(const BiGruCache& cache, const Mat& d_out, const ParamStore& params,
                   ParamStore& grads, const std::string& prefix, int layers);

struct EncodedVideo {
  Mat feats;  // T x C
};

struct EncodedQuery {
  Mat feats;               // L x C, rows at padded positions are zero
  std::vector<bool> mask;  // length L
};

EncodedVideo encode_video(const Mat& sampled, const ParamStore& params, int layers,
                          BiGruCache* cache = nullptr);

/// The recurrence sees only the leading real tokens; padded rows of the
/// output are zero.
EncodedQuery encode_query(const Mat& token_vectors, const std::vector<bool>& mask,
                          const ParamStore& params, int layers, BiGruCache* cache = nullptr);

/// d token vectors (L x word_dim; zero at padded rows).
Mat encode_query_backward(const BiGruCache& cache, const Mat& d_feats,
                          const std::vector<bool>& mask, const ParamStore& params,
                          ParamStore& grads, int layers);

}  // namespace mgpn
