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

// Second-pass encoders.
//
// Video: residual FFN, V~ = W2 relu(W1 V^ + b1) + b2 + V^.
//   "fine.video.ffn1.{weight,bias}" [C x C], [C]
//   "fine.video.ffn2.{weight,bias}" [C x C], [C]
// Query: one temporal convolution per n-gram size k (weights [C x C x k],
// left pad k/2, right pad k-1-k/2), channel concat, then a linear map.
//   "fine.query.conv<k>.{weight,bias}", "fine.query.out.{weight,bias}" [C x nC]

#include <vector>

#include "mgpn/tensor.hpp"

namespace mgpn {

struct FineVideo {
  Mat feats;  // T x C
};

struct FineQuery {
  Mat feats;  // L x C, padded rows zero
  std::vector<bool> mask;
};

struct FineVideoCache {
  Mat hidden_pre;  // W1 V^ + b1
};

struct FineQueryCache {
  Mat input;   // Q^ with padded rows zeroed
  Mat concat;  // L x nC
  int n_real = 0;
};

FineVideo refine_video(const Mat& fused_video, const ParamStore& params,
                       FineVideoCache* cache = nullptr);
Mat refine_video_backward(const Mat& fused_video, const FineVideoCache& cache,
                          const Mat& d_out, const ParamStore& params, ParamStore& grads);

/// Length-preserving 1D convolution over rows; weight is [C_out x C_in x k].
Mat temporal_conv(const Mat& x, const Eigen::Ref<const Mat>& weight,
                  const Eigen::Ref<const Vec>& bias, int k);
/// Returns d x; accumulates weight/bias gradients.
Mat temporal_conv_backward(const Mat& x, const Mat& d_out, const Eigen::Ref<const Mat>& weight,
                           int k, Eigen::Ref<Mat> g_weight, Eigen::Ref<Vec> g_bias);

FineQuery refine_query(const Mat& fused_query, const std::vector<bool>& mask,
                       const std::vector<int>& kernels, const ParamStore& params,
                       FineQueryCache* cache = nullptr);
Mat refine_query_backward(const FineQueryCache& cache, const Mat& d_out,
                          const std::vector<int>& kernels, const ParamStore& params,
                          ParamStore& grads);

}  // namespace mgpn
