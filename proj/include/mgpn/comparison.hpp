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

// Choice comparison and ranking over the candidate grid.
//
//   fuse:    A^ = relu(W_f [A- | A_B | A_C] + b_f + W_s A-)      (1x1 convs)
//   compare: blocks of group conv (no bias) -> batch norm -> relu, with the
//            invalid blocks zeroed on the way in and after every block
//   rank:    P = mask * sigmoid(w_r . A~ + b_r)
//
// Parameters: "compare.fuse.{weight,bias}" [C x 4C], [C]
//             "compare.skip.weight" [C x 2C]
//             "compare.block<k>.conv.weight" [C x C/groups x K x K]
//             "compare.block<k>.bn.{weight,bias}" [C]
//             "rank.{weight,bias}" [1 x C_in], [1]
// Buffers:    "compare.block<k>.bn.running_{mean,var}" [C]

#include <vector>

#include "mgpn/config.hpp"
#include "mgpn/proposal_map.hpp"
#include "mgpn/tensor.hpp"

namespace mgpn {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct ScoreMap {
  Mat scores;  // T x T, zero at invalid blocks
};

Mat fuse(const Mat& aligned, const MomentFeatureMaps& maps, const ParamStore& params,
         Mat* pre_activation = nullptr);
/// Accumulates into d_aligned, d_boundary, d_content.
void fuse_backward(const Mat& aligned, const MomentFeatureMaps& maps, const Mat& pre_activation,
                   const Mat& d_out, const ParamStore& params, ParamStore& grads, Mat& d_aligned,
                   Mat& d_boundary, Mat& d_content);

/// Zero-padded 2D group convolution over a (T*T) x C_in map; weight is
/// [C_out x (C_in/groups * k * k)]. With a grid, only valid outputs are
/// computed and inputs at invalid blocks are treated as zero.
Mat group_conv2d(const Mat& x, int T, const Eigen::Ref<const Mat>& weight, int groups, int k,
                 int pad, const CandidateGrid* grid = nullptr);
/// Returns d x and accumulates into g_weight.
Mat group_conv2d_backward(const Mat& x, int T, const Mat& d_out,
                          const Eigen::Ref<const Mat>& weight, int groups, int k, int pad,
                          const CandidateGrid* grid, Eigen::Ref<Mat> g_weight);

struct BatchNormCache {
  Vec inv_std;
  std::vector<Mat> normalized;  // x-hat per sample
};

/// Per-channel statistics over the valid blocks of every map in `maps`
/// (normalized in place). Running statistics update when non-null.
void batch_norm_train(std::vector<Mat>& maps, const CandidateGrid& grid,
                      const Eigen::Ref<const Vec>& gamma, const Eigen::Ref<const Vec>& beta,
                      Vec* running_mean, Vec* running_var, BatchNormCache& cache);
void batch_norm_eval(Mat& map, const CandidateGrid& grid, const Eigen::Ref<const Vec>& gamma,
                     const Eigen::Ref<const Vec>& beta, const Eigen::Ref<const Vec>& running_mean,
                     const Eigen::Ref<const Vec>& running_var);
/// d_maps is d y on entry, d x on exit.
void batch_norm_backward(std::vector<Mat>& d_maps, const CandidateGrid& grid,
                         const BatchNormCache& cache, const Eigen::Ref<const Vec>& gamma,
                         Eigen::Ref<Vec> g_gamma, Eigen::Ref<Vec> g_beta);

struct CompareBatchCache {
  std::vector<std::vector<Mat>> inputs;       // [block][sample], masked conv input
  std::vector<std::vector<Mat>> activations;  // [block][sample], post-BN pre-relu
  std::vector<BatchNormCache> bn;
};

/// Single-sample evaluation-mode comparison (running statistics).
/// Throws ConfigError when C is not divisible by groups.
Mat compare(const Mat& fused, const CandidateGrid& grid, const ParamStore& params,
            const ParamStore& buffers, const ModelConfig& config);

/// Training-mode comparison over a batch sharing one grid. `buffers` may be
/// null to leave running statistics untouched.
std::vector<Mat> compare_batch_train(const std::vector<Mat>& fused, const CandidateGrid& grid,
                                     const ParamStore& params, ParamStore* buffers,
                                     const ModelConfig& config, CompareBatchCache& cache);
std::vector<Mat> compare_batch_backward(const CompareBatchCache& cache,
                                        std::vector<Mat> d_out, const CandidateGrid& grid,
                                        const ParamStore& params, ParamStore& grads,
                                        const ModelConfig& config);

/// (T*T) logits, zero at invalid blocks.
Vec rank_logits(const Mat& compared, const CandidateGrid& grid, const ParamStore& params);
ScoreMap rank(const Mat& compared, const CandidateGrid& grid, const ParamStore& params);
/// Returns d compared; accumulates rank.* gradients.
Mat rank_backward(const Mat& compared, const Vec& d_logits, const CandidateGrid& grid,
                  const ParamStore& params, ParamStore& grads);

ScoreMap scores_from_logits(const Vec& logits, const CandidateGrid& grid);

std::string block_prefix(int block);

}  // namespace mgpn
