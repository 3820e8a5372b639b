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

// The assembled network. Per sample:
//   clips -> sample_video -> video GRU -+
//                                       +-> co-attention -> V^, Q^
//   tokens ------------> query GRU -----+
//   V^ -> grid maps A_C, A_B
//   V^, Q^ -> fine encoders -> V~, Q~ -> gated interaction -> A-
//   A-, A_B, A_C -> fuse -> comparison blocks -> ranker -> logits
//
// The comparison blocks use batch normalization, so training runs the
// front of the network per sample and the comparison over the whole batch.
//
// Ablations:
//   use_fine_grained = false: V~ = V^, Q~ = Q^ (no fine.* parameters)
//   use_interaction  = false: A- = [A_C | A_B] (no interact.* or fine.*
//                             parameters, since nothing would read them)
//   use_comparison   = false: the ranker reads A- (2C) directly

#include <cstdint>
#include <string>
#include <vector>

#include "mgpn/coarse_encoding.hpp"
#include "mgpn/coattention.hpp"
#include "mgpn/comparison.hpp"
#include "mgpn/config.hpp"
#include "mgpn/fine_grained.hpp"
#include "mgpn/interaction.hpp"
#include "mgpn/proposal_map.hpp"
#include "mgpn/tensor.hpp"

namespace mgpn {

struct Model {
  ModelConfig config;  // feature_dim resolved (> 0)
  ParamStore params;
  ParamStore buffers;  // batch-norm running statistics
};

/// Parameter layout for a config (all zero). feature_dim must be > 0.
Model build_model(const ModelConfig& config);
/// build_model plus seeded initialization. Initial values are rounded to
/// float32 so a saved checkpoint reloads them exactly.
Model init_model(const ModelConfig& config, std::uint64_t seed);

bool uses_fine_encoders(const ModelConfig& config);

struct SampleInput {
  const Mat* clip_feats = nullptr;  // T_V x D_v
  Mat tokens;                       // L x word_dim, zero rows at padding
  std::vector<bool> mask;
  double duration = 0.0;
};

struct SampleCache {
  Mat sampled;
  BiGruCache video_gru, query_gru;
  EncodedVideo video;
  EncodedQuery query;
  CoattentionCache coattn;
  CoattentionOutput fused;
  FineVideoCache fine_video_cache;
  FineQueryCache fine_query_cache;
  FineVideo fine_video;
  FineQuery fine_query;
  ContentArgmax argmax;
  MomentFeatureMaps maps;
  QueryGateCache query_gate;
  GateCache video_gate;
  Mat aligned;
  Mat fuse_pre;
};

/// Everything up to the comparison input: A^ (C channels) when comparison
/// is on, otherwise A- (2C channels). Zero at invalid blocks.
Mat forward_front(const Model& model, const SampleInput& input, const CandidateGrid& grid,
                  SampleCache* cache = nullptr);
/// Accumulates parameter gradients for d(front output).
void backward_front(const Model& model, const SampleInput& input, const CandidateGrid& grid,
                    const SampleCache& cache, const Mat& d_front, ParamStore& grads);

/// Evaluation-mode logits ((T*T), zero at invalid blocks).
Vec predict_logits(const Model& model, const SampleInput& input, const CandidateGrid& grid);
ScoreMap predict_scores(const Model& model, const SampleInput& input, const CandidateGrid& grid);

struct BatchForward {
  std::vector<SampleCache> samples;
  std::vector<Mat> fronts;
  CompareBatchCache compare;
  std::vector<Mat> compared;  // ranker inputs
  std::vector<Vec> logits;
};

/// Training-mode forward over a batch (batch-norm statistics from the
/// batch). Running statistics update only when `update_buffers`.
BatchForward forward_batch_train(Model& model, const std::vector<SampleInput>& batch,
                                 const CandidateGrid& grid, bool update_buffers);
/// Accumulates parameter gradients given d logits per sample.
void backward_batch(const Model& model, const std::vector<SampleInput>& batch,
                    const CandidateGrid& grid, const BatchForward& forward,
                    const std::vector<Vec>& d_logits, ParamStore& grads);

struct ParamGroup {
  std::string name;  // module prefix
  std::size_t count = 0;
};

/// Learnable element counts grouped by the first two name components
/// ("video.proj", "compare.block0", ...), in parameter order.
std::vector<ParamGroup> param_breakdown(const ParamStore& params);

}  // namespace mgpn
