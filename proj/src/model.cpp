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

#include "mgpn/model.hpp"

#include <cmath>

#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string conv_name(int k) { return "fine.query.conv" + std::to_string(k); }

// Each H x H gate block of a recurrent matrix gets its own orthogonal draw.
void init_orthogonal(ParamStore::Entry& e, Rng& rng) {
  const auto H = static_cast<Eigen::Index>(e.shape[1]);
  MatMap w(e.data.data(), static_cast<Eigen::Index>(e.shape[0]), H);
  for (Eigen::Index g = 0; g < w.rows() / H; ++g) {
    Eigen::MatrixXd a(H, H);
    for (Eigen::Index r = 0; r < H; ++r)
      for (Eigen::Index c = 0; c < H; ++c) a(r, c) = rng.normal(0.0, 1.0);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < H; ++c)
      if (r(c, c) < 0) q.col(c) = -q.col(c);
    w.middleRows(g * H, H) = q;
  }
}

std::string group_of(const std::string& name) {
  const auto first = name.find('.');
  if (first == std::string::npos) return name;
  const auto second = name.find('.', first + 1);
  if (second == std::string::npos) return name.substr(0, first);
  return name.substr(0, second);
}

}  // namespace

bool uses_fine_encoders(const ModelConfig& config) {
  return config.use_fine_grained && config.use_interaction;
}

Model build_model(const ModelConfig& config) {
  config.validate();
  if (config.feature_dim <= 0) throw ConfigError("model.feature_dim must be resolved before building");
  Model m;
  m.config = config;
  auto& p = m.params;
  const auto C = static_cast<std::size_t>(config.C);
  const auto Dv = static_cast<std::size_t>(config.feature_dim);
  p.add("video.proj.weight", {C, Dv});
  p.add("video.proj.bias", {C});
  add_bigru_params(p, "video.gru", config.C, config.C / 2, config.gru_layers);
  add_bigru_params(p, "query.gru", config.word_dim, config.C / 2, config.gru_layers);
  p.add("coattn.query_score.weight", {1, C});
  p.add("coattn.video_score.weight", {1, C});
  if (uses_fine_encoders(config)) {
    p.add("fine.video.ffn1.weight", {C, C});
    p.add("fine.video.ffn1.bias", {C});
    p.add("fine.video.ffn2.weight", {C, C});
    p.add("fine.video.ffn2.bias", {C});
    for (int k : config.ngram_kernels) {
      p.add(conv_name(k) + ".weight", {C, C, static_cast<std::size_t>(k)});
      p.add(conv_name(k) + ".bias", {C});
    }
    p.add("fine.query.out.weight", {C, C * config.ngram_kernels.size()});
    p.add("fine.query.out.bias", {C});
  }
  if (config.use_interaction) {
    for (const char* branch : {"interact.query", "interact.video"}) {
      p.add(std::string(branch) + ".weight", {C, C});
      p.add(std::string(branch) + ".bias", {C});
    }
  }
  std::size_t rank_in = 2 * C;
  if (config.use_comparison) {
    const auto K = static_cast<std::size_t>(config.kernel);
    p.add("compare.fuse.weight", {C, 4 * C});
    p.add("compare.fuse.bias", {C});
    p.add("compare.skip.weight", {C, 2 * C});
    for (int b = 0; b < config.comparison_blocks; ++b) {
      const auto pre = block_prefix(b);
      p.add(pre + ".conv.weight", {C, C / static_cast<std::size_t>(config.groups), K, K});
      p.add(pre + ".bn.weight", {C});
      p.add(pre + ".bn.bias", {C});
      m.buffers.add(pre + ".bn.running_mean", {C});
      m.buffers.add(pre + ".bn.running_var", {C});
      m.buffers.vec(pre + ".bn.running_var").setOnes();
    }
    rank_in = C;
  }
  p.add("rank.weight", {1, rank_in});
  p.add("rank.bias", {1});
  return m;
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  Model m = build_model(config);
  Rng rng(seed);
  for (auto& e : m.params.entries()) {
    if (ends_with(e.name, ".w_hh")) {
      init_orthogonal(e, rng);
    } else if (ends_with(e.name, ".bn.weight")) {
      std::fill(e.data.begin(), e.data.end(), 1.0);
    } else if (ends_with(e.name, "bias") || ends_with(e.name, ".b_ih") ||
               ends_with(e.name, ".b_hh")) {
      std::fill(e.data.begin(), e.data.end(), 0.0);
    } else {
      const double fan_in = static_cast<double>(shape_product(e.shape) / e.shape[0]);
      const double k = 1.0 / std::sqrt(fan_in);
      for (double& v : e.data) v = rng.uniform(-k, k);
    }
    for (double& v : e.data) v = static_cast<double>(static_cast<float>(v));
  }
  return m;
}

Mat forward_front(const Model& model, const SampleInput& input, const CandidateGrid& grid,
                  SampleCache* cache) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  if (!input.clip_feats) throw ValidationError("sample has no clip features");
  SampleCache local;
  SampleCache& c = cache ? *cache : local;

  c.sampled = sample_video(*input.clip_feats, p, cfg.T);
  c.video = encode_video(c.sampled, p, cfg.gru_layers, &c.video_gru);
  c.query = encode_query(input.tokens, input.mask, p, cfg.gru_layers, &c.query_gru);
  c.fused = coattend(c.video, c.query, p, &c.coattn);
  c.maps = build_moment_maps(c.fused.fused_video, grid, &c.argmax);

  const Eigen::Index C = cfg.C;
  if (cfg.use_interaction) {
    if (uses_fine_encoders(cfg)) {
      c.fine_video = refine_video(c.fused.fused_video, p, &c.fine_video_cache);
      c.fine_query = refine_query(c.fused.fused_query, input.mask, cfg.ngram_kernels, p,
                                  &c.fine_query_cache);
    } else {
      c.fine_video = {c.fused.fused_video};
      c.fine_query = {c.fused.fused_query, input.mask};
    }
    c.aligned = align(query_branch(c.fine_query, c.maps, grid, p, &c.query_gate),
                      video_branch(c.fine_video, c.maps, grid, p, &c.video_gate));
  } else {
    c.aligned.resize(c.maps.content.rows(), 2 * C);
    c.aligned << c.maps.content, c.maps.boundary;
  }
  if (!cfg.use_comparison) return c.aligned;
  Mat out = fuse(c.aligned, c.maps, p, &c.fuse_pre);
  apply_grid_mask(grid, out);
  return out;
}

void backward_front(const Model& model, const SampleInput& input, const CandidateGrid& grid,
                    const SampleCache& c, const Mat& d_front, ParamStore& grads) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  const Eigen::Index C = cfg.C;
  const Eigen::Index cells = c.maps.content.rows();

  Mat d_content = Mat::Zero(cells, C), d_boundary = Mat::Zero(cells, C);
  Mat d_aligned;
  if (cfg.use_comparison) {
    Mat d_out = d_front;
    apply_grid_mask(grid, d_out);
    d_aligned = Mat::Zero(cells, 2 * C);
    fuse_backward(c.aligned, c.maps, c.fuse_pre, d_out, p, grads, d_aligned, d_boundary,
                  d_content);
  } else {
    d_aligned = d_front;
  }

  Mat d_fused_video = Mat::Zero(cfg.T, C);
  Mat d_fused_query = Mat::Zero(input.tokens.rows(), C);
  if (cfg.use_interaction) {
    const Mat d_q1 = d_aligned.leftCols(C), d_v2 = d_aligned.rightCols(C);
    const Vec d_qcond = gated_backward(c.maps, grid, c.query_gate, d_q1, d_boundary, d_content);
    const Vec d_vcond = gated_backward(c.maps, grid, c.video_gate, d_v2, d_boundary, d_content);
    Mat d_fine_query = Mat::Zero(input.tokens.rows(), C);
    Mat d_fine_video = Mat::Zero(cfg.T, C);
    query_branch_backward(c.query_gate, d_qcond, p, grads, d_fine_query);
    video_branch_backward(c.video_gate, d_vcond, p, grads, d_fine_video);
    if (uses_fine_encoders(cfg)) {
      d_fused_query = refine_query_backward(c.fine_query_cache, d_fine_query, cfg.ngram_kernels,
                                            p, grads);
      d_fused_video += refine_video_backward(c.fused.fused_video, c.fine_video_cache,
                                             d_fine_video, p, grads);
    } else {
      d_fused_query = d_fine_query;
      d_fused_video += d_fine_video;
    }
  } else {
    d_content += d_aligned.leftCols(C);
    d_boundary += d_aligned.rightCols(C);
  }
  apply_grid_mask(grid, d_content);
  apply_grid_mask(grid, d_boundary);
  moment_maps_backward(grid, c.argmax, d_content, d_boundary, d_fused_video);

  Mat d_video = Mat::Zero(cfg.T, C);
  Mat d_query = Mat::Zero(input.tokens.rows(), C);
  coattend_backward(c.video, c.query, c.coattn, d_fused_video, d_fused_query, p, grads, d_video,
                    d_query);
  const Mat d_sampled = bigru_backward(c.video_gru, d_video, p, grads, "video.gru", cfg.gru_layers);
  sample_video_backward(*input.clip_feats, d_sampled, p, grads);
  // Word vectors are fixed; the token gradient is dropped.
  encode_query_backward(c.query_gru, d_query, input.mask, p, grads, cfg.gru_layers);
}

Vec predict_logits(const Model& model, const SampleInput& input, const CandidateGrid& grid) {
  Mat front = forward_front(model, input, grid);
  if (model.config.use_comparison)
    front = compare(front, grid, model.params, model.buffers, model.config);
  return rank_logits(front, grid, model.params);
}

ScoreMap predict_scores(const Model& model, const SampleInput& input, const CandidateGrid& grid) {
  return scores_from_logits(predict_logits(model, input, grid), grid);
}

BatchForward forward_batch_train(Model& model, const std::vector<SampleInput>& batch,
                                 const CandidateGrid& grid, bool update_buffers) {
  BatchForward f;
  f.samples.resize(batch.size());
  f.fronts.resize(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s)
    f.fronts[s] = forward_front(model, batch[s], grid, &f.samples[s]);
  if (model.config.use_comparison) {
    f.compared = compare_batch_train(f.fronts, grid, model.params,
                                     update_buffers ? &model.buffers : nullptr, model.config,
                                     f.compare);
  } else {
    f.compared = f.fronts;
  }
  f.logits.resize(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s)
    f.logits[s] = rank_logits(f.compared[s], grid, model.params);
  return f;
}

void backward_batch(const Model& model, const std::vector<SampleInput>& batch,
                    const CandidateGrid& grid, const BatchForward& f,
                    const std::vector<Vec>& d_logits, ParamStore& grads) {
  std::vector<Mat> d_compared(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s)
    d_compared[s] = rank_backward(f.compared[s], d_logits[s], grid, model.params, grads);
  if (model.config.use_comparison)
    d_compared = compare_batch_backward(f.compare, std::move(d_compared), grid, model.params,
                                        grads, model.config);
  for (std::size_t s = 0; s < batch.size(); ++s)
    backward_front(model, batch[s], grid, f.samples[s], d_compared[s], grads);
}

std::vector<ParamGroup> param_breakdown(const ParamStore& params) {
  std::vector<ParamGroup> out;
  for (const auto& e : params.entries()) {
    const auto g = group_of(e.name);
    if (out.empty() || out.back().name != g) out.push_back({g, 0});
    out.back().count += e.data.size();
  }
  return out;
}

}  // namespace mgpn
