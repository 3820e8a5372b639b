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

#include "mgpn/interaction.hpp"

#include "mgpn/data_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

Mat apply_gate(const MomentFeatureMaps& maps, const CandidateGrid& grid, const Vec& cond,
               Mat* gate_out) {
  const Eigen::Index C = maps.content.cols();
  Mat out = Mat::Zero(maps.content.rows(), C);
  Mat gate;
  if (gate_out) gate = Mat::Zero(maps.content.rows(), C);
  for (int b : grid.blocks) {
    for (Eigen::Index c = 0; c < C; ++c) {
      const double g = sigmoid(maps.boundary(b, c) * cond(c));
      out(b, c) = g * maps.content(b, c);
      if (gate_out) gate(b, c) = g;
    }
  }
  if (gate_out) *gate_out = std::move(gate);
  return out;
}

Vec linear(const ParamStore& params, const std::string& name, const Vec& x) {
  return params.mat(name + ".weight") * x + params.vec(name + ".bias");
}

}  // namespace

Mat query_branch(const FineQuery& query, const MomentFeatureMaps& maps, const CandidateGrid& grid,
                 const ParamStore& params, QueryGateCache* cache) {
  const int n = leading_count(query.mask);
  if (n < 1) throw ValidationError("query branch needs at least one real token");
  const Eigen::Index C = query.feats.cols();
  Vec pooled(C);
  std::vector<int> argmax(static_cast<std::size_t>(C));
  for (Eigen::Index c = 0; c < C; ++c) {
    Eigen::Index where = 0;
    pooled(c) = query.feats.col(c).head(n).maxCoeff(&where);
    argmax[static_cast<std::size_t>(c)] = static_cast<int>(where);
  }
  const Vec cond = linear(params, "interact.query", pooled);
  Mat gate;
  Mat out = apply_gate(maps, grid, cond, cache ? &gate : nullptr);
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->cond = cond;
    cache->gate = std::move(gate);
    cache->argmax = std::move(argmax);
  }
  return out;
}

Mat video_branch(const FineVideo& video, const MomentFeatureMaps& maps, const CandidateGrid& grid,
                 const ParamStore& params, GateCache* cache) {
  Vec pooled = video.feats.colwise().mean().transpose();
  const Vec cond = linear(params, "interact.video", pooled);
  Mat gate;
  Mat out = apply_gate(maps, grid, cond, cache ? &gate : nullptr);
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->cond = cond;
    cache->gate = std::move(gate);
  }
  return out;
}

Mat align(const Mat& query_aware, const Mat& video_aware) {
  if (query_aware.rows() != video_aware.rows() || query_aware.cols() != video_aware.cols())
    throw ValidationError("align: branch shapes differ");
  Mat out(query_aware.rows(), query_aware.cols() * 2);
  out << query_aware, video_aware;
  return out;
}

Vec gated_backward(const MomentFeatureMaps& maps, const CandidateGrid& grid,
                   const GateCache& cache, const Mat& d_out, Mat& d_boundary, Mat& d_content) {
  const Eigen::Index C = maps.content.cols();
  Vec d_cond = Vec::Zero(C);
  for (int b : grid.blocks) {
    for (Eigen::Index c = 0; c < C; ++c) {
      const double g = cache.gate(b, c);
      d_content(b, c) += d_out(b, c) * g;
      const double d_pre = d_out(b, c) * maps.content(b, c) * g * (1.0 - g);
      d_boundary(b, c) += d_pre * cache.cond(c);
      d_cond(c) += d_pre * maps.boundary(b, c);
    }
  }
  return d_cond;
}

void query_branch_backward(const QueryGateCache& cache, const Vec& d_cond,
                           const ParamStore& params, ParamStore& grads, Mat& d_query) {
  grads.mat("interact.query.weight").noalias() += d_cond * cache.pooled.transpose();
  grads.vec("interact.query.bias") += d_cond;
  const Vec d_pooled = params.mat("interact.query.weight").transpose() * d_cond;
  for (std::size_t c = 0; c < cache.argmax.size(); ++c)
    d_query(cache.argmax[c], static_cast<Eigen::Index>(c)) += d_pooled(static_cast<Eigen::Index>(c));
}

void video_branch_backward(const GateCache& cache, const Vec& d_cond, const ParamStore& params,
                           ParamStore& grads, Mat& d_video) {
  grads.mat("interact.video.weight").noalias() += d_cond * cache.pooled.transpose();
  grads.vec("interact.video.bias") += d_cond;
  const Vec d_pooled = params.mat("interact.video.weight").transpose() * d_cond;
  d_video.rowwise() += d_pooled.transpose() / static_cast<double>(d_video.rows());
}

}  // namespace mgpn
