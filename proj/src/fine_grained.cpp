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

#include "mgpn/fine_grained.hpp"

#include "mgpn/data_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

Mat tap(const Eigen::Ref<const Mat>& weight, int k, int d) {
  const Eigen::Index c_in = weight.cols() / k;
  Mat w(weight.rows(), c_in);
  for (Eigen::Index ci = 0; ci < c_in; ++ci) w.col(ci) = weight.col(ci * k + d);
  return w;
}

// Output row j reads input row j - left + d for tap d.
struct TapRange {
  Eigen::Index out_begin, in_begin, count;
};

TapRange tap_range(Eigen::Index n, int k, int d) {
  const Eigen::Index shift = d - k / 2;
  const Eigen::Index out_begin = std::max<Eigen::Index>(0, -shift);
  const Eigen::Index out_end = std::min<Eigen::Index>(n, n - shift);
  return {out_begin, out_begin + shift, std::max<Eigen::Index>(0, out_end - out_begin)};
}

std::string conv_name(int k) { return "fine.query.conv" + std::to_string(k); }

}  // namespace

FineVideo refine_video(const Mat& fused_video, const ParamStore& params, FineVideoCache* cache) {
  Mat pre = fused_video * params.mat("fine.video.ffn1.weight").transpose();
  pre.rowwise() += params.vec("fine.video.ffn1.bias").transpose();
  Mat out = pre.cwiseMax(0.0) * params.mat("fine.video.ffn2.weight").transpose();
  out.rowwise() += params.vec("fine.video.ffn2.bias").transpose();
  out += fused_video;
  if (cache) cache->hidden_pre = std::move(pre);
  return {std::move(out)};
}

Mat refine_video_backward(const Mat& fused_video, const FineVideoCache& cache, const Mat& d_out,
                          const ParamStore& params, ParamStore& grads) {
  const Mat hidden = cache.hidden_pre.cwiseMax(0.0);
  grads.mat("fine.video.ffn2.weight").noalias() += d_out.transpose() * hidden;
  grads.vec("fine.video.ffn2.bias") += d_out.colwise().sum().transpose();
  Mat d_hidden = d_out * params.mat("fine.video.ffn2.weight");
  d_hidden = (cache.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
  grads.mat("fine.video.ffn1.weight").noalias() += d_hidden.transpose() * fused_video;
  grads.vec("fine.video.ffn1.bias") += d_hidden.colwise().sum().transpose();
  Mat d_in = d_out;
  d_in.noalias() += d_hidden * params.mat("fine.video.ffn1.weight");
  return d_in;
}

Mat temporal_conv(const Mat& x, const Eigen::Ref<const Mat>& weight,
                  const Eigen::Ref<const Vec>& bias, int k) {
  const Eigen::Index n = x.rows();
  Mat out(n, weight.rows());
  out.rowwise() = bias.transpose();
  for (int d = 0; d < k; ++d) {
    const auto r = tap_range(n, k, d);
    if (r.count <= 0) continue;
    out.middleRows(r.out_begin, r.count).noalias() +=
        x.middleRows(r.in_begin, r.count) * tap(weight, k, d).transpose();
  }
  return out;
}

Mat temporal_conv_backward(const Mat& x, const Mat& d_out, const Eigen::Ref<const Mat>& weight,
                           int k, Eigen::Ref<Mat> g_weight, Eigen::Ref<Vec> g_bias) {
  const Eigen::Index n = x.rows();
  Mat d_x = Mat::Zero(n, x.cols());
  g_bias += d_out.colwise().sum().transpose();
  for (int d = 0; d < k; ++d) {
    const auto r = tap_range(n, k, d);
    if (r.count <= 0) continue;
    d_x.middleRows(r.in_begin, r.count).noalias() +=
        d_out.middleRows(r.out_begin, r.count) * tap(weight, k, d);
    const Mat g_tap =
        d_out.middleRows(r.out_begin, r.count).transpose() * x.middleRows(r.in_begin, r.count);
    for (Eigen::Index ci = 0; ci < g_tap.cols(); ++ci) g_weight.col(ci * k + d) += g_tap.col(ci);
  }
  return d_x;
}

FineQuery refine_query(const Mat& fused_query, const std::vector<bool>& mask,
                       const std::vector<int>& kernels, const ParamStore& params,
                       FineQueryCache* cache) {
  const int n = leading_count(mask);
  const Eigen::Index L = fused_query.rows(), C = fused_query.cols();
  Mat input = Mat::Zero(L, C);
  input.topRows(n) = fused_query.topRows(n);

  Mat concat(L, C * static_cast<Eigen::Index>(kernels.size()));
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    const int k = kernels[b];
    concat.middleCols(static_cast<Eigen::Index>(b) * C, C) =
        temporal_conv(input, params.mat(conv_name(k) + ".weight"),
                      params.vec(conv_name(k) + ".bias"), k);
  }
  FineQuery out;
  out.feats = concat * params.mat("fine.query.out.weight").transpose();
  out.feats.rowwise() += params.vec("fine.query.out.bias").transpose();
  out.feats.bottomRows(L - n).setZero();
  out.mask = mask;
  if (cache) {
    cache->input = std::move(input);
    cache->concat = std::move(concat);
    cache->n_real = n;
  }
  return out;
}

Mat refine_query_backward(const FineQueryCache& cache, const Mat& d_out,
                          const std::vector<int>& kernels, const ParamStore& params,
                          ParamStore& grads) {
  const int n = cache.n_real;
  const Eigen::Index L = d_out.rows(), C = cache.input.cols();
  Mat d_feats = Mat::Zero(L, d_out.cols());
  d_feats.topRows(n) = d_out.topRows(n);

  grads.mat("fine.query.out.weight").noalias() += d_feats.transpose() * cache.concat;
  grads.vec("fine.query.out.bias") += d_feats.colwise().sum().transpose();
  const Mat d_concat = d_feats * params.mat("fine.query.out.weight");

  Mat d_input = Mat::Zero(L, C);
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    const int k = kernels[b];
    const Mat d_branch = d_concat.middleCols(static_cast<Eigen::Index>(b) * C, C);
    d_input += temporal_conv_backward(cache.input, d_branch,
                                      params.mat(conv_name(k) + ".weight"), k,
                                      grads.mat(conv_name(k) + ".weight"),
                                      grads.vec(conv_name(k) + ".bias"));
  }
  d_input.bottomRows(L - n).setZero();
  return d_input;
}

}  // namespace mgpn
