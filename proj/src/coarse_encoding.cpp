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

#include "mgpn/coarse_encoding.hpp"

#include "mgpn/data_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

std::string dir_prefix(const std::string& prefix, int layer, bool reverse) {
  return prefix + ".l" + std::to_string(layer) + (reverse ? ".bwd" : ".fwd");
}

Mat gru_direction_forward(const Mat& x, const ParamStore& params, const std::string& p,
                          bool reverse, GruDirectionCache* cache) {
  const auto w_ih = params.mat(p + ".w_ih");
  const auto w_hh = params.mat(p + ".w_hh");
  const auto b_ih = params.vec(p + ".b_ih");
  const auto b_hh = params.vec(p + ".b_hh");
  const Eigen::Index H = w_hh.cols();
  const Eigen::Index n = x.rows();

  Mat gi = x * w_ih.transpose();
  gi.rowwise() += b_ih.transpose();

  Mat out(n, H);
  if (cache) {
    cache->input = x;
    cache->h_prev.resize(n, H);
    cache->r.resize(n, H);
    cache->z.resize(n, H);
    cache->n.resize(n, H);
    cache->gh_n.resize(n, H);
  }
  Vec h = Vec::Zero(H);
  Vec gh(3 * H), r(H), z(H), cand(H);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    gh.noalias() = w_hh * h;
    gh += b_hh;
    for (Eigen::Index k = 0; k < H; ++k) {
      r(k) = sigmoid(gi(t, k) + gh(k));
      z(k) = sigmoid(gi(t, H + k) + gh(H + k));
      cand(k) = std::tanh(gi(t, 2 * H + k) + r(k) * gh(2 * H + k));
    }
    if (cache) {
      cache->h_prev.row(t) = h.transpose();
      cache->r.row(t) = r.transpose();
      cache->z.row(t) = z.transpose();
      cache->n.row(t) = cand.transpose();
      cache->gh_n.row(t) = gh.segment(2 * H, H).transpose();
    }
    h = (1.0 - z.array()) * cand.array() + z.array() * h.array();
    out.row(t) = h.transpose();
  }
  return out;
}

Mat gru_direction_backward(const GruDirectionCache& c, const Mat& d_out, const ParamStore& params,
                           ParamStore& grads, const std::string& p, bool reverse) {
  const auto w_ih = params.mat(p + ".w_ih");
  const auto w_hh = params.mat(p + ".w_hh");
  auto g_w_ih = grads.mat(p + ".w_ih");
  auto g_w_hh = grads.mat(p + ".w_hh");
  auto g_b_ih = grads.vec(p + ".b_ih");
  auto g_b_hh = grads.vec(p + ".b_hh");
  const Eigen::Index H = w_hh.cols();
  const Eigen::Index n = d_out.rows();

  Mat d_gi(n, 3 * H);
  Vec carry = Vec::Zero(H);
  Vec dh(H), d_gh(3 * H);
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    dh = d_out.row(t).transpose() + carry;
    for (Eigen::Index k = 0; k < H; ++k) {
      const double r = c.r(t, k), z = c.z(t, k), nn = c.n(t, k);
      const double d_n = dh(k) * (1.0 - z);
      const double d_z = dh(k) * (c.h_prev(t, k) - nn);
      const double d_an = d_n * (1.0 - nn * nn);
      const double d_r = d_an * c.gh_n(t, k);
      const double d_ar = d_r * r * (1.0 - r);
      const double d_az = d_z * z * (1.0 - z);
      d_gi(t, k) = d_ar;
      d_gi(t, H + k) = d_az;
      d_gi(t, 2 * H + k) = d_an;
      d_gh(k) = d_ar;
      d_gh(H + k) = d_az;
      d_gh(2 * H + k) = d_an * r;
    }
    g_w_hh.noalias() += d_gh * c.h_prev.row(t);
    g_b_hh += d_gh;
    carry = dh.cwiseProduct(c.z.row(t).transpose());
    carry.noalias() += w_hh.transpose() * d_gh;
  }
  g_w_ih.noalias() += d_gi.transpose() * c.input;
  g_b_ih += d_gi.colwise().sum().transpose();
  return d_gi * w_ih;
}

}  // namespace

std::pair<int, int> pool_window(int t, int in_len, int out_len) {
  const long long lo = static_cast<long long>(t) * in_len / out_len;
  const long long hi_num = static_cast<long long>(t + 1) * in_len;
  const long long hi = (hi_num + out_len - 1) / out_len;
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

Mat adaptive_avg_pool(const Mat& x, int out_len) {
  const int in_len = static_cast<int>(x.rows());
  if (in_len < 1) throw ValidationError("cannot pool an empty sequence");
  Mat out(out_len, x.cols());
  for (int t = 0; t < out_len; ++t) {
    const auto [lo, hi] = pool_window(t, in_len, out_len);
    out.row(t) = x.middleRows(lo, hi - lo).colwise().mean();
  }
  return out;
}

Mat adaptive_avg_pool_backward(const Mat& d_out, int in_len) {
  const int out_len = static_cast<int>(d_out.rows());
  Mat d_in = Mat::Zero(in_len, d_out.cols());
  for (int t = 0; t < out_len; ++t) {
    const auto [lo, hi] = pool_window(t, in_len, out_len);
    const double w = 1.0 / (hi - lo);
    for (int r = lo; r < hi; ++r) d_in.row(r) += w * d_out.row(t);
  }
  return d_in;
}

Mat sample_video(const Mat& clip_feats, const ParamStore& params, int T) {
  const auto w = params.mat("video.proj.weight");
  if (clip_feats.cols() != w.cols())
    throw ValidationError("clip feature dim " + std::to_string(clip_feats.cols()) +
                          " != model feature dim " + std::to_string(w.cols()));
  Mat projected = clip_feats * w.transpose();
  projected.rowwise() += params.vec("video.proj.bias").transpose();
  return adaptive_avg_pool(projected, T);
}

void sample_video_backward(const Mat& clip_feats, const Mat& d_sampled, const ParamStore&,
                           ParamStore& grads) {
  const Mat d_proj = adaptive_avg_pool_backward(d_sampled, static_cast<int>(clip_feats.rows()));
  grads.mat("video.proj.weight").noalias() += d_proj.transpose() * clip_feats;
  grads.vec("video.proj.bias") += d_proj.colwise().sum().transpose();
}

void add_bigru_params(ParamStore& params, const std::string& prefix, int in_dim, int hidden,
                      int layers) {
  const auto H = static_cast<std::size_t>(hidden);
  for (int l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(l == 0 ? in_dim : 2 * hidden);
    for (bool reverse : {false, true}) {
      const auto p = dir_prefix(prefix, l, reverse);
      params.add(p + ".w_ih", {3 * H, in});
      params.add(p + ".w_hh", {3 * H, H});
      params.add(p + ".b_ih", {3 * H});
      params.add(p + ".b_hh", {3 * H});
    }
  }
}

Mat bigru_forward(const Mat& x, const ParamStore& params, const std::string& prefix, int layers,
                  BiGruCache* cache) {
  if (cache) {
    cache->fwd.assign(static_cast<std::size_t>(layers), {});
    cache->bwd.assign(static_cast<std::size_t>(layers), {});
  }
  Mat cur = x;
  for (int l = 0; l < layers; ++l) {
    const auto li = static_cast<std::size_t>(l);
    Mat f = gru_direction_forward(cur, params, dir_prefix(prefix, l, false), false,
                                  cache ? &cache->fwd[li] : nullptr);
    Mat b = gru_direction_forward(cur, params, dir_prefix(prefix, l, true), true,
                                  cache ? &cache->bwd[li] : nullptr);
    Mat next(cur.rows(), f.cols() + b.cols());
    next << f, b;
    cur = std::move(next);
  }
  return cur;
}

Mat bigru_backward(const BiGruCache& cache, const Mat& d_out, const ParamStore& params,
                   ParamStore& grads, const std::string& prefix, int layers) {
  Mat d = d_out;
  for (int l = layers - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const Eigen::Index H = d.cols() / 2;
    const Mat d_f = d.leftCols(H);
    const Mat d_b = d.rightCols(H);
    Mat d_in = gru_direction_backward(cache.fwd[li], d_f, params, grads,
                                      dir_prefix(prefix, l, false), false);
    d_in += gru_direction_backward(cache.bwd[li], d_b, params, grads,
                                   dir_prefix(prefix, l, true), true);
    d = std::move(d_in);
  }
  return d;
}

EncodedVideo encode_video(const Mat& sampled, const ParamStore& params, int layers,
                          BiGruCache* cache) {
  return {bigru_forward(sampled, params, "video.gru", layers, cache)};
}

EncodedQuery encode_query(const Mat& token_vectors, const std::vector<bool>& mask,
                          const ParamStore& params, int layers, BiGruCache* cache) {
  if (static_cast<Eigen::Index>(mask.size()) != token_vectors.rows())
    throw ValidationError("query mask length != token rows");
  const int n = leading_count(mask);
  const Mat real = bigru_forward(token_vectors.topRows(n), params, "query.gru", layers, cache);
  EncodedQuery out;
  out.feats = Mat::Zero(token_vectors.rows(), real.cols());
  out.feats.topRows(n) = real;
  out.mask = mask;
  return out;
}

Mat encode_query_backward(const BiGruCache& cache, const Mat& d_feats,
                          const std::vector<bool>& mask, const ParamStore& params,
                          ParamStore& grads, int layers) {
  const int n = leading_count(mask);
  const Mat d_real =
      bigru_backward(cache, d_feats.topRows(n), params, grads, "query.gru", layers);
  Mat d = Mat::Zero(d_feats.rows(), d_real.cols());
  d.topRows(n) = d_real;
  return d;
}

}  // namespace mgpn
