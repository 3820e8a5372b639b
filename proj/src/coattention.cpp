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

#include "mgpn/coattention.hpp"

#include "mgpn/data_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {

AttendedQuery attention_pool(const Mat& rows, int n_real, const Eigen::Ref<const Vec>& score_w) {
  if (n_real < 1) throw ValidationError("attention over zero unmasked positions");
  const auto real = rows.topRows(n_real);
  Vec scores = real * score_w;
  scores.array() -= scores.maxCoeff();
  Vec e = scores.array().exp();
  e /= e.sum();
  AttendedQuery out;
  out.weights = Vec::Zero(rows.rows());
  out.weights.head(n_real) = e;
  out.q_attn = real.transpose() * e;
  return out;
}

void attention_pool_backward(const Mat& rows, int n_real, const AttendedQuery& pooled,
                             const Vec& d_pooled, const Eigen::Ref<const Vec>& score_w,
                             Mat& d_rows, Eigen::Ref<Vec> g_score_w) {
  const auto real = rows.topRows(n_real);
  const Vec a = pooled.weights.head(n_real);
  // pooled = sum_j a_j row_j
  d_rows.topRows(n_real).noalias() += a * d_pooled.transpose();
  const Vec d_a = real * d_pooled;
  const Vec d_s = a.cwiseProduct((d_a.array() - a.dot(d_a)).matrix());
  g_score_w.noalias() += real.transpose() * d_s;
  d_rows.topRows(n_real).noalias() += d_s * score_w.transpose();
}

Mat normalize_rows(const Mat& u, Vec* norms) {
  Vec n = u.rowwise().norm();
  Mat out = u;
  for (Eigen::Index r = 0; r < u.rows(); ++r) out.row(r) /= (n(r) + kNormEps);
  if (norms) *norms = std::move(n);
  return out;
}

Mat normalize_rows_backward(const Mat& u, const Vec& norms, const Mat& d_out) {
  Mat d = Mat::Zero(u.rows(), u.cols());
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const double n = norms(r);
    const double denom = n + kNormEps;
    d.row(r) = d_out.row(r) / denom;
    if (n > 0.0) d.row(r) -= (d_out.row(r).dot(u.row(r)) / (n * denom * denom)) * u.row(r);
  }
  return d;
}

AttendedQuery attend_query(const EncodedQuery& query, const ParamStore& params) {
  const int n = leading_count(query.mask);
  return attention_pool(query.feats, n, params.vec("coattn.query_score.weight"));
}

FusedVideo fuse_query_to_video(const EncodedVideo& video, const Vec& q_attn) {
  Mat product = video.feats.array().rowwise() * q_attn.transpose().array();
  return {normalize_rows(product)};
}

Mat fuse_video_to_query(const EncodedQuery& query, const EncodedVideo& video,
                        const ParamStore& params) {
  const int n = leading_count(query.mask);
  const auto v_attn = attention_pool(video.feats, static_cast<int>(video.feats.rows()),
                                     params.vec("coattn.video_score.weight"));
  Mat out = Mat::Zero(query.feats.rows(), query.feats.cols());
  const Mat product = query.feats.topRows(n).array().rowwise() * v_attn.q_attn.transpose().array();
  out.topRows(n) = normalize_rows(product);
  return out;
}

CoattentionOutput coattend(const EncodedVideo& video, const EncodedQuery& query,
                           const ParamStore& params, CoattentionCache* cache) {
  CoattentionCache local;
  CoattentionCache& c = cache ? *cache : local;
  c.n_real = leading_count(query.mask);
  c.query_attn = attention_pool(query.feats, c.n_real, params.vec("coattn.query_score.weight"));
  c.video_attn = attention_pool(video.feats, static_cast<int>(video.feats.rows()),
                                params.vec("coattn.video_score.weight"));

  CoattentionOutput out;
  c.video_product = video.feats.array().rowwise() * c.query_attn.q_attn.transpose().array();
  out.fused_video = normalize_rows(c.video_product, &c.video_norms);

  c.query_product =
      query.feats.topRows(c.n_real).array().rowwise() * c.video_attn.q_attn.transpose().array();
  out.fused_query = Mat::Zero(query.feats.rows(), query.feats.cols());
  out.fused_query.topRows(c.n_real) = normalize_rows(c.query_product, &c.query_norms);
  return out;
}

void coattend_backward(const EncodedVideo& video, const EncodedQuery& query,
                       const CoattentionCache& c, const Mat& d_fused_video,
                       const Mat& d_fused_query, const ParamStore& params, ParamStore& grads,
                       Mat& d_video, Mat& d_query) {
  const int n = c.n_real;
  const Vec& q_attn = c.query_attn.q_attn;
  const Vec& v_attn = c.video_attn.q_attn;

  // video branch: V-hat_t = normalize(q_attn (.) v_t)
  const Mat d_vprod = normalize_rows_backward(c.video_product, c.video_norms, d_fused_video);
  d_video.array() += d_vprod.array().rowwise() * q_attn.transpose().array();
  Vec d_q_attn = (d_vprod.array() * video.feats.array()).colwise().sum().transpose();

  // query branch over real rows
  const Mat d_qprod =
      normalize_rows_backward(c.query_product, c.query_norms, d_fused_query.topRows(n));
  d_query.topRows(n).array() += d_qprod.array().rowwise() * v_attn.transpose().array();
  Vec d_v_attn = (d_qprod.array() * query.feats.topRows(n).array()).colwise().sum().transpose();

  attention_pool_backward(query.feats, n, c.query_attn, d_q_attn,
                          params.vec("coattn.query_score.weight"), d_query,
                          grads.vec("coattn.query_score.weight"));
  attention_pool_backward(video.feats, static_cast<int>(video.feats.rows()), c.video_attn,
                          d_v_attn, params.vec("coattn.video_score.weight"), d_video,
                          grads.vec("coattn.video_score.weight"));
}

}  // namespace mgpn
