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

#include "mgpn/comparison.hpp"

#include <cmath>

#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

// Weight taps reordered to [tap][c_out][c_in_per_group] for contiguous access.
std::vector<double> reorder_taps(const Eigen::Ref<const Mat>& weight, int k) {
  const Eigen::Index c_out = weight.rows();
  const Eigen::Index cpg = weight.cols() / (k * k);
  std::vector<double> taps(static_cast<std::size_t>(k * k * c_out * cpg));
  for (Eigen::Index co = 0; co < c_out; ++co)
    for (Eigen::Index ci = 0; ci < cpg; ++ci)
      for (int t = 0; t < k * k; ++t)
        taps[static_cast<std::size_t>((t * c_out + co) * cpg + ci)] = weight(co, ci * k * k + t);
  return taps;
}

void check_groups(Eigen::Index c_in, Eigen::Index c_out, int groups) {
  if (groups < 1 || c_in % groups != 0 || c_out % groups != 0)
    throw ConfigError("channel count " + std::to_string(c_in) + " is not divisible by " +
                      std::to_string(groups) + " groups");
}

// Visits every (output block, input block, tap) triple that contributes.
template <typename Fn>
void for_each_tap(int T, int k, int pad, const CandidateGrid* grid, Fn&& fn) {
  auto visit_output = [&](int i, int j) {
    for (int di = 0; di < k; ++di) {
      const int ii = i + di - pad;
      if (ii < 0 || ii >= T) continue;
      for (int dj = 0; dj < k; ++dj) {
        const int jj = j + dj - pad;
        if (jj < 0 || jj >= T) continue;
        if (grid && !grid->is_valid(ii, jj)) continue;
        fn(i * T + j, ii * T + jj, di * k + dj);
      }
    }
  };
  if (grid) {
    for (int b : grid->blocks) visit_output(b / T, b % T);
  } else {
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < T; ++j) visit_output(i, j);
  }
}

}  // namespace

std::string block_prefix(int block) { return "compare.block" + std::to_string(block); }

Mat fuse(const Mat& aligned, const MomentFeatureMaps& maps, const ParamStore& params,
         Mat* pre_activation) {
  const auto w = params.mat("compare.fuse.weight");
  const Eigen::Index a = aligned.cols(), C = maps.content.cols();
  Mat pre = aligned * (w.leftCols(a).transpose() + params.mat("compare.skip.weight").transpose());
  pre.noalias() += maps.boundary * w.middleCols(a, C).transpose();
  pre.noalias() += maps.content * w.middleCols(a + C, C).transpose();
  pre.rowwise() += params.vec("compare.fuse.bias").transpose();
  Mat out = pre.cwiseMax(0.0);
  if (pre_activation) *pre_activation = std::move(pre);
  return out;
}

void fuse_backward(const Mat& aligned, const MomentFeatureMaps& maps, const Mat& pre_activation,
                   const Mat& d_out, const ParamStore& params, ParamStore& grads, Mat& d_aligned,
                   Mat& d_boundary, Mat& d_content) {
  const auto w = params.mat("compare.fuse.weight");
  const auto w_skip = params.mat("compare.skip.weight");
  const Eigen::Index a = aligned.cols(), C = maps.content.cols();
  const Mat d_pre = (pre_activation.array() > 0.0).select(d_out, 0.0);

  auto g_w = grads.mat("compare.fuse.weight");
  g_w.leftCols(a).noalias() += d_pre.transpose() * aligned;
  g_w.middleCols(a, C).noalias() += d_pre.transpose() * maps.boundary;
  g_w.middleCols(a + C, C).noalias() += d_pre.transpose() * maps.content;
  grads.mat("compare.skip.weight").noalias() += d_pre.transpose() * aligned;
  grads.vec("compare.fuse.bias") += d_pre.colwise().sum().transpose();

  d_aligned.noalias() += d_pre * (w.leftCols(a) + w_skip);
  d_boundary.noalias() += d_pre * w.middleCols(a, C);
  d_content.noalias() += d_pre * w.middleCols(a + C, C);
}

Mat group_conv2d(const Mat& x, int T, const Eigen::Ref<const Mat>& weight, int groups, int k,
                 int pad, const CandidateGrid* grid) {
  const Eigen::Index c_in = x.cols(), c_out = weight.rows();
  check_groups(c_in, c_out, groups);
  const Eigen::Index cpg = c_in / groups, opg = c_out / groups;
  if (weight.cols() != cpg * k * k) throw ConfigError("group conv weight shape mismatch");
  const auto taps = reorder_taps(weight, k);
  Mat out = Mat::Zero(x.rows(), c_out);
  for_each_tap(T, k, pad, grid, [&](int ob, int ib, int t) {
    double* o = out.row(ob).data();
    const double* xin = x.row(ib).data();
    const double* wt = taps.data() + static_cast<std::ptrdiff_t>(t) * c_out * cpg;
    for (Eigen::Index co = 0; co < c_out; ++co) {
      const double* w = wt + co * cpg;
      const double* xg = xin + (co / opg) * cpg;
      double acc = 0.0;
      for (Eigen::Index ci = 0; ci < cpg; ++ci) acc += w[ci] * xg[ci];
      o[co] += acc;
    }
  });
  return out;
}

Mat group_conv2d_backward(const Mat& x, int T, const Mat& d_out,
                          const Eigen::Ref<const Mat>& weight, int groups, int k, int pad,
                          const CandidateGrid* grid, Eigen::Ref<Mat> g_weight) {
  const Eigen::Index c_in = x.cols(), c_out = weight.rows();
  const Eigen::Index cpg = c_in / groups, opg = c_out / groups;
  const auto taps = reorder_taps(weight, k);
  std::vector<double> g_taps(taps.size(), 0.0);
  Mat d_x = Mat::Zero(x.rows(), c_in);
  for_each_tap(T, k, pad, grid, [&](int ob, int ib, int t) {
    const double* dout = d_out.row(ob).data();
    const double* xin = x.row(ib).data();
    double* dxin = d_x.row(ib).data();
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t) * c_out * cpg;
    for (Eigen::Index co = 0; co < c_out; ++co) {
      const double g = dout[co];
      if (g == 0.0) continue;
      const double* w = taps.data() + base + co * cpg;
      double* gw = g_taps.data() + base + co * cpg;
      const Eigen::Index off = (co / opg) * cpg;
      for (Eigen::Index ci = 0; ci < cpg; ++ci) {
        dxin[off + ci] += g * w[ci];
        gw[ci] += g * xin[off + ci];
      }
    }
  });
  for (Eigen::Index co = 0; co < c_out; ++co)
    for (Eigen::Index ci = 0; ci < cpg; ++ci)
      for (int t = 0; t < k * k; ++t)
        g_weight(co, ci * k * k + t) += g_taps[static_cast<std::size_t>((t * c_out + co) * cpg + ci)];
  return d_x;
}

void batch_norm_train(std::vector<Mat>& maps, const CandidateGrid& grid,
                      const Eigen::Ref<const Vec>& gamma, const Eigen::Ref<const Vec>& beta,
                      Vec* running_mean, Vec* running_var, BatchNormCache& cache) {
  const Eigen::Index C = gamma.size();
  const double count = static_cast<double>(maps.size()) * grid.count();
  Vec mean = Vec::Zero(C);
  for (const auto& m : maps)
    for (int b : grid.blocks) mean += m.row(b).transpose();
  mean /= count;
  Vec var = Vec::Zero(C);
  for (const auto& m : maps)
    for (int b : grid.blocks) var += (m.row(b).transpose() - mean).cwiseAbs2();
  var /= count;

  cache.inv_std = (var.array() + kBatchNormEps).rsqrt();
  cache.normalized.assign(maps.size(), Mat());
  for (std::size_t s = 0; s < maps.size(); ++s) {
    Mat& m = maps[s];
    Mat xhat = Mat::Zero(m.rows(), C);
    for (int b : grid.blocks) {
      xhat.row(b) = ((m.row(b).transpose() - mean).array() * cache.inv_std.array()).transpose();
      m.row(b) = (xhat.row(b).transpose().array() * gamma.array() + beta.array()).transpose();
    }
    cache.normalized[s] = std::move(xhat);
  }
  if (running_mean && running_var) {
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    *running_mean = (1.0 - kBatchNormMomentum) * *running_mean + kBatchNormMomentum * mean;
    *running_var = (1.0 - kBatchNormMomentum) * *running_var + kBatchNormMomentum * unbias * var;
  }
}

void batch_norm_eval(Mat& map, const CandidateGrid& grid, const Eigen::Ref<const Vec>& gamma,
                     const Eigen::Ref<const Vec>& beta, const Eigen::Ref<const Vec>& running_mean,
                     const Eigen::Ref<const Vec>& running_var) {
  const Vec scale = gamma.array() * (running_var.array() + kBatchNormEps).rsqrt();
  for (int b : grid.blocks)
    map.row(b) = ((map.row(b).transpose() - running_mean).array() * scale.array() + beta.array())
                     .transpose();
}

void batch_norm_backward(std::vector<Mat>& d_maps, const CandidateGrid& grid,
                         const BatchNormCache& cache, const Eigen::Ref<const Vec>& gamma,
                         Eigen::Ref<Vec> g_gamma, Eigen::Ref<Vec> g_beta) {
  const Eigen::Index C = gamma.size();
  const double count = static_cast<double>(d_maps.size()) * grid.count();
  Vec sum_dy = Vec::Zero(C), sum_dy_xhat = Vec::Zero(C);
  for (std::size_t s = 0; s < d_maps.size(); ++s) {
    for (int b : grid.blocks) {
      sum_dy += d_maps[s].row(b).transpose();
      sum_dy_xhat += d_maps[s].row(b).transpose().cwiseProduct(cache.normalized[s].row(b).transpose());
    }
  }
  g_gamma += sum_dy_xhat;
  g_beta += sum_dy;
  // dx = gamma * inv_std / N * (N dy - sum dy - xhat sum(dy xhat))
  const Vec scale = gamma.cwiseProduct(cache.inv_std) / count;
  for (std::size_t s = 0; s < d_maps.size(); ++s) {
    Mat& d = d_maps[s];
    for (int b : grid.blocks) {
      const Vec dy = d.row(b).transpose();
      const Vec xhat = cache.normalized[s].row(b).transpose();
      d.row(b) = (scale.array() * (count * dy.array() - sum_dy.array() -
                                   xhat.array() * sum_dy_xhat.array()))
                     .transpose();
    }
    apply_grid_mask(grid, d);
  }
}

Mat compare(const Mat& fused, const CandidateGrid& grid, const ParamStore& params,
            const ParamStore& buffers, const ModelConfig& config) {
  check_groups(fused.cols(), fused.cols(), config.groups);
  Mat x = fused;
  apply_grid_mask(grid, x);
  for (int blk = 0; blk < config.comparison_blocks; ++blk) {
    const auto p = block_prefix(blk);
    Mat y = group_conv2d(x, grid.T, params.mat(p + ".conv.weight"), config.groups, config.kernel,
                         config.padding, &grid);
    batch_norm_eval(y, grid, params.vec(p + ".bn.weight"), params.vec(p + ".bn.bias"),
                    buffers.vec(p + ".bn.running_mean"), buffers.vec(p + ".bn.running_var"));
    x = y.cwiseMax(0.0);
    apply_grid_mask(grid, x);
  }
  return x;
}

std::vector<Mat> compare_batch_train(const std::vector<Mat>& fused, const CandidateGrid& grid,
                                     const ParamStore& params, ParamStore* buffers,
                                     const ModelConfig& config, CompareBatchCache& cache) {
  const std::size_t B = fused.size();
  const auto nb = static_cast<std::size_t>(config.comparison_blocks);
  cache.inputs.assign(nb, {});
  cache.activations.assign(nb, {});
  cache.bn.assign(nb, {});
  std::vector<Mat> x = fused;
  for (auto& m : x) {
    check_groups(m.cols(), m.cols(), config.groups);
    apply_grid_mask(grid, m);
  }
  for (std::size_t blk = 0; blk < nb; ++blk) {
    const auto p = block_prefix(static_cast<int>(blk));
    std::vector<Mat> y(B);
    for (std::size_t s = 0; s < B; ++s)
      y[s] = group_conv2d(x[s], grid.T, params.mat(p + ".conv.weight"), config.groups,
                          config.kernel, config.padding, &grid);
    Vec rm, rv;
    if (buffers) {
      rm = buffers->vec(p + ".bn.running_mean");
      rv = buffers->vec(p + ".bn.running_var");
    }
    batch_norm_train(y, grid, params.vec(p + ".bn.weight"), params.vec(p + ".bn.bias"),
                     buffers ? &rm : nullptr, buffers ? &rv : nullptr, cache.bn[blk]);
    if (buffers) {
      buffers->vec(p + ".bn.running_mean") = rm;
      buffers->vec(p + ".bn.running_var") = rv;
    }
    cache.inputs[blk] = std::move(x);
    x.assign(B, Mat());
    for (std::size_t s = 0; s < B; ++s) {
      x[s] = y[s].cwiseMax(0.0);
      apply_grid_mask(grid, x[s]);
    }
    cache.activations[blk] = std::move(y);
  }
  return x;
}

std::vector<Mat> compare_batch_backward(const CompareBatchCache& cache, std::vector<Mat> d_out,
                                        const CandidateGrid& grid, const ParamStore& params,
                                        ParamStore& grads, const ModelConfig& config) {
  const std::size_t B = d_out.size();
  for (int blk = config.comparison_blocks - 1; blk >= 0; --blk) {
    const auto bi = static_cast<std::size_t>(blk);
    const auto p = block_prefix(blk);
    for (std::size_t s = 0; s < B; ++s) {
      apply_grid_mask(grid, d_out[s]);
      d_out[s] = (cache.activations[bi][s].array() > 0.0).select(d_out[s], 0.0);
    }
    batch_norm_backward(d_out, grid, cache.bn[bi], params.vec(p + ".bn.weight"),
                        grads.vec(p + ".bn.weight"), grads.vec(p + ".bn.bias"));
    for (std::size_t s = 0; s < B; ++s)
      d_out[s] = group_conv2d_backward(cache.inputs[bi][s], grid.T, d_out[s],
                                       params.mat(p + ".conv.weight"), config.groups,
                                       config.kernel, config.padding, &grid,
                                       grads.mat(p + ".conv.weight"));
  }
  for (auto& d : d_out) apply_grid_mask(grid, d);
  return d_out;
}

Vec rank_logits(const Mat& compared, const CandidateGrid& grid, const ParamStore& params) {
  const auto w = params.vec("rank.weight");
  const double bias = params.vec("rank.bias")(0);
  Vec logits = Vec::Zero(compared.rows());
  for (int b : grid.blocks) logits(b) = compared.row(b).dot(w) + bias;
  return logits;
}

ScoreMap scores_from_logits(const Vec& logits, const CandidateGrid& grid) {
  ScoreMap out;
  out.scores = Mat::Zero(grid.T, grid.T);
  for (int b : grid.blocks) out.scores(b / grid.T, b % grid.T) = sigmoid(logits(b));
  return out;
}

ScoreMap rank(const Mat& compared, const CandidateGrid& grid, const ParamStore& params) {
  return scores_from_logits(rank_logits(compared, grid, params), grid);
}

Mat rank_backward(const Mat& compared, const Vec& d_logits, const CandidateGrid& grid,
                  const ParamStore& params, ParamStore& grads) {
  const auto w = params.vec("rank.weight");
  auto g_w = grads.vec("rank.weight");
  auto g_b = grads.vec("rank.bias");
  Mat d = Mat::Zero(compared.rows(), compared.cols());
  for (int b : grid.blocks) {
    g_w += d_logits(b) * compared.row(b).transpose();
    g_b(0) += d_logits(b);
    d.row(b) = d_logits(b) * w.transpose();
  }
  return d;
}

}  // namespace mgpn
