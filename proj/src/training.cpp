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

#include "mgpn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mgpn/errors.hpp"

namespace mgpn {

double scale_iou(double iou, double theta_min, double theta_max) {
  if (iou <= theta_min) return 0.0;
  if (iou >= theta_max) return 1.0;
  return (iou - theta_min) / (theta_max - theta_min);
}

Vec scale_labels(const CandidateGrid& grid, const MomentSpan& gt, double theta_min,
                 double theta_max) {
  Vec y = Vec::Zero(static_cast<Eigen::Index>(grid.T) * grid.T);
  for (int b : grid.blocks) {
    const double iou = temporal_iou(span_of_block(b / grid.T, b % grid.T, grid.tau), gt);
    y(b) = scale_iou(iou, theta_min, theta_max);
  }
  return y;
}

namespace {

double bce_term(double p, double y) {
  p = std::clamp(p, kProbClip, 1.0 - kProbClip);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

}  // namespace

double alignment_loss(const ScoreMap& scores, const Vec& labels, const CandidateGrid& grid) {
  double sum = 0.0;
  for (int b : grid.blocks) sum += bce_term(scores.scores(b / grid.T, b % grid.T), labels(b));
  return sum / grid.count();
}

double alignment_loss_logits(const Vec& logits, const Vec& labels, const CandidateGrid& grid,
                             Vec* d_logits, double grad_scale) {
  if (d_logits) *d_logits = Vec::Zero(logits.size());
  const double n = grid.count();
  double sum = 0.0;
  for (int b : grid.blocks) {
    const double p = sigmoid(logits(b));
    sum += bce_term(p, labels(b));
    if (d_logits && p > kProbClip && p < 1.0 - kProbClip)
      (*d_logits)(b) = grad_scale * (p - labels(b)) / n;
  }
  return sum / n;
}

void Adam::step(ParamStore& params, const ParamStore& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  auto& pe = params.entries();
  const auto& ge = grads.entries();
  auto& me = m_.entries();
  auto& ve = v_.entries();
  for (std::size_t k = 0; k < pe.size(); ++k) {
    auto& p = pe[k].data;
    const auto& g = ge[k].data;
    auto& m = me[k].data;
    auto& v = ve[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }
}

std::vector<SampleInput> make_inputs(const Dataset& data, const std::vector<int>& indices) {
  std::vector<TokenSequence> queries;
  int L = 1;
  for (int i : indices) {
    const auto& q = data.samples()[static_cast<std::size_t>(i)].query;
    queries.push_back(q);
    L = std::max(L, q.real_count());
  }
  const auto padded = make_batch(queries, L);
  std::vector<SampleInput> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = data.samples()[static_cast<std::size_t>(indices[k])];
    out[k].clip_feats = &data.features(s).feats;
    out[k].tokens = embed(padded.rows[k], data.word_vectors());
    out[k].mask = padded.rows[k].mask;
    out[k].duration = s.duration;
  }
  return out;
}

CandidateGrid batch_grid(const ModelConfig& config, double duration) {
  return build_grid(config.T, duration, config.scheme);
}

double batch_loss(Model& model, const std::vector<SampleInput>& batch,
                  const std::vector<Vec>& labels, ParamStore* grads, bool update_buffers) {
  const CandidateGrid grid = batch_grid(model.config, batch.front().duration);
  const auto f = forward_batch_train(model, batch, grid, update_buffers);
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<Vec> d_logits(batch.size());
  double loss = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s)
    loss += alignment_loss_logits(f.logits[s], labels[s], grid, grads ? &d_logits[s] : nullptr,
                                  scale);
  loss *= scale;
  if (grads) backward_batch(model, batch, grid, f, d_logits, *grads);
  return loss;
}

namespace {

std::string first_non_finite(const ParamStore& grads) {
  for (const auto& e : grads.entries())
    for (std::size_t i = 0; i < e.data.size(); ++i)
      if (!std::isfinite(e.data[i])) return e.name + "[" + std::to_string(i) + "]";
  return "";
}

// Fisher-Yates with the project's generator so the order is reproducible.
void shuffle(std::vector<int>& order, Rng& rng) {
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
}

}  // namespace

std::vector<double> train(TrainState& state, const Dataset& data, const RunConfig& config,
                          const EpochCallback& on_epoch) {
  config.validate();
  if (data.size() == 0) throw ValidationError("training set is empty");
  Model& model = state.model;
  if (!state.adam.first_moment().same_layout(model.params)) state.adam = Adam(model.params);

  std::vector<Vec> labels(static_cast<std::size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) {
    const auto& s = data.samples()[static_cast<std::size_t>(i)];
    labels[static_cast<std::size_t>(i)] =
        scale_labels(batch_grid(model.config, s.duration), s.gt_span, model.config.theta_min,
                     model.config.theta_max);
  }

  std::vector<double> losses;
  ParamStore grads = model.params.zeros_like();
  const int B = config.train.batch_size;
  for (int e = 0; e < config.train.epochs; ++e) {
    const int epoch = state.epoch + 1;
    std::vector<int> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(config.train.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);

    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(B)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(B));
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto batch = make_inputs(data, idx);
      std::vector<Vec> y;
      for (int i : idx) y.push_back(labels[static_cast<std::size_t>(i)]);
      grads.set_zero();
      const double loss = batch_loss(model, batch, y, &grads, true);
      const auto where = first_non_finite(grads);
      if (!std::isfinite(loss) || !where.empty()) {
        std::string msg = std::string(std::isfinite(loss) ? "non-finite gradient" : "non-finite loss") +
                          " in epoch " + std::to_string(epoch);
        if (!where.empty()) {
          msg += "; first non-finite gradient at " + where;
        } else {
          const auto bad = first_non_finite(model.params);
          msg += bad.empty() ? "; gradients and parameters are finite"
                             : "; gradients finite, first non-finite parameter at " + bad;
        }
        throw NumericError(msg);
      }
      total += loss * static_cast<double>(idx.size());
      state.adam.step(model.params, grads, config.train.lr);
    }
    const double mean = total / static_cast<double>(data.size());
    losses.push_back(mean);
    state.epoch = epoch;
    if (on_epoch) on_epoch(epoch, mean);
  }
  return losses;
}

std::string epoch_line(int epoch, double loss) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "epoch %d loss %.6f", epoch, loss);
  return buf;
}

GradCheckResult grad_check(Model& model, const std::vector<SampleInput>& batch,
                           const std::vector<Vec>& labels, double epsilon,
                           std::size_t min_checked, std::uint64_t seed, double floor) {
  ParamStore grads = model.params.zeros_like();
  const double base_loss = batch_loss(model, batch, labels, &grads, false);

  // A few entries from every array, then uniform picks until min_checked.
  auto& entries = model.params.entries();
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  Rng rng(seed);
  const std::size_t per_array =
      std::max<std::size_t>(1, min_checked / (2 * std::max<std::size_t>(1, entries.size())));
  std::size_t total = 0;
  for (const auto& e : entries) total += e.data.size();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto n = entries[k].data.size();
    for (std::size_t r = 0; r < std::min(per_array, n); ++r)
      picks.emplace_back(k, static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1)));
  }
  while (picks.size() < min_checked) {
    auto flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(total) - 1));
    std::size_t k = 0;
    while (flat >= entries[k].data.size()) flat -= entries[k++].data.size();
    picks.emplace_back(k, flat);
  }
  std::sort(picks.begin(), picks.end());
  picks.erase(std::unique(picks.begin(), picks.end()), picks.end());

  auto central = [&](double& w, double h) {
    const double saved = w;
    w = saved + h;
    const double up = batch_loss(model, batch, labels, nullptr, false);
    w = saved - h;
    const double down = batch_loss(model, batch, labels, nullptr, false);
    w = saved;
    return (up - down) / (2.0 * h);
  };
  auto rel_error = [floor](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
  };

  GradCheckResult out;
  for (const auto& [k, i] : picks) {
    double& w = entries[k].data[i];
    // A ReLU or max switching inside [w - h, w + h] breaks the difference
    // quotient; halve h until two successive quotients agree.
    double h = epsilon;
    double numeric = central(w, h);
    for (int r = 0; r < kGradCheckRefinements; ++r) {
      const double finer = central(w, h / 2);
      // Rounding noise of a quotient at step h/2 is about eps * |loss| / h.
      const double noise = 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::abs(base_loss)) / h;
      const bool agree = std::abs(numeric - finer) <=
                         kGradCheckAgreement * std::max(std::abs(numeric), std::abs(finer)) + noise;
      if (agree) break;
      if (r == 0) ++out.refined;
      numeric = finer;
      h /= 2;
    }
    const double analytic = grads.entries()[k].data[i];
    const double rel = rel_error(analytic, numeric);
    ++out.checked;
    if (rel > out.max_rel_error || out.checked == 1) {
      out.max_rel_error = rel;
      out.worst_param = entries[k].name;
      out.worst_index = i;
      out.worst_analytic = analytic;
      out.worst_numeric = numeric;
    }
  }
  return out;
}

GradCheckResult grad_check_random(const ModelConfig& base, const GradCheckSetup& setup) {
  ModelConfig cfg = base;
  cfg.T = setup.T;
  cfg.C = setup.C;
  cfg.groups = setup.groups;
  cfg.feature_dim = setup.feature_dim;
  cfg.word_dim = setup.word_dim;
  cfg.L_max = setup.L;
  Model model = init_model(cfg, setup.seed);
  // Non-trivial normalization parameters so their gradients are exercised.
  Rng rng(setup.seed + 1);
  for (auto& e : model.params.entries())
    if (e.name.find(".bn.") != std::string::npos)
      for (double& v : e.data) v += rng.uniform(-0.2, 0.2);

  std::vector<Mat> clips;
  for (int s = 0; s < setup.batch; ++s) {
    Mat f(setup.clips, setup.feature_dim);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal(0.0, 1.0);
    clips.push_back(std::move(f));
  }
  std::vector<SampleInput> batch(static_cast<std::size_t>(setup.batch));
  std::vector<Vec> labels;
  const double duration = 8.0;
  for (int s = 0; s < setup.batch; ++s) {
    auto& in = batch[static_cast<std::size_t>(s)];
    in.clip_feats = &clips[static_cast<std::size_t>(s)];
    const int n = s == 0 ? setup.L : std::max(1, setup.L - 1);
    in.tokens = Mat::Zero(setup.L, setup.word_dim);
    in.mask.assign(static_cast<std::size_t>(setup.L), false);
    for (int t = 0; t < n; ++t) {
      in.mask[static_cast<std::size_t>(t)] = true;
      for (int d = 0; d < setup.word_dim; ++d) in.tokens(t, d) = rng.normal(0.0, 1.0);
    }
    in.duration = duration;
    const double start = 2.0 * s, end = start + 3.0 + s;
    labels.push_back(scale_labels(batch_grid(cfg, duration), {start, end}, 0.3, 0.7));
  }
  return grad_check(model, batch, labels, setup.epsilon, setup.min_checked, setup.seed + 2,
                    setup.floor);
}

}  // namespace mgpn
