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

// Scaled-IoU supervision, the binary cross-entropy alignment loss, Adam,
// the epoch loop and a finite-difference gradient check.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgpn/config.hpp"
#include "mgpn/data_io.hpp"
#include "mgpn/model.hpp"

namespace mgpn {

inline constexpr double kProbClip = 1e-7;

/// 0 below theta_min, 1 above theta_max, linear in between.
double scale_iou(double iou, double theta_min, double theta_max);
/// Flat (T*T) labels, zero at invalid blocks.
Vec scale_labels(const CandidateGrid& grid, const MomentSpan& gt, double theta_min,
                 double theta_max);

/// Mean BCE over the valid blocks of one sample; p clipped to
/// [kProbClip, 1 - kProbClip].
double alignment_loss(const ScoreMap& scores, const Vec& labels, const CandidateGrid& grid);
/// Same loss from logits. When d_logits is given it receives
/// grad_scale * dloss/dlogit (zero where the probability was clipped).
double alignment_loss_logits(const Vec& logits, const Vec& labels, const CandidateGrid& grid,
                             Vec* d_logits = nullptr, double grad_scale = 1.0);

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Adam() = default;
  explicit Adam(const ParamStore& params) : m_(params.zeros_like()), v_(params.zeros_like()) {}

  void step(ParamStore& params, const ParamStore& grads, double lr);

  ParamStore& first_moment() { return m_; }
  ParamStore& second_moment() { return v_; }
  const ParamStore& first_moment() const { return m_; }
  const ParamStore& second_moment() const { return v_; }
  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  ParamStore m_, v_;
  std::uint64_t t_ = 0;
};

/// Model inputs for dataset samples; queries are padded to the longest
/// one in `indices`.
std::vector<SampleInput> make_inputs(const Dataset& data, const std::vector<int>& indices);

/// Grid shared by a batch. The validity pattern depends only on T; tau is
/// taken from `duration`.
CandidateGrid batch_grid(const ModelConfig& config, double duration);

/// One optimizer-free pass: mean loss over the batch, gradients of that
/// mean accumulated into `grads` when non-null.
double batch_loss(Model& model, const std::vector<SampleInput>& batch,
                  const std::vector<Vec>& labels, ParamStore* grads, bool update_buffers);

using EpochCallback = std::function<void(int epoch, double loss)>;

struct TrainState {
  Model model;
  Adam adam;
  int epoch = 0;
};

/// Runs config.train.epochs epochs from `state`. Shuffling is seeded by
/// train.seed and the epoch number. Throws NumericError on a non-finite
/// loss or gradient, naming the first parameter with a non-finite gradient
/// (or, when every gradient is finite, the first non-finite parameter).
std::vector<double> train(TrainState& state, const Dataset& data, const RunConfig& config,
                          const EpochCallback& on_epoch = {});

/// "epoch N loss X"
std::string epoch_line(int epoch, double loss);

/// Step refinement for grad_check: the central difference at h is accepted
/// once it agrees with the one at h/2 (to this relative tolerance plus the
/// rounding noise of the quotient); otherwise h is halved, at most
/// kGradCheckRefinements times.
inline constexpr double kGradCheckAgreement = 1e-5;
inline constexpr int kGradCheckRefinements = 4;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t refined = 0;  // coordinates whose first step straddled a kink
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences of batch_loss (training-mode normalization, running
/// statistics untouched) against the analytic gradient for at least
/// `min_checked` parameters, spread across every array. Relative error is
/// |a - n| / max(|a|, |n|, floor). The step starts at `epsilon` and is
/// refined as described above.
GradCheckResult grad_check(Model& model, const std::vector<SampleInput>& batch,
                           const std::vector<Vec>& labels, double epsilon,
                           std::size_t min_checked, std::uint64_t seed, double floor = 1e-8);

struct GradCheckSetup {
  int T = 4;
  int L = 3;
  int C = 32;
  int groups = 4;
  int feature_dim = 12;
  int word_dim = 10;
  int clips = 6;
  int batch = 2;
  double epsilon = 1e-5;
  std::size_t min_checked = 256;
  std::uint64_t seed = 3;
  double floor = 1e-8;  // relative-error denominator floor
};

/// Builds a random model and batch for `setup` and grad-checks it. The
/// remaining architecture settings come from `base`.
GradCheckResult grad_check_random(const ModelConfig& base, const GradCheckSetup& setup);

}  // namespace mgpn
