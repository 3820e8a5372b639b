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


#include <doctest.h>

#include <cstring>

#include "mgpn/checkpoint.hpp"
#include "mgpn/errors.hpp"
#include "mgpn/training.hpp"
#include "test_util.hpp"

using namespace mgpn;
using namespace mgpn::testutil;

namespace {

double piecewise(double iou, double lo, double hi) {
  if (iou <= lo) return 0.0;
  if (iou >= hi) return 1.0;
  return (iou - lo) / (hi - lo);
}

SyntheticDataset tiny_data(int n = 24, std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.num_samples = n;
  spec.T_V = 16;
  spec.D_v = 12;
  spec.vocab_size = 10;
  spec.word_dim = 8;
  spec.seed = seed;
  return gen_synthetic(spec);
}

RunConfig tiny_config() {
  RunConfig rc;
  auto& m = rc.model;
  m.T = 8;
  m.C = 16;
  m.groups = 4;
  m.comparison_blocks = 2;
  m.kernel = 3;
  m.padding = 1;
  m.L_max = 8;
  m.word_dim = 8;
  m.feature_dim = 12;
  rc.train.batch_size = 4;
  rc.train.epochs = 3;
  rc.train.lr = 1e-3;
  rc.train.seed = 11;
  return rc;
}

bool same_values(const ParamStore& a, const ParamStore& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t k = 0; k < a.entries().size(); ++k)
    if (a.entries()[k].data != b.entries()[k].data) return false;
  return true;
}

}  // namespace

TEST_CASE("scaled IoU examples") {
  CHECK(scale_iou(0.4, 0.5, 1.0) == 0.0);
  CHECK(scale_iou(0.5, 0.5, 1.0) == 0.0);
  CHECK(scale_iou(0.75, 0.5, 1.0) == doctest::Approx(0.5));
  CHECK(scale_iou(1.0, 0.5, 1.0) == 1.0);
  CHECK(scale_iou(0.5, 0.3, 0.7) == doctest::Approx(0.5));
  CHECK(scale_iou(0.9, 0.3, 0.7) == 1.0);
}

TEST_CASE("scaled IoU follows the piecewise rule on a dense sweep") {
  for (auto [lo, hi] : {std::pair{0.5, 1.0}, std::pair{0.3, 0.7}}) {
    double prev = -1.0;
    for (int k = 0; k < 1000; ++k) {
      const double iou = k / 999.0;
      const double y = scale_iou(iou, lo, hi);
      CHECK(y == doctest::Approx(piecewise(iou, lo, hi)).epsilon(1e-12));
      CHECK(y >= prev);
      prev = y;
    }
  }
}

TEST_CASE("grid labels are scaled IoUs of valid blocks") {
  const auto g = build_grid(16, 32.0, GridScheme::kSparse);
  const MomentSpan gt{5.0, 17.0};
  const Vec y = scale_labels(g, gt, 0.5, 1.0);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const double v = y(i * 16 + j);
      if (!g.is_valid(i, j)) {
        CHECK(v == 0.0);
        continue;
      }
      // Block spans cover [2i, 2j + 2).
      const double s = 2.0 * i, e = 2.0 * j + 2.0;
      const double inter = std::max(0.0, std::min(e, 17.0) - std::max(s, 5.0));
      const double iou = inter / (std::max(e, 17.0) - std::min(s, 5.0));
      CHECK(v == doctest::Approx(piecewise(iou, 0.5, 1.0)).epsilon(1e-12));
    }
  CHECK(y.maxCoeff() > 0.0);
}

TEST_CASE("alignment loss examples") {
  const auto g = build_grid(1, 1.0, GridScheme::kDense);
  ScoreMap s{Mat::Constant(1, 1, 0.5)};
  CHECK(alignment_loss(s, Vec::Ones(1), g) == doctest::Approx(std::log(2.0)));
  s.scores(0, 0) = 0.9;
  CHECK(alignment_loss(s, Vec::Constant(1, 0.25), g) ==
        doctest::Approx(-(0.25 * std::log(0.9) + 0.75 * std::log(0.1))));
  // Clipped: a certain wrong answer costs -log(1e-7), not infinity.
  s.scores(0, 0) = 1.0;
  CHECK(alignment_loss(s, Vec::Zero(1), g) == doctest::Approx(-std::log(kProbClip)));
}

TEST_CASE("loss averages over valid blocks only") {
  Rng rng(71);
  const auto g = build_grid(8, 8.0, GridScheme::kSparse);
  Vec z = random_vec(rng, 64), y = Vec::Zero(64);
  for (int b : g.blocks) y(b) = rng.uniform(0, 1);
  double want = 0.0;
  for (int b : g.blocks) {
    const double p = 1.0 / (1.0 + std::exp(-z(b)));
    want -= y(b) * std::log(p) + (1 - y(b)) * std::log(1 - p);
  }
  want /= g.count();
  Vec d;
  const double got = alignment_loss_logits(z, y, g, &d);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(alignment_loss(scores_from_logits(z, g), y, g) == doctest::Approx(want).epsilon(1e-12));
  // Garbage at invalid blocks changes nothing and gets no gradient.
  Vec z2 = z, y2 = y;
  for (int k = 0; k < 64; ++k)
    if (!g.valid[static_cast<std::size_t>(k)]) {
      z2(k) = 50.0 * (k % 3 - 1);
      y2(k) = 1.0;
    }
  Vec d2;
  CHECK(alignment_loss_logits(z2, y2, g, &d2) == got);
  CHECK(d2 == d);
  for (int k = 0; k < 64; ++k)
    if (!g.valid[static_cast<std::size_t>(k)]) CHECK(d(k) == 0.0);
  // Gradient against differences of the loss itself.
  for (int b : g.blocks) {
    Vec up = z, dn = z;
    up(b) += 1e-6;
    dn(b) -= 1e-6;
    const double fd = (alignment_loss_logits(up, y, g) - alignment_loss_logits(dn, y, g)) / 2e-6;
    CHECK(rel_error(d(b), fd, 1e-8) <= 1e-5);
  }
}

TEST_CASE("clipped probabilities get no gradient") {
  const auto g = build_grid(1, 1.0, GridScheme::kDense);
  Vec d;
  alignment_loss_logits(Vec::Constant(1, 40.0), Vec::Zero(1), g, &d);
  CHECK(d(0) == 0.0);
  alignment_loss_logits(Vec::Constant(1, 2.0), Vec::Zero(1), g, &d, 3.0);
  CHECK(d(0) == doctest::Approx(3.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("Adam follows the bias-corrected update") {
  ParamStore p;
  p.add("x", {2});
  p.entry("x").data = {1.0, -2.0};
  auto g = p.zeros_like();
  Adam adam(p);
  const double lr = 0.1;
  double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
  const double grads[2][2] = {{0.5, -3.0}, {-0.25, 1.0}};
  for (int t = 1; t <= 2; ++t) {
    g.entry("x").data = {grads[t - 1][0], grads[t - 1][1]};
    adam.step(p, g, lr);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grads[t - 1][i];
      v[i] = 0.999 * v[i] + 0.001 * grads[t - 1][i] * grads[t - 1][i];
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p.entry("x").data[static_cast<std::size_t>(i)] == doctest::Approx(x[i]).epsilon(1e-14));
    }
  }
  CHECK(adam.steps() == 2);
}

TEST_CASE("full-network gradients pass the finite-difference check") {
  GradCheckSetup setup;
  const auto r = grad_check_random(ModelConfig{}, setup);
  INFO(r.worst_param << "[" << r.worst_index << "] analytic " << r.worst_analytic << " numeric "
                     << r.worst_numeric);
  CHECK(r.checked >= 200);
  CHECK(r.max_rel_error <= 1e-4);
  // Second-order behaviour: halving the step must not inflate the error.
  setup.epsilon /= 2;
  const auto half = grad_check_random(ModelConfig{}, setup);
  CHECK(half.max_rel_error <= 1e-4);
  CHECK(half.max_rel_error <= 4.0 * r.max_rel_error + 1e-8);
}

TEST_CASE("ablated networks pass the finite-difference check") {
  GradCheckSetup setup;
  setup.min_checked = 128;
  // Some ablated paths leave gradients near 1e-8, below the rounding noise
  // of a difference quotient at this step; judge those absolutely.
  setup.floor = 1e-6;
  for (int variant = 0; variant < 3; ++variant) {
    ModelConfig base;
    if (variant == 0) base.use_fine_grained = false;
    if (variant == 1) base.use_interaction = false;
    if (variant == 2) base.use_comparison = false;
    CAPTURE(variant);
    const auto r = grad_check_random(base, setup);
    INFO(r.worst_param << "[" << r.worst_index << "] analytic " << r.worst_analytic
                       << " numeric " << r.worst_numeric << ", refined " << r.refined);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("invalid blocks carry zero features and scores") {
  const auto data = tiny_data();
  const auto ds = Dataset::from_synthetic(data, 0, 4);
  auto rc = tiny_config();
  const Model model = init_model(rc.model, 3);
  const auto inputs = make_inputs(ds, {0});
  const auto g = batch_grid(rc.model, ds.samples()[0].duration);
  const Mat front = forward_front(model, inputs[0], g);
  const Vec logits = predict_logits(model, inputs[0], g);
  const auto scores = predict_scores(model, inputs[0], g);
  for (int i = 0; i < g.T; ++i)
    for (int j = 0; j < g.T; ++j)
      if (!g.is_valid(i, j)) {
        CHECK(front.row(i * g.T + j).isZero());
        CHECK(logits(i * g.T + j) == 0.0);
        CHECK(scores.scores(i, j) == 0.0);
      } else {
        CHECK(scores.scores(i, j) > 0.0);
      }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto data = tiny_data();
  const auto ds = Dataset::from_synthetic(data, 0, 12);
  auto rc = tiny_config();
  rc.train.lr = 0.0;
  rc.train.epochs = 1;
  TrainState st{init_model(rc.model, 1), {}, 0};
  const ParamStore before = st.model.params;
  const auto losses = train(st, ds, rc);
  CHECK(losses.size() == 1);
  CHECK(same_values(before, st.model.params));
  CHECK(st.epoch == 1);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto data = tiny_data();
  const auto ds = Dataset::from_synthetic(data, 0, 24);
  auto rc = tiny_config();
  rc.train.epochs = 6;
  rc.train.lr = 3e-3;
  TrainState a{init_model(rc.model, 2), {}, 0}, b{init_model(rc.model, 2), {}, 0};
  std::vector<int> seen;
  const auto la = train(a, ds, rc, [&](int e, double) { seen.push_back(e); });
  const auto lb = train(b, ds, rc);
  CHECK(la == lb);
  CHECK(same_values(a.model.params, b.model.params));
  CHECK(same_values(a.model.buffers, b.model.buffers));
  CHECK(seen == std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(la.back() < la.front());
  rc.train.seed = 12;
  TrainState c{init_model(rc.model, 2), {}, 0};
  CHECK(train(c, ds, rc) != la);
}

TEST_CASE("a non-finite gradient names its parameter") {
  const auto data = tiny_data();
  const auto ds = Dataset::from_synthetic(data, 0, 8);
  auto rc = tiny_config();
  TrainState st{init_model(rc.model, 1), {}, 0};
  st.model.params.entry("rank.bias").data[0] = std::nan("");
  try {
    train(st, ds, rc);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    INFO(e.what());
    CHECK(std::string(e.what()).find("rank.bias[0]") != std::string::npos);
  }
}

TEST_CASE("epoch line format") {
  CHECK(epoch_line(3, 0.5) == "epoch 3 loss 0.500000");
}

TEST_CASE("checkpoint round trip") {
  auto rc = tiny_config();
  TrainState st{init_model(rc.model, 4), {}, 7};
  st.adam = Adam(st.model.params);
  st.adam.set_steps(42);
  st.model.buffers.entries()[0].data[0] = 0.25;
  RunConfig back;
  const auto bytes = encode_checkpoint(rc, st);
  const auto got = decode_checkpoint(bytes, "mem", &back);
  CHECK(got.epoch == 7);
  CHECK(got.adam.steps() == 42);
  CHECK(back.to_text() == rc.to_text());
  CHECK(same_values(got.model.params, st.model.params));
  CHECK(same_values(got.model.buffers, st.model.buffers));
  CHECK(got.model.config.C == rc.model.C);
}

TEST_CASE("damaged checkpoints are format errors") {
  auto rc = tiny_config();
  TrainState st{init_model(rc.model, 4), {}, 0};
  st.adam = Adam(st.model.params);
  const auto bytes = encode_checkpoint(rc, st);
  auto expect_error = [](const std::string& b, const char* needle) {
    try {
      decode_checkpoint(b, "ckpt");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  std::string bad = bytes;
  bad[0] = 'X';
  expect_error(bad, "magic");
  bad = bytes;
  bad[4] = 9;
  expect_error(bad, "version");
  expect_error(bytes.substr(0, bytes.size() - 3), "ckpt");
  expect_error(bytes + "zz", "trailing");
  expect_error("", "magic");
}
