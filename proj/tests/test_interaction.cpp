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

#include "mgpn/errors.hpp"
#include "mgpn/interaction.hpp"
#include "test_util.hpp"

using namespace mgpn;
using namespace mgpn::testutil;

namespace {

using Sz = std::size_t;

ParamStore gate_params(int C) {
  ParamStore p;
  p.add("interact.query.weight", {Sz(C), Sz(C)});
  p.add("interact.query.bias", {Sz(C)});
  p.add("interact.video.weight", {Sz(C), Sz(C)});
  p.add("interact.video.bias", {Sz(C)});
  return p;
}

struct Fixture {
  CandidateGrid grid;
  MomentFeatureMaps maps;
  FineQuery query;
  FineVideo video;
};

Fixture make_fixture(Rng& rng, int T, int C, int L, int n) {
  Fixture f;
  f.grid = build_grid(T, 1.0, GridScheme::kSparse);
  f.maps = build_moment_maps(random_mat(rng, T, C), f.grid);
  f.query.feats = Mat::Zero(L, C);
  f.query.feats.topRows(n) = random_mat(rng, n, C);
  f.query.mask.assign(Sz(L), false);
  for (int i = 0; i < n; ++i) f.query.mask[Sz(i)] = true;
  f.video.feats = random_mat(rng, T, C);
  return f;
}

Mat gate_oracle(const Fixture& f, const Vec& cond) {
  Mat out = Mat::Zero(f.maps.content.rows(), f.maps.content.cols());
  for (int i = 0; i < f.grid.T; ++i)
    for (int j = 0; j < f.grid.T; ++j) {
      if (!f.grid.is_valid(i, j)) continue;
      const int b = i * f.grid.T + j;
      for (Eigen::Index c = 0; c < out.cols(); ++c)
        out(b, c) = f.maps.content(b, c) / (1.0 + std::exp(-f.maps.boundary(b, c) * cond(c)));
    }
  return out;
}

}  // namespace

TEST_CASE("zero condition halves the content map") {
  Rng rng(41);
  auto f = make_fixture(rng, 8, 4, 3, 2);
  const auto p = gate_params(4);
  const Mat q = query_branch(f.query, f.maps, f.grid, p);
  const Mat v = video_branch(f.video, f.maps, f.grid, p);
  CHECK((q - 0.5 * f.maps.content).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((v - 0.5 * f.maps.content).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("query branch matches the formula") {
  Rng rng(42);
  const int C = 5;
  auto f = make_fixture(rng, 8, C, 4, 3);
  auto p = gate_params(C);
  randomize(p, rng, 0.5);
  Vec pooled(C);
  for (int c = 0; c < C; ++c) {
    double m = -1e300;
    for (int r = 0; r < 3; ++r) m = std::max(m, f.query.feats(r, c));
    pooled(c) = m;
  }
  const Vec cond = p.mat("interact.query.weight") * pooled + p.vec("interact.query.bias");
  const Mat got = query_branch(f.query, f.maps, f.grid, p);
  CHECK((got - gate_oracle(f, cond)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("video branch matches the formula") {
  Rng rng(43);
  const int C = 5;
  auto f = make_fixture(rng, 8, C, 4, 3);
  auto p = gate_params(C);
  randomize(p, rng, 0.5);
  Vec mean = Vec::Zero(C);
  for (int t = 0; t < 8; ++t) mean += f.video.feats.row(t).transpose() / 8.0;
  const Vec cond = p.mat("interact.video.weight") * mean + p.vec("interact.video.bias");
  const Mat got = video_branch(f.video, f.maps, f.grid, p);
  CHECK((got - gate_oracle(f, cond)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gated output is a fraction of the content map") {
  Rng rng(44);
  auto f = make_fixture(rng, 16, 6, 5, 5);
  auto p = gate_params(6);
  randomize(p, rng, 1.0);
  const Mat out = query_branch(f.query, f.maps, f.grid, p);
  for (int b : f.grid.blocks)
    for (int c = 0; c < 6; ++c) {
      const double a = f.maps.content(b, c);
      if (std::abs(a) < 1e-12) continue;
      const double ratio = out(b, c) / a;
      CHECK(ratio > 0.0);
      CHECK(ratio < 1.0);
    }
  for (int k = 0; k < 256; ++k)
    if (!f.grid.valid[Sz(k)]) CHECK(out.row(k).isZero());
}

TEST_CASE("padded tokens do not change the query condition") {
  Rng rng(45);
  auto f = make_fixture(rng, 8, 4, 5, 2);
  auto p = gate_params(4);
  randomize(p, rng);
  const Mat a = query_branch(f.query, f.maps, f.grid, p);
  f.query.feats.bottomRows(3).setConstant(1e6);
  const Mat b = query_branch(f.query, f.maps, f.grid, p);
  CHECK(a == b);
}

TEST_CASE("query branch needs a real token") {
  Rng rng(46);
  auto f = make_fixture(rng, 4, 3, 2, 1);
  f.query.mask = {false, false};
  CHECK_THROWS_AS(query_branch(f.query, f.maps, f.grid, gate_params(3)), ValidationError);
}

TEST_CASE("align concatenates channels") {
  Rng rng(47);
  const Mat a = random_mat(rng, 16, 3), b = random_mat(rng, 16, 3);
  const Mat c = align(a, b);
  CHECK(c.cols() == 6);
  CHECK(c.leftCols(3) == a);
  CHECK(c.rightCols(3) == b);
  CHECK_THROWS_AS(align(a, random_mat(rng, 9, 3)), ValidationError);
  CHECK_THROWS_AS(align(a, random_mat(rng, 16, 2)), ValidationError);
}

TEST_CASE("interaction gradients match finite differences") {
  Rng rng(48);
  const int T = 8, C = 4, L = 4;
  auto f = make_fixture(rng, T, C, L, 3);
  auto p = gate_params(C);
  randomize(p, rng, 0.5);
  Mat clips = random_mat(rng, T, C);
  const Mat R1 = random_mat(rng, T * T, C), R2 = random_mat(rng, T * T, C);
  auto loss = [&] {
    f.maps = build_moment_maps(clips, f.grid);
    const Mat o = align(query_branch(f.query, f.maps, f.grid, p),
                        video_branch(f.video, f.maps, f.grid, p));
    return (o.leftCols(C).array() * R1.array()).sum() +
           (o.rightCols(C).array() * R2.array()).sum();
  };
  ContentArgmax arg;
  f.maps = build_moment_maps(clips, f.grid, &arg);
  QueryGateCache qc;
  GateCache vc;
  query_branch(f.query, f.maps, f.grid, p, &qc);
  video_branch(f.video, f.maps, f.grid, p, &vc);
  auto g = p.zeros_like();
  Mat d_b = Mat::Zero(T * T, C), d_c = Mat::Zero(T * T, C);
  Mat d_q = Mat::Zero(L, C), d_v = Mat::Zero(T, C), d_clips = Mat::Zero(T, C);
  const Vec dcq = gated_backward(f.maps, f.grid, qc, R1, d_b, d_c);
  query_branch_backward(qc, dcq, p, g, d_q);
  const Vec dcv = gated_backward(f.maps, f.grid, vc, R2, d_b, d_c);
  video_branch_backward(vc, dcv, p, g, d_v);
  moment_maps_backward(f.grid, arg, d_c, d_b, d_clips);

  const auto rp = check_params(p, g, loss);
  INFO(rp.where);
  CHECK(rp.max_rel <= 1e-5);
  const auto rq = check_input(f.query.feats, d_q, loss, "query");
  INFO(rq.where);
  CHECK(rq.max_rel <= 1e-5);
  const auto rv = check_input(f.video.feats, d_v, loss, "video");
  INFO(rv.where);
  CHECK(rv.max_rel <= 1e-5);
  const auto rc = check_input(clips, d_clips, loss, "clips");
  INFO(rc.where);
  CHECK(rc.max_rel <= 1e-5);
}
