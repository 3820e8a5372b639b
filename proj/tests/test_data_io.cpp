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

#include <filesystem>
#include <fstream>
#include <cstring>
#include <sstream>

#include "mgpn/data_io.hpp"
#include "mgpn/errors.hpp"
#include "test_util.hpp"

using namespace mgpn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mgpn_data_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("annotation line parses into one record") {
  std::istringstream in("v1 10.0 0.0 4.0 person opens door\n");
  const auto recs = parse_annotations(in, "mem");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].video_id == "v1");
  CHECK(recs[0].duration == 10.0);
  CHECK(recs[0].gt_span == MomentSpan{0.0, 4.0});
  CHECK(recs[0].query == "person opens door");
}

TEST_CASE("empty annotation file gives no records") {
  std::istringstream in("");
  CHECK(parse_annotations(in, "mem").empty());
}

TEST_CASE("reversed span is a validation error") {
  std::istringstream in("v1 10.0 5.0 3.0 a b\n");
  CHECK_THROWS_AS(parse_annotations(in, "mem"), ValidationError);
}

TEST_CASE("span past the duration is a validation error") {
  std::istringstream in("v1 10.0 5.0 11.0 a b\n");
  CHECK_THROWS_AS(parse_annotations(in, "mem"), ValidationError);
}

TEST_CASE("malformed record names its line") {
  std::istringstream in("v1 10 0 4 ok\nv2 ten 0 4 bad\n");
  try {
    parse_annotations(in, "ann.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("ann.txt:2") != std::string::npos);
  }
}

TEST_CASE("annotation order survives a write/read cycle") {
  const auto dir = scratch("ann");
  std::vector<Annotation> recs{{"b", 8.5, "x y", {0.25, 3.0}}, {"a", 4.0, "z", {1.0, 4.0}}};
  write_annotations(dir / "a.txt", recs);
  const auto back = load_annotations(dir / "a.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].video_id == "b");
  CHECK(back[0].gt_span == recs[0].gt_span);
  CHECK(back[1].query == "z");
}

TEST_CASE("feature file with header 8x4 loads as an 8x4 matrix") {
  const auto dir = scratch("feat");
  std::string bytes = "MGPF";
  auto put32 = [&](std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  };
  put32(8);
  put32(4);
  for (int i = 0; i < 32; ++i) {
    const float f = static_cast<float>(i) * 0.5f;
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put32(u);
  }
  write(dir / "v.mgpf", bytes);
  const auto seq = load_features(dir / "v.mgpf");
  CHECK(seq.video_id == "v");
  CHECK(seq.feats.rows() == 8);
  CHECK(seq.feats.cols() == 4);
  CHECK(seq.feats(7, 3) == 15.5);

  write(dir / "short.mgpf", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_features(dir / "short.mgpf"), FormatError);
  write(dir / "magic.mgpf", "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_features(dir / "magic.mgpf"), FormatError);
}

TEST_CASE("feature round trip is bitwise") {
  const auto dir = scratch("rt");
  Rng rng(5);
  ClipFeatureSequence seq{"clip", testutil::random_mat(rng, 5, 3)};
  for (Eigen::Index k = 0; k < seq.feats.size(); ++k)
    seq.feats.data()[k] = static_cast<float>(seq.feats.data()[k]);
  write_features(dir / "clip.mgpf", seq);
  const auto back = load_features(dir / "clip.mgpf");
  CHECK(back.feats == seq.feats);
  write_features(dir / "again.mgpf", back);
  CHECK(slurp(dir / "clip.mgpf") == slurp(dir / "again.mgpf"));
}

TEST_CASE("word vectors: file rows copied, others seeded") {
  const auto dir = scratch("wv");
  Vocab vocab;
  vocab.add("a");
  vocab.add("b");
  write(dir / "g.txt", "a 1 2 3\nzzz 4 5 6\n");
  const Mat wv = load_word_vectors(dir / "g.txt", vocab, 3);
  CHECK(wv.rows() == 4);
  CHECK(wv.row(2) == Eigen::RowVector3d(1, 2, 3));
  CHECK(wv.row(0).isZero());
  CHECK((wv.row(3).array().abs() <= 0.1).all());
  CHECK(load_word_vectors(dir / "g.txt", vocab, 3) == wv);

  write(dir / "bad.txt", "a 1 2\n");
  CHECK_THROWS_AS(load_word_vectors(dir / "bad.txt", vocab, 3), FormatError);
}

TEST_CASE("50-token vocabulary over a 3-line file gives 50 rows") {
  const auto dir = scratch("wv50");
  Vocab vocab;
  while (vocab.size() < 50) vocab.add("t" + std::to_string(vocab.size()));
  std::string text;
  for (int i = 2; i < 5; ++i) {
    text += "t" + std::to_string(i);
    for (int d = 0; d < 300; ++d) text += " 0.5";
    text += "\n";
  }
  write(dir / "g.txt", text);
  const Mat wv = load_word_vectors(dir / "g.txt", vocab);
  CHECK(wv.rows() == 50);
  CHECK(wv.cols() == 300);
  CHECK((wv.row(3).array() == 0.5).all());
}

TEST_CASE("tokenize lowercases and maps unknowns") {
  Vocab vocab;
  for (const char* w : {"open", "the", "door"}) vocab.add(w);
  const auto t = tokenize("Open the DOOR", vocab);
  CHECK(t.token_ids == std::vector<int>{2, 3, 4});
  CHECK(t.real_count() == 3);
  CHECK(tokenize("zzzq", vocab).token_ids == std::vector<int>{Vocab::kUnk});
  CHECK(tokenize("Open the DOOR", vocab).token_ids == t.token_ids);
  CHECK_THROWS_AS(tokenize("   ", vocab), ValidationError);
}

TEST_CASE("make_batch pads to L") {
  Vocab vocab;
  vocab.add("a");
  vocab.add("b");
  vocab.add("c");
  const auto b = make_batch({tokenize("a b", vocab), tokenize("a b c", vocab)}, 3);
  CHECK(b.rows[0].mask == std::vector<bool>{true, true, false});
  CHECK(b.rows[0].token_ids[2] == Vocab::kPad);
  CHECK(b.rows[1].mask == std::vector<bool>{true, true, true});
  const auto single = make_batch({tokenize("c a", vocab)}, 2);
  CHECK(single.rows[0].mask == std::vector<bool>{true, true});
}

TEST_CASE("make_batch true counts match query lengths") {
  Vocab vocab;
  for (int i = 0; i < 10; ++i) vocab.add("w" + std::to_string(i));
  Rng rng(11);
  std::vector<TokenSequence> qs;
  std::vector<int> lens;
  int L = 0;
  for (int s = 0; s < 4; ++s) {
    const int n = rng.uniform_int(1, 7);
    std::string q;
    for (int k = 0; k < n; ++k) q += "w" + std::to_string(rng.uniform_int(0, 9)) + " ";
    qs.push_back(tokenize(q, vocab));
    lens.push_back(n);
    L = std::max(L, n);
  }
  const auto b = make_batch(qs, L);
  for (int s = 0; s < 4; ++s) {
    CHECK(b.rows[static_cast<std::size_t>(s)].padded_length() == L);
    CHECK(b.rows[static_cast<std::size_t>(s)].real_count() == lens[static_cast<std::size_t>(s)]);
    CHECK(leading_count(b.rows[static_cast<std::size_t>(s)].mask) == lens[static_cast<std::size_t>(s)]);
  }
}

TEST_CASE("embed leaves padded rows zero") {
  Vocab vocab;
  vocab.add("a");
  Mat wv = Mat::Constant(3, 4, 2.0);
  const auto b = make_batch({tokenize("a", vocab)}, 3);
  const Mat e = embed(b.rows[0], wv);
  CHECK(e.row(0).isConstant(2.0));
  CHECK(e.bottomRows(2).isZero());
}

TEST_CASE("synthetic generator with zero noise plants the token mean") {
  SyntheticSpec spec;
  spec.num_samples = 20;
  spec.noise_std = 0.0;
  const auto d = gen_synthetic(spec);
  REQUIRE(d.annotations.size() == 20);
  REQUIRE(d.features.size() == 20);
  const Vocab& vocab = d.vocab;
  for (std::size_t s = 0; s < 20; ++s) {
    const auto& a = d.annotations[s];
    const auto tok = tokenize(a.query, vocab);
    Vec mean = Vec::Zero(spec.D_v);
    for (int id : tok.token_ids) mean += d.codebook.row(id).transpose();
    mean /= static_cast<double>(tok.token_ids.size());
    const double tau = a.duration / spec.T_V;
    const int start = static_cast<int>(std::lround(a.gt_span.start_s / tau));
    Vec rounded = mean;
    for (double& v : rounded) v = static_cast<float>(v);
    CHECK(d.features[s].feats.row(start).transpose() == rounded);
  }
}

TEST_CASE("synthetic generator is deterministic per seed") {
  SyntheticSpec spec;
  spec.num_samples = 15;
  const auto a = gen_synthetic(spec), b = gen_synthetic(spec);
  for (std::size_t s = 0; s < 15; ++s) {
    CHECK(a.features[s].feats == b.features[s].feats);
    CHECK(a.annotations[s].query == b.annotations[s].query);
    CHECK(a.annotations[s].gt_span == b.annotations[s].gt_span);
  }
  CHECK(a.word_vectors == b.word_vectors);
  spec.seed = 8;
  CHECK(gen_synthetic(spec).features[0].feats != a.features[0].feats);
}

TEST_CASE("synthetic write produces one feature file per sample") {
  const auto dir = scratch("synth");
  SyntheticSpec spec;
  const auto d = gen_synthetic(spec);
  write_synthetic(dir, d, 150);
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(dir / "features")) files += f.is_regular_file();
  CHECK(files == 200);
  CHECK(load_annotations(dir / "train.txt").size() == 150);
  CHECK(load_annotations(dir / "test.txt").size() == 50);
  const auto ds = Dataset::open(dir, "test");
  CHECK(ds.size() == 50);
  CHECK(ds.feature_dim() == 64);
  CHECK(ds.features(ds.samples()[0]).feats == d.features[150].feats);
}

TEST_CASE("dataset open lists every missing feature id") {
  const auto dir = scratch("missing");
  SyntheticSpec spec;
  spec.num_samples = 4;
  write_synthetic(dir, gen_synthetic(spec), 4);
  fs::remove(dir / "features" / "vid00001.mgpf");
  fs::remove(dir / "features" / "vid00003.mgpf");
  try {
    Dataset::open(dir, "train");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("vid00001") != std::string::npos);
    CHECK(msg.find("vid00003") != std::string::npos);
  }
}

TEST_CASE("planted signal is separable without noise") {
  SyntheticSpec spec;
  spec.num_samples = 100;
  spec.noise_std = 0.0;
  const auto d = gen_synthetic(spec);
  const Vocab& vocab = d.vocab;
  double in_cos = 0, out_cos = 0;
  int in_n = 0, out_n = 0;
  for (std::size_t s = 0; s < d.annotations.size(); ++s) {
    const auto& a = d.annotations[s];
    const auto tok = tokenize(a.query, vocab);
    Vec mean = Vec::Zero(spec.D_v);
    for (int id : tok.token_ids) mean += d.codebook.row(id).transpose();
    const double tau = a.duration / spec.T_V;
    for (int t = 0; t < spec.T_V; ++t) {
      const Vec row = d.features[s].feats.row(t).transpose();
      const double cos = row.dot(mean) / (row.norm() * mean.norm());
      const bool inside = (t + 0.5) * tau > a.gt_span.start_s && (t + 0.5) * tau < a.gt_span.end_s;
      (inside ? in_cos : out_cos) += cos;
      ++(inside ? in_n : out_n);
    }
  }
  CHECK(in_cos / in_n > out_cos / out_n + 0.5);
}
