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

// Dataset plumbing: annotation / feature / vocabulary / word-vector files,
// query tokenization and padding, and the seeded planted-span generator.
//
// On-disk layout of a dataset directory:
//   vocab.txt            one token per line, line number = id (0 <pad>, 1 <unk>)
//   glove.txt            "token v1 ... vD" per line
//   <split>.txt          annotations, "video_id duration start end query..."
//   features/<id>.mgpf   "MGPF" | u32 T_V | u32 D_v | f32[T_V*D_v], little-endian

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mgpn/moment_span.hpp"
#include "mgpn/tensor.hpp"

namespace mgpn {

struct Annotation {
  std::string video_id;
  double duration = 0.0;
  std::string query;
  MomentSpan gt_span;
};

std::vector<Annotation> parse_annotations(std::istream& in, const std::string& source);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<Annotation>& records);

struct ClipFeatureSequence {
  std::string video_id;
  Mat feats;  // T_V x D_v

  int length() const { return static_cast<int>(feats.rows()); }
  int dim() const { return static_cast<int>(feats.cols()); }
};

/// Reads an MGPF file. The video id is the file stem.
ClipFeatureSequence load_features(const std::filesystem::path& path);
/// Values are stored as float32; callers holding doubles lose precision.
void write_features(const std::filesystem::path& path, const ClipFeatureSequence& seq);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Returns the id of `token`, inserting it when new.
  int add(const std::string& token);
  /// Unknown tokens resolve to kUnk.
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr int kWordDim = 300;
inline constexpr std::uint64_t kOovSeed = 0x9e3779b97f4a7c15ULL;

/// Rows for tokens found in the file are copied; every other row except the
/// pad row is drawn from uniform(-0.1, 0.1) with a generator seeded by `seed`.
Mat load_word_vectors(const std::filesystem::path& path, const Vocab& vocab,
                      int dim = kWordDim, std::uint64_t seed = kOovSeed);
void write_word_vectors(const std::filesystem::path& path, const Vocab& vocab,
                        const Mat& vectors);

struct TokenSequence {
  std::vector<int> token_ids;  // padded length L
  std::vector<bool> mask;      // true = real token, all leading

  int padded_length() const { return static_cast<int>(mask.size()); }
  int real_count() const;
};

/// Lowercases, splits on whitespace, maps to ids. Throws ValidationError
/// on an empty query. `max_len` > 0 truncates.
TokenSequence tokenize(std::string_view query, const Vocab& vocab, int max_len = 0);

/// Number of leading true entries; throws ValidationError if the mask is
/// not of the form [true...true, false...false] or has no true entry.
int leading_count(const std::vector<bool>& mask);

struct QueryBatch {
  int L = 0;
  std::vector<TokenSequence> rows;
};

/// Right-pads every query to L with the pad id and a false mask.
QueryBatch make_batch(const std::vector<TokenSequence>& queries, int L);

/// L x dim matrix of word vectors; padded rows are zero.
Mat embed(const TokenSequence& tokens, const Mat& word_vectors);

struct SyntheticSpec {
  int num_samples = 200;
  int T_V = 16;
  int D_v = 64;
  int vocab_size = 24;
  int query_len_min = 2;
  int query_len_max = 5;
  double span_frac_min = 0.125;
  double span_frac_max = 0.5;
  double noise_std = 0.1;
  std::uint64_t seed = 7;
  int word_dim = kWordDim;

  void validate() const;
};

struct SyntheticDataset {
  std::vector<Annotation> annotations;
  std::vector<ClipFeatureSequence> features;  // one per annotation, same order
  Vocab vocab;
  Mat word_vectors;  // vocab.size() x word_dim
  Mat codebook;      // vocab.size() x D_v, the planted signal per token
};

/// Sample s gets a query of distinct random tokens and a clip-aligned span.
/// Clips inside the span equal the mean codebook row of the query tokens
/// plus N(0, noise_std^2) noise; clips outside are zero-mean gaussian with
/// the same per-entry second moment.
SyntheticDataset gen_synthetic(const SyntheticSpec& spec);

/// Writes vocab.txt, glove.txt, features/, and annotations split into
/// train.txt (first n_train records) and test.txt (the rest).
void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data,
                     int n_train);

/// A ready-to-train split: annotations joined with tokens and features.
struct Sample {
  std::string video_id;
  double duration = 0.0;
  MomentSpan gt_span;
  TokenSequence query;
  int feature_index = 0;
};

class Dataset {
 public:
  /// Loads <dir>/<split>.txt plus vocab, word vectors and features.
  /// Missing feature files raise ValidationError listing every absent id.
  static Dataset open(const std::filesystem::path& dir, const std::string& split,
                      int word_dim = kWordDim, int max_query_len = 0);
  /// In-memory view over records [begin, end) of a generated set.
  static Dataset from_synthetic(const SyntheticDataset& data, int begin, int end,
                                int max_query_len = 0);

  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }
  const ClipFeatureSequence& features(const Sample& s) const {
    return features_[static_cast<std::size_t>(s.feature_index)];
  }
  const Vocab& vocab() const { return vocab_; }
  const Mat& word_vectors() const { return word_vectors_; }
  int size() const { return static_cast<int>(samples_.size()); }
  int feature_dim() const;
  int word_dim() const { return static_cast<int>(word_vectors_.cols()); }

 private:
  std::vector<Annotation> annotations_;
  std::vector<Sample> samples_;
  std::vector<ClipFeatureSequence> features_;
  Vocab vocab_;
  Mat word_vectors_;
};

}  // namespace mgpn
