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

#include "mgpn/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "mgpn/binary_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_float(std::string_view s, float& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string line_ref(const std::string& source, int line_no) {
  return source + ":" + std::to_string(line_no);
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, std::ios::in | mode);
  if (!in) throw FormatError("cannot open: " + path.string());
  return in;
}

}  // namespace

std::vector<Annotation> parse_annotations(std::istream& in, const std::string& source) {
  std::vector<Annotation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 5)
      throw ParseError(line_ref(source, line_no) +
                       ": expected 'video_id duration start end query...'");
    Annotation a;
    a.video_id = std::string(fields[0]);
    if (!parse_double(fields[1], a.duration) || !parse_double(fields[2], a.gt_span.start_s) ||
        !parse_double(fields[3], a.gt_span.end_s))
      throw ParseError(line_ref(source, line_no) + ": bad number");
    for (std::size_t k = 4; k < fields.size(); ++k) {
      if (k > 4) a.query += ' ';
      a.query += fields[k];
    }
    if (!(a.duration > 0.0))
      throw ValidationError(line_ref(source, line_no) + ": duration must be positive");
    if (!(0.0 <= a.gt_span.start_s && a.gt_span.start_s < a.gt_span.end_s &&
          a.gt_span.end_s <= a.duration))
      throw ValidationError(line_ref(source, line_no) +
                            ": span must satisfy 0 <= start < end <= duration");
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_annotations(in, path.string());
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<Annotation>& records) {
  auto out = open_out(path);
  for (const auto& a : records) {
    out << a.video_id << ' ' << format_shortest(a.duration) << ' '
        << format_shortest(a.gt_span.start_s) << ' ' << format_shortest(a.gt_span.end_s)
        << ' ' << a.query << '\n';
  }
}

ClipFeatureSequence load_features(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader reader(bytes, path.string());
  if (reader.remaining() < 4 || bytes.compare(0, 4, "MGPF") != 0)
    throw FormatError(path.string() + ": bad magic, expected MGPF");
  reader.skip(4);
  const std::uint32_t tv = reader.u32();
  const std::uint32_t dv = reader.u32();
  if (tv == 0 || dv == 0) throw FormatError(path.string() + ": empty feature shape");
  const std::size_t count = static_cast<std::size_t>(tv) * dv;
  if (reader.remaining() != count * 4)
    throw FormatError(path.string() + ": payload holds " + std::to_string(reader.remaining()) +
                      " bytes, header promises " + std::to_string(count * 4));
  ClipFeatureSequence seq;
  seq.video_id = path.stem().string();
  seq.feats.resize(tv, dv);
  for (std::size_t k = 0; k < count; ++k) {
    const float v = reader.f32();
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite feature value");
    seq.feats.data()[k] = v;
  }
  return seq;
}

void write_features(const std::filesystem::path& path, const ClipFeatureSequence& seq) {
  ByteWriter w;
  w.raw("MGPF");
  w.u32(static_cast<std::uint32_t>(seq.feats.rows()));
  w.u32(static_cast<std::uint32_t>(seq.feats.cols()));
  for (Eigen::Index k = 0; k < seq.feats.size(); ++k)
    w.f32(static_cast<float>(seq.feats.data()[k]));
  auto out = open_out(path, std::ios::binary);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
}

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

Vocab Vocab::load(const std::filesystem::path& path) {
  auto in = open_in(path);
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.size() != 1)
      throw ParseError(line_ref(path.string(), line_no) + ": expected exactly one token");
    const std::string tok(fields[0]);
    if (v.index_.count(tok))
      throw ParseError(line_ref(path.string(), line_no) + ": duplicate token '" + tok + "'");
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  if (v.tokens_.size() < 2)
    throw ParseError(path.string() + ": vocabulary must start with pad and unk entries");
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

Mat load_word_vectors(const std::filesystem::path& path, const Vocab& vocab, int dim,
                      std::uint64_t seed) {
  Mat out = Mat::Zero(vocab.size(), dim);
  // Every non-pad row gets a draw in id order so a token's fallback row
  // depends only on (seed, id).
  Rng rng(seed);
  for (int id = 1; id < vocab.size(); ++id)
    for (int c = 0; c < dim; ++c) out(id, c) = rng.uniform(-0.1, 0.1);

  auto in = open_in(path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (static_cast<int>(fields.size()) != dim + 1)
      throw FormatError(line_ref(path.string(), line_no) + ": expected token plus " +
                        std::to_string(dim) + " values, got " +
                        std::to_string(fields.size() - 1));
    const int id = vocab.id(std::string(fields[0]));
    if (id == Vocab::kUnk && fields[0] != vocab.token(Vocab::kUnk)) continue;
    for (int c = 0; c < dim; ++c) {
      float v = 0.0f;
      if (!parse_float(fields[static_cast<std::size_t>(c) + 1], v))
        throw FormatError(line_ref(path.string(), line_no) + ": bad value");
      out(id, c) = v;
    }
  }
  return out;
}

void write_word_vectors(const std::filesystem::path& path, const Vocab& vocab,
                        const Mat& vectors) {
  auto out = open_out(path);
  for (int id = 2; id < vocab.size(); ++id) {
    out << vocab.token(id);
    for (Eigen::Index c = 0; c < vectors.cols(); ++c)
      out << ' ' << format_shortest(static_cast<float>(vectors(id, c)));
    out << '\n';
  }
}

int TokenSequence::real_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

TokenSequence tokenize(std::string_view query, const Vocab& vocab, int max_len) {
  TokenSequence seq;
  for (auto word : split_ws(query)) {
    if (max_len > 0 && static_cast<int>(seq.token_ids.size()) == max_len) break;
    std::string lower(word);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    seq.token_ids.push_back(vocab.id(lower));
    seq.mask.push_back(true);
  }
  if (seq.token_ids.empty()) throw ValidationError("empty query");
  return seq;
}

int leading_count(const std::vector<bool>& mask) {
  int n = 0;
  while (n < static_cast<int>(mask.size()) && mask[static_cast<std::size_t>(n)]) ++n;
  for (std::size_t k = static_cast<std::size_t>(n); k < mask.size(); ++k)
    if (mask[k]) throw ValidationError("mask has a real token after padding");
  if (n == 0) throw ValidationError("query has no unmasked token");
  return n;
}

QueryBatch make_batch(const std::vector<TokenSequence>& queries, int L) {
  QueryBatch batch;
  batch.L = L;
  batch.rows.reserve(queries.size());
  for (const auto& q : queries) {
    const int n = leading_count(q.mask);
    if (n > L) throw ValidationError("padded length is shorter than a query");
    TokenSequence row;
    row.token_ids.assign(static_cast<std::size_t>(L), Vocab::kPad);
    row.mask.assign(static_cast<std::size_t>(L), false);
    for (int k = 0; k < n; ++k) {
      row.token_ids[static_cast<std::size_t>(k)] = q.token_ids[static_cast<std::size_t>(k)];
      row.mask[static_cast<std::size_t>(k)] = true;
    }
    batch.rows.push_back(std::move(row));
  }
  return batch;
}

Mat embed(const TokenSequence& tokens, const Mat& word_vectors) {
  Mat out = Mat::Zero(tokens.padded_length(), word_vectors.cols());
  for (int k = 0; k < tokens.padded_length(); ++k) {
    if (!tokens.mask[static_cast<std::size_t>(k)]) continue;
    const int id = tokens.token_ids[static_cast<std::size_t>(k)];
    if (id < 0 || id >= word_vectors.rows()) throw ValidationError("token id out of range");
    out.row(k) = word_vectors.row(id);
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (num_samples < 1) throw ValidationError("synthetic: num_samples must be >= 1");
  if (T_V < 1 || D_v < 1 || word_dim < 1)
    throw ValidationError("synthetic: T_V, D_v and word_dim must be >= 1");
  if (query_len_min < 1 || query_len_min > query_len_max)
    throw ValidationError("synthetic: query length range is empty");
  if (vocab_size < query_len_max)
    throw ValidationError("synthetic: vocab_size must cover the longest query");
  if (!(0.0 < span_frac_min && span_frac_min <= span_frac_max && span_frac_max <= 1.0))
    throw ValidationError("synthetic: span fraction range must lie in (0, 1]");
  if (!(noise_std >= 0.0)) throw ValidationError("synthetic: noise_std must be >= 0");
}

SyntheticDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset data;
  Rng rng(spec.seed);

  for (int k = 0; k < spec.vocab_size; ++k) {
    char name[16];
    std::snprintf(name, sizeof(name), "w%02d", k);
    data.vocab.add(name);
  }
  const int V = data.vocab.size();
  data.codebook = Mat::Zero(V, spec.D_v);
  for (int id = 2; id < V; ++id)
    for (int c = 0; c < spec.D_v; ++c) data.codebook(id, c) = rng.normal(0.0, 1.0);
  data.word_vectors = Mat::Zero(V, spec.word_dim);
  for (int id = 2; id < V; ++id)
    for (int c = 0; c < spec.word_dim; ++c)
      data.word_vectors(id, c) = static_cast<float>(rng.normal(0.0, 0.5));

  std::vector<int> pool(static_cast<std::size_t>(spec.vocab_size));
  for (int s = 0; s < spec.num_samples; ++s) {
    const int n_tokens = rng.uniform_int(spec.query_len_min, spec.query_len_max);
    for (int k = 0; k < spec.vocab_size; ++k) pool[static_cast<std::size_t>(k)] = k + 2;
    std::vector<int> tokens;
    for (int k = 0; k < n_tokens; ++k) {
      const int pick = rng.uniform_int(k, spec.vocab_size - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick)]);
      tokens.push_back(pool[static_cast<std::size_t>(k)]);
    }

    // Quarter-second clip lengths keep every boundary exactly representable.
    const double clip_len = 0.25 * rng.uniform_int(4, 12);
    const double frac = rng.uniform(spec.span_frac_min, spec.span_frac_max);
    const int span_len = std::clamp(static_cast<int>(std::lround(frac * spec.T_V)), 1, spec.T_V);
    const int start = rng.uniform_int(0, spec.T_V - span_len);

    Annotation a;
    char vid[32];
    std::snprintf(vid, sizeof(vid), "vid%05d", s);
    a.video_id = vid;
    a.duration = clip_len * spec.T_V;
    a.gt_span = {clip_len * start, clip_len * (start + span_len)};
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (k) a.query += ' ';
      a.query += data.vocab.token(tokens[k]);
    }

    Vec signal = Vec::Zero(spec.D_v);
    for (int t : tokens) signal += data.codebook.row(t).transpose();
    signal /= static_cast<double>(tokens.size());
    const double rms = std::sqrt(signal.squaredNorm() / spec.D_v);
    const double out_std = std::sqrt(rms * rms + spec.noise_std * spec.noise_std);

    ClipFeatureSequence seq;
    seq.video_id = a.video_id;
    seq.feats.resize(spec.T_V, spec.D_v);
    for (int t = 0; t < spec.T_V; ++t) {
      const bool inside = t >= start && t < start + span_len;
      for (int c = 0; c < spec.D_v; ++c) {
        const double v = inside ? signal(c) + rng.normal(0.0, spec.noise_std)
                                : rng.normal(0.0, out_std);
        seq.feats(t, c) = static_cast<float>(v);
      }
    }
    data.annotations.push_back(std::move(a));
    data.features.push_back(std::move(seq));
  }
  return data;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data,
                     int n_train) {
  std::filesystem::create_directories(dir / "features");
  data.vocab.save(dir / "vocab.txt");
  write_word_vectors(dir / "glove.txt", data.vocab, data.word_vectors);
  const auto split = data.annotations.begin() +
                     std::clamp<std::ptrdiff_t>(n_train, 0, std::ssize(data.annotations));
  write_annotations(dir / "train.txt", {data.annotations.begin(), split});
  write_annotations(dir / "test.txt", {split, data.annotations.end()});
  for (const auto& f : data.features) write_features(dir / "features" / (f.video_id + ".mgpf"), f);
}

int Dataset::feature_dim() const { return features_.empty() ? 0 : features_.front().dim(); }

Dataset Dataset::open(const std::filesystem::path& dir, const std::string& split, int word_dim,
                      int max_query_len) {
  Dataset ds;
  ds.annotations_ = load_annotations(dir / (split + ".txt"));
  ds.vocab_ = Vocab::load(dir / "vocab.txt");
  ds.word_vectors_ = load_word_vectors(dir / "glove.txt", ds.vocab_, word_dim);

  std::unordered_map<std::string, int> feature_index;
  std::set<std::string> missing;
  for (const auto& a : ds.annotations_) {
    if (feature_index.count(a.video_id) || missing.count(a.video_id)) continue;
    const auto path = dir / "features" / (a.video_id + ".mgpf");
    if (!std::filesystem::exists(path)) {
      missing.insert(a.video_id);
      continue;
    }
    feature_index.emplace(a.video_id, static_cast<int>(ds.features_.size()));
    ds.features_.push_back(load_features(path));
    if (ds.features_.back().dim() != ds.features_.front().dim())
      throw FormatError(path.string() + ": feature dimension differs from other videos");
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw ValidationError("missing features for annotated videos: " + ids);
  }
  for (const auto& a : ds.annotations_) {
    Sample s;
    s.video_id = a.video_id;
    s.duration = a.duration;
    s.gt_span = a.gt_span;
    s.query = tokenize(a.query, ds.vocab_, max_query_len);
    s.feature_index = feature_index.at(a.video_id);
    ds.samples_.push_back(std::move(s));
  }
  return ds;
}

Dataset Dataset::from_synthetic(const SyntheticDataset& data, int begin, int end,
                                int max_query_len) {
  if (begin < 0 || end > std::ssize(data.annotations) || begin > end)
    throw ValidationError("synthetic split out of range");
  Dataset ds;
  ds.vocab_ = data.vocab;
  ds.word_vectors_ = data.word_vectors;
  for (int k = begin; k < end; ++k) {
    const auto& a = data.annotations[static_cast<std::size_t>(k)];
    ds.annotations_.push_back(a);
    ds.features_.push_back(data.features[static_cast<std::size_t>(k)]);
    Sample s;
    s.video_id = a.video_id;
    s.duration = a.duration;
    s.gt_span = a.gt_span;
    s.query = tokenize(a.query, ds.vocab_, max_query_len);
    s.feature_index = k - begin;
    ds.samples_.push_back(std::move(s));
  }
  return ds;
}

}  // namespace mgpn
