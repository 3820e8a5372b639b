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

#include "mgpn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mgpn/binary_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    out.push_back(parse_number<T>(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, value);
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += format_shortest(xs[k]);
    else
      out += std::to_string(xs[k]);
  }
  return out;
}

struct KeyOps {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MGPN_INT_KEY(name, field)                                                       \
  {name,                                                                                \
   {[](RunConfig& c, std::string_view v) { c.field = parse_number<int>(name, v); },     \
    [](const RunConfig& c) { return std::to_string(c.field); }}}
#define MGPN_REAL_KEY(name, field)                                                      \
  {name,                                                                                \
   {[](RunConfig& c, std::string_view v) { c.field = parse_number<double>(name, v); },  \
    [](const RunConfig& c) { return format_shortest(c.field); }}}
#define MGPN_BOOL_KEY(name, field)                                                      \
  {name,                                                                                \
   {[](RunConfig& c, std::string_view v) { c.field = parse_bool(name, v); },            \
    [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}}

const std::vector<std::pair<std::string, KeyOps>>& key_table() {
  static const std::vector<std::pair<std::string, KeyOps>> table = {
      MGPN_INT_KEY("model.T", model.T),
      MGPN_INT_KEY("model.C", model.C),
      MGPN_INT_KEY("model.L_max", model.L_max),
      MGPN_INT_KEY("model.gru_layers", model.gru_layers),
      {"model.ngram_kernels",
       {[](RunConfig& c, std::string_view v) {
          c.model.ngram_kernels = parse_list<int>("model.ngram_kernels", v);
        },
        [](const RunConfig& c) { return join(c.model.ngram_kernels); }}},
      MGPN_INT_KEY("model.comparison_blocks", model.comparison_blocks),
      MGPN_INT_KEY("model.groups", model.groups),
      MGPN_INT_KEY("model.kernel", model.kernel),
      MGPN_INT_KEY("model.padding", model.padding),
      MGPN_REAL_KEY("model.theta_min", model.theta_min),
      MGPN_REAL_KEY("model.theta_max", model.theta_max),
      MGPN_INT_KEY("model.feature_dim", model.feature_dim),
      MGPN_INT_KEY("model.word_dim", model.word_dim),
      {"model.scheme",
       {[](RunConfig& c, std::string_view v) { c.model.scheme = parse_scheme(v); },
        [](const RunConfig& c) { return scheme_name(c.model.scheme); }}},
      MGPN_BOOL_KEY("model.use_fine_grained", model.use_fine_grained),
      MGPN_BOOL_KEY("model.use_interaction", model.use_interaction),
      MGPN_BOOL_KEY("model.use_comparison", model.use_comparison),
      MGPN_REAL_KEY("train.lr", train.lr),
      MGPN_INT_KEY("train.batch_size", train.batch_size),
      MGPN_INT_KEY("train.epochs", train.epochs),
      {"train.seed",
       {[](RunConfig& c, std::string_view v) {
          c.train.seed = parse_number<std::uint64_t>("train.seed", v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"train.checkpoint_dir",
       {[](RunConfig& c, std::string_view v) {
          if (v.empty()) bad_value("train.checkpoint_dir", v);
          c.train.checkpoint_dir = std::string(v);
        },
        [](const RunConfig& c) { return c.train.checkpoint_dir; }}},
      MGPN_REAL_KEY("eval.nms_threshold", eval.nms_threshold),
      {"eval.ranks",
       {[](RunConfig& c, std::string_view v) { c.eval.ranks = parse_list<int>("eval.ranks", v); },
        [](const RunConfig& c) { return join(c.eval.ranks); }}},
      {"eval.ious",
       {[](RunConfig& c, std::string_view v) { c.eval.ious = parse_list<double>("eval.ious", v); },
        [](const RunConfig& c) { return join(c.eval.ious); }}},
  };
  return table;
}

#undef MGPN_INT_KEY
#undef MGPN_REAL_KEY
#undef MGPN_BOOL_KEY

const KeyOps& ops_for(std::string_view key) {
  for (const auto& [name, ops] : key_table())
    if (name == key) return ops;
  throw ConfigError("unknown config key: " + std::string(key));
}

}  // namespace

std::string scheme_name(GridScheme s) { return s == GridScheme::kDense ? "dense" : "sparse"; }

GridScheme parse_scheme(std::string_view s) {
  if (s == "sparse") return GridScheme::kSparse;
  if (s == "dense") return GridScheme::kDense;
  throw ConfigError("unknown grid scheme: '" + std::string(s) + "' (expected sparse|dense)");
}

void ModelConfig::validate() const {
  if (T < 1) throw ConfigError("model.T must be >= 1");
  if (C < 2 || C % 2 != 0) throw ConfigError("model.C must be even (bidirectional halves)");
  if (groups < 1 || C % groups != 0)
    throw ConfigError("model.C (" + std::to_string(C) + ") is not divisible by model.groups (" +
                      std::to_string(groups) + ")");
  if (L_max < 1) throw ConfigError("model.L_max must be >= 1");
  if (gru_layers < 1) throw ConfigError("model.gru_layers must be >= 1");
  if (ngram_kernels.empty()) throw ConfigError("model.ngram_kernels must not be empty");
  for (int k : ngram_kernels)
    if (k < 1) throw ConfigError("model.ngram_kernels entries must be >= 1");
  if (comparison_blocks < 0) throw ConfigError("model.comparison_blocks must be >= 0");
  if (kernel < 1 || kernel != 2 * padding + 1)
    throw ConfigError("model.kernel must equal 2 * model.padding + 1 to preserve the grid");
  if (!(0.0 <= theta_min && theta_min < theta_max && theta_max <= 1.0))
    throw ConfigError("model.theta_min < model.theta_max must hold within [0, 1]");
  if (feature_dim < 0 || word_dim < 1) throw ConfigError("bad model input dimensions");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
}

void EvalConfig::validate() const {
  if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0))
    throw ConfigError("eval.nms_threshold must lie in [0, 1]");
  for (int n : ranks)
    if (n < 1) throw ConfigError("eval.ranks entries must be >= 1");
  for (double m : ious)
    if (!(m > 0.0 && m <= 1.0)) throw ConfigError("eval.ious entries must lie in (0, 1]");
}

void RunConfig::set(std::string_view key, std::string_view value) {
  ops_for(key).set(*this, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return ops_for(key).get(*this); }

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, ops] : key_table()) out += name + " = " + ops.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  eval.validate();
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& entry : key_table()) out.push_back(entry.first);
    return out;
  }();
  return keys;
}

RunConfig parse_config(std::string_view text, bool require_all, const std::string& source) {
  RunConfig cfg;
  std::set<std::string> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    seen.insert(key);
  }
  if (require_all) {
    for (const auto& key : config_keys())
      if (!seen.count(key)) throw ConfigError(source + ": missing config key " + key);
  }
  return cfg;
}

RunConfig load_config(const std::string& path, bool require_all) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), require_all, path);
}

}  // namespace mgpn
