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

// Run configuration. On disk it is a flat "section.key = value" text file;
// the key set is exactly the fields below (see config_keys()).

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mgpn {

enum class GridScheme { kSparse, kDense };

struct ModelConfig {
  int T = 64;             // sampled clips
  int C = 256;            // hidden size
  int L_max = 32;         // longer queries are truncated
  int gru_layers = 2;
  std::vector<int> ngram_kernels{1, 2, 3};
  int comparison_blocks = 4;
  int groups = 32;
  int kernel = 7;
  int padding = 3;
  double theta_min = 0.5;
  double theta_max = 1.0;
  int feature_dim = 0;  // 0 = take D_v from the dataset
  int word_dim = 300;
  GridScheme scheme = GridScheme::kSparse;
  // Component switches for ablations; all on is the full network.
  bool use_fine_grained = true;
  bool use_interaction = true;
  bool use_comparison = true;

  /// Throws ConfigError on an inconsistent combination.
  void validate() const;
};

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 64;
  int epochs = 15;
  std::uint64_t seed = 1;
  std::string checkpoint_dir = "checkpoints";

  void validate() const;
};

struct EvalConfig {
  double nms_threshold = 0.49;
  std::vector<int> ranks{1, 5};
  std::vector<double> ious{0.3, 0.5, 0.7};

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  /// Sets one dotted key from its text form. Throws ConfigError on an
  /// unknown key or unparsable value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// Every key, one "key = value" per line, in config_keys() order.
  std::string to_text() const;
  void validate() const;
};

const std::vector<std::string>& config_keys();

/// Parses config text. With require_all, a key absent from the text raises
/// ConfigError naming it; otherwise absent keys keep their defaults.
RunConfig parse_config(std::string_view text, bool require_all,
                       const std::string& source = "<config>");
RunConfig load_config(const std::string& path, bool require_all = true);

std::string scheme_name(GridScheme s);
GridScheme parse_scheme(std::string_view s);

}  // namespace mgpn
