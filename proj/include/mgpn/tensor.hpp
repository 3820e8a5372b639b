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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace mgpn {

// All model arithmetic is double precision. Sequences are row-major
// matrices (one row per step); a T x T x C moment map is stored as a
// (T*T) x C matrix with row index i*T + j.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

/// Named, shaped arrays addressed by hierarchical dotted names
/// ("video.gru.l0.fwd.w_ih"). Insertion order is preserved so that
/// serialization and parameter sampling are deterministic.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };

  /// Adds a zero-filled array. Throws ConfigError on a duplicate name.
  Entry& add(const std::string& name, std::vector<std::size_t> shape);

  bool contains(const std::string& name) const;
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  /// Matrix view: rows = shape[0], cols = product of the remaining dims.
  MatMap mat(const std::string& name);
  ConstMatMap mat(const std::string& name) const;
  VecMap vec(const std::string& name);
  ConstVecMap vec(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  void set_zero();
  /// this += other (layouts must match).
  void accumulate(const ParamStore& other);
  std::size_t element_count() const;
  bool same_layout(const ParamStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// Seeded random source shared by initialization, shuffling and the
/// synthetic generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  /// Inclusive integer range.
  int uniform_int(int lo, int hi);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace mgpn
