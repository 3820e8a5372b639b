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

#include "mgpn/tensor.hpp"

#include <numeric>
#include <sstream>

#include "mgpn/errors.hpp"

namespace mgpn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) os << 'x';
    os << shape[k];
  }
  return os.str();
}

ParamStore::Entry& ParamStore::add(const std::string& name,
                                   std::vector<std::size_t> shape) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  Entry e;
  e.name = name;
  e.data.assign(shape_product(shape), 0.0);
  e.shape = std::move(shape);
  entries_.push_back(std::move(e));
  return entries_.back();
}

bool ParamStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second];
}

namespace {
Eigen::Index rows_of(const ParamStore::Entry& e) {
  return e.shape.empty() ? 1 : static_cast<Eigen::Index>(e.shape[0]);
}
}  // namespace

MatMap ParamStore::mat(const std::string& name) {
  Entry& e = entry(name);
  const Eigen::Index r = rows_of(e);
  return MatMap(e.data.data(), r, static_cast<Eigen::Index>(e.data.size()) / r);
}

ConstMatMap ParamStore::mat(const std::string& name) const {
  const Entry& e = entry(name);
  const Eigen::Index r = rows_of(e);
  return ConstMatMap(e.data.data(), r, static_cast<Eigen::Index>(e.data.size()) / r);
}

VecMap ParamStore::vec(const std::string& name) {
  Entry& e = entry(name);
  return VecMap(e.data.data(), static_cast<Eigen::Index>(e.data.size()));
}

ConstVecMap ParamStore::vec(const std::string& name) const {
  const Entry& e = entry(name);
  return ConstVecMap(e.data.data(), static_cast<Eigen::Index>(e.data.size()));
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, e.shape);
  return out;
}

void ParamStore::set_zero() {
  for (auto& e : entries_) std::fill(e.data.begin(), e.data.end(), 0.0);
}

void ParamStore::accumulate(const ParamStore& other) {
  if (!same_layout(other)) throw ConfigError("parameter layouts differ");
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    auto& dst = entries_[k].data;
    const auto& src = other.entries_[k].data;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.data.size();
  return n;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (entries_[k].name != other.entries_[k].name ||
        entries_[k].shape != other.entries_[k].shape)
      return false;
  }
  return true;
}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal(double mean, double stddev) {
  if (stddev == 0.0) return mean;
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

int Rng::uniform_int(int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(engine_);
}

}  // namespace mgpn
