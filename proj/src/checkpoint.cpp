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

#include "mgpn/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "mgpn/binary_io.hpp"
#include "mgpn/errors.hpp"

namespace mgpn {
namespace {

constexpr std::string_view kMagic = "MGPC";

void put_store(ByteWriter& w, const std::string& kind, const ParamStore& store) {
  for (const auto& e : store.entries()) {
    w.str(kind + e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : e.data) w.f32(static_cast<float>(v));
  }
}

}  // namespace

std::string encode_checkpoint(const RunConfig& config, const TrainState& state) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(state.epoch));
  w.u64(state.adam.steps());
  RunConfig echo = config;
  echo.model = state.model.config;
  w.str(echo.to_text());
  const bool with_adam = state.adam.first_moment().same_layout(state.model.params);
  std::size_t n = state.model.params.entries().size() + state.model.buffers.entries().size();
  if (with_adam) n += 2 * state.model.params.entries().size();
  w.u32(static_cast<std::uint32_t>(n));
  put_store(w, "param/", state.model.params);
  put_store(w, "buffer/", state.model.buffers);
  if (with_adam) {
    put_store(w, "adam.m/", state.adam.first_moment());
    put_store(w, "adam.v/", state.adam.second_moment());
  }
  return w.bytes();
}

TrainState decode_checkpoint(std::string_view bytes, const std::string& source,
                             RunConfig* config_out) {
  ByteReader r(bytes, source);
  if (bytes.size() < 4 || r.raw(4) != kMagic) throw FormatError(source + ": bad magic, not a checkpoint");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
  TrainState state;
  state.epoch = static_cast<int>(r.u32());
  const auto steps = r.u64();
  RunConfig config;
  try {
    config = parse_config(r.str(), true, source + " (embedded config)");
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  if (config.model.feature_dim <= 0)
    throw FormatError(source + ": embedded config has no feature dimension");
  state.model = build_model(config.model);
  state.adam = Adam(state.model.params);
  state.adam.set_steps(steps);

  const auto n = r.u32();
  std::size_t required_seen = 0;
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::string full = r.str();
    const auto slash = full.find('/');
    if (slash == std::string::npos) throw FormatError(source + ": record name without kind: " + full);
    const std::string kind = full.substr(0, slash), name = full.substr(slash + 1);
    ParamStore* store = nullptr;
    if (kind == "param") store = &state.model.params;
    else if (kind == "buffer") store = &state.model.buffers;
    else if (kind == "adam.m") store = &state.adam.first_moment();
    else if (kind == "adam.v") store = &state.adam.second_moment();
    if (!store || !store->contains(name))
      throw FormatError(source + ": unexpected record " + full);
    auto& e = store->entry(name);
    if (kind == "param" || kind == "buffer") ++required_seen;
    const auto ndim = r.u32();
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = r.u32();
    if (shape != e.shape)
      throw FormatError(source + ": record " + full + " has shape " + shape_to_string(shape) +
                        ", expected " + shape_to_string(e.shape));
    for (double& v : e.data) v = static_cast<double>(r.f32());
  }
  if (required_seen !=
      state.model.params.entries().size() + state.model.buffers.entries().size())
    throw FormatError(source + ": checkpoint is missing parameter records");
  if (r.remaining() != 0)
    throw FormatError(source + ": " + std::to_string(r.remaining()) + " trailing bytes");
  if (config_out) *config_out = config;
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const TrainState& state) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << encode_checkpoint(config, state);
  if (!out) throw FormatError("write failed: " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path, RunConfig* config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string(), config);
}

}  // namespace mgpn
