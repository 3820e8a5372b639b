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

// Checkpoint container, little-endian:
//
//   "MGPC" | u32 version (1) | u32 epoch | u64 adam_steps
//   | str config_text | u32 n_records
//   | n_records x ( str name | u32 ndim | u32 dims[ndim] | f32 data[prod dims] )
//
// str is u32 byte length + bytes. Record names carry a kind prefix:
// "param/", "buffer/", "adam.m/", "adam.v/". The config text is the full
// "key = value" listing; it alone determines the parameter layout.

#include <filesystem>
#include <string>

#include "mgpn/config.hpp"
#include "mgpn/model.hpp"
#include "mgpn/training.hpp"

namespace mgpn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const RunConfig& config, const TrainState& state);
/// Throws FormatError on bad magic, version, truncation, unknown record
/// names or shapes that disagree with the embedded config.
TrainState decode_checkpoint(std::string_view bytes, const std::string& source,
                             RunConfig* config = nullptr);

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path, RunConfig* config = nullptr);

}  // namespace mgpn
