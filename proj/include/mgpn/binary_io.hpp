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

// Little-endian byte packing shared by the feature and checkpoint formats,
// plus shortest round-trip number formatting for text outputs.

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace mgpn {

class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.append(bytes); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked reader; every overrun throws FormatError naming `source`.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n);
  std::string_view raw(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str();

 private:
  void need(std::size_t n) const;

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

/// Shortest decimal text that parses back to the same value.
std::string format_shortest(double v);
std::string format_shortest(float v);

}  // namespace mgpn
