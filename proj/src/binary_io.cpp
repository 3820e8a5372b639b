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

#include "mgpn/binary_io.hpp"

#include <charconv>

#include "mgpn/errors.hpp"

namespace mgpn {

void ByteReader::need(std::size_t n) const {
  if (remaining() < n)
    throw FormatError(source_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                      std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
}

void ByteReader::skip(std::size_t n) {
  need(n);
  pos_ += n;
}

std::string_view ByteReader::raw(std::size_t n) {
  need(n);
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(bytes_[pos_++]);
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
  pos_ += 8;
  return v;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(raw(n));
}

std::string format_shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_shortest(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace mgpn
