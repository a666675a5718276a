// Copyright 2026 The protospoof Authors
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

// Little-endian primitives shared by the dataset, model and Gaussian codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "protospoof/error.hpp"

namespace protospoof::io {

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

  template <typename UInt>
  void uint(UInt value) {
    static_assert(std::is_unsigned_v<UInt>);
    for (std::size_t i = 0; i < sizeof(UInt); ++i) buf_.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }

  void f32(float value) { uint(std::bit_cast<std::uint32_t>(value)); }
  void f64(double value) { uint(std::bit_cast<std::uint64_t>(value)); }

  /// u16 length prefix followed by raw UTF-8 bytes.
  void str16(std::string_view s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max())
      throw FormatError("string longer than 65535 bytes cannot be encoded");
    uint(static_cast<std::uint16_t>(s.size()));
    bytes(s);
  }

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

/// Reader over an in-memory buffer. Every accessor returns false on
/// truncation so the caller can attribute the failure to a record.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  bool bytes(std::size_t n, std::string& out) {
    if (remaining() < n) return false;
    out.assign(data_.substr(pos_, n));
    pos_ += n;
    return true;
  }

  template <typename UInt>
  bool uint(UInt& out) {
    if (remaining() < sizeof(UInt)) return false;
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
      v |= static_cast<UInt>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(UInt);
    out = v;
    return true;
  }

  bool f32(float& out) {
    std::uint32_t bits = 0;
    if (!uint(bits)) return false;
    out = std::bit_cast<float>(bits);
    return true;
  }

  bool f64(double& out) {
    std::uint64_t bits = 0;
    if (!uint(bits)) return false;
    out = std::bit_cast<double>(bits);
    return true;
  }

  bool str16(std::string& out) {
    std::uint16_t n = 0;
    return uint(n) && bytes(n, out);
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Strict UTF-8 check (rejects overlongs, surrogates and values past U+10FFFF).
inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) { ++i; continue; }
    if ((c >> 5) == 0x6) { len = 2; cp = c & 0x1F; }
    else if ((c >> 4) == 0xE) { len = 3; cp = c & 0x0F; }
    else if ((c >> 3) == 0x1E) { len = 4; cp = c & 0x07; }
    else return false;
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace protospoof::io
