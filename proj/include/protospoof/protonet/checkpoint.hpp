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

// Model checkpoint codec.
//
//   "PSFM" | version u16 | dim u32 | heads u32 | aggregation u8 |
//   objective u8 | distance u8 | blocks...
//   block: name_len u16 | name (UTF-8) | rows u32 | cols u32 | rows*cols f32
//
// All integers and floats little-endian. Blocks continue to end of file.

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>

#include "protospoof/binary_io.hpp"
#include "protospoof/protonet/model.hpp"

namespace protospoof {

inline constexpr std::string_view kModelMagic = "PSFM";
inline constexpr std::uint16_t kModelVersion = 1;

inline std::string encode_model(const FewShotModel& model) {
  io::ByteWriter w;
  const ModelConfig& c = model.config();
  w.bytes(kModelMagic);
  w.uint(kModelVersion);
  w.uint(static_cast<std::uint32_t>(c.dim));
  w.uint(static_cast<std::uint32_t>(c.heads));
  w.uint(static_cast<std::uint8_t>(c.aggregation));
  w.uint(static_cast<std::uint8_t>(c.objective));
  w.uint(static_cast<std::uint8_t>(c.distance));
  for (const Parameter& p : model.params().params()) {
    w.str16(p.name);
    w.uint(static_cast<std::uint32_t>(p.value.rows()));
    w.uint(static_cast<std::uint32_t>(p.value.cols()));
    for (double v : p.value.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

inline FewShotModel decode_model(std::string_view bytes) {
  io::ByteReader r(bytes);
  std::string magic;
  if (!r.bytes(4, magic) || magic != kModelMagic) throw FormatError("not a model checkpoint (bad magic)");
  std::uint16_t version = 0;
  std::uint32_t dim = 0, heads = 0;
  std::uint8_t agg = 0, obj = 0, dist = 0;
  if (!r.uint(version)) throw FormatError("truncated checkpoint header");
  if (version != kModelVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  if (!r.uint(dim) || !r.uint(heads) || !r.uint(agg) || !r.uint(obj) || !r.uint(dist))
    throw FormatError("truncated checkpoint header");
  if (agg > 1 || obj > 1 || dist > 1) throw FormatError("checkpoint header has an unknown mode value");
  ModelConfig config{dim, heads, static_cast<Aggregation>(agg), static_cast<Objective>(obj),
                     static_cast<Distance>(dist)};

  ParamStore store;
  std::size_t block = 0;
  while (!r.at_end()) {
    std::string name;
    std::uint32_t rows = 0, cols = 0;
    if (!r.str16(name) || !r.uint(rows) || !r.uint(cols))
      throw CorruptRecordError("parameter block " + std::to_string(block) + " header is truncated");
    if (!io::valid_utf8(name)) throw CorruptRecordError("parameter block " + std::to_string(block) + " name is not UTF-8");
    if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining())
      throw CorruptRecordError("parameter block '" + name + "' is truncated");
    Tensor2 t(rows, cols);
    for (double& v : t.data()) {
      float f = 0.0f;
      r.f32(f);
      if (!std::isfinite(f)) throw CorruptRecordError("parameter block '" + name + "' holds a non-finite value");
      v = f;
    }
    store.add(std::move(name), std::move(t));
    ++block;
  }
  return FewShotModel::from_params(config, std::move(store));
}

inline void save_model(const FewShotModel& model, const std::filesystem::path& path) {
  io::write_file(path, encode_model(model));
}

inline FewShotModel load_model(const std::filesystem::path& path) { return decode_model(io::read_file(path)); }

}  // namespace protospoof
