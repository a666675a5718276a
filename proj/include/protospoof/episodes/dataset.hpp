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

// Embedding dataset and its file codec.
//
//   "PSED" | version u16 | dim u32 | count u64 | records...
//   record: id (u16 len + UTF-8) | class label (u16 len + UTF-8) |
//           domain tag (u16 len + UTF-8) | dim x f32
//
// Little-endian throughout. The label "bonafide" marks genuine speech.

#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "protospoof/binary_io.hpp"
#include "protospoof/labels.hpp"
#include "protospoof/numkernel/tensor.hpp"

namespace protospoof {

struct EmbeddingRecord {
  std::string id;
  std::string label;
  std::string domain;
  std::vector<float> embedding;
};

class EmbeddingDataset {
 public:
  explicit EmbeddingDataset(std::size_t dim = 0) : dim_(dim) {}

  void add(EmbeddingRecord record) {
    const std::size_t index = records_.size();
    if (record.embedding.size() != dim_)
      throw CorruptRecordError("record " + std::to_string(index) + " has " + std::to_string(record.embedding.size()) +
                               " values, dataset dimension is " + std::to_string(dim_));
    for (float v : record.embedding)
      if (!std::isfinite(v)) throw CorruptRecordError("record " + std::to_string(index) + " holds a non-finite value");
    if (!ids_.insert(record.id).second)
      throw DuplicateIdError("record " + std::to_string(index) + " repeats id '" + record.id + "'");
    by_label_[record.label].push_back(index);
    records_.push_back(std::move(record));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_.at(i); }
  std::span<const EmbeddingRecord> records() const noexcept { return records_; }

  /// Distinct labels in lexicographic order.
  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& [label, idx] : by_label_) out.push_back(label);
    return out;
  }

  std::vector<std::string> spoof_labels() const {
    std::vector<std::string> out;
    for (const auto& [label, idx] : by_label_)
      if (is_spoof_label(label)) out.push_back(label);
    return out;
  }

  /// Record indices carrying `label`, in file order.
  const std::vector<std::size_t>& indices_of(std::string_view label) const {
    static const std::vector<std::size_t> none;
    const auto it = by_label_.find(std::string(label));
    return it == by_label_.end() ? none : it->second;
  }

  /// Every spoof record (all non-bonafide labels), in file order.
  std::vector<std::size_t> spoof_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records_.size(); ++i)
      if (is_spoof_label(records_[i].label)) out.push_back(i);
    return out;
  }

  std::size_t bonafide_count() const { return indices_of(kBonafide).size(); }
  std::size_t spoof_count() const { return records_.size() - bonafide_count(); }

  /// Embeddings of the given records as a double matrix.
  Tensor2 rows(std::span<const std::size_t> indices) const {
    Tensor2 out(indices.size(), dim_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto& e = records_.at(indices[i]).embedding;
      for (std::size_t j = 0; j < dim_; ++j) out(i, j) = e[j];
    }
    return out;
  }

  Tensor2 all_rows() const {
    std::vector<std::size_t> idx(records_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return rows(idx);
  }

  EmbeddingDataset subset(std::span<const std::size_t> indices) const {
    EmbeddingDataset out(dim_);
    for (std::size_t i : indices) out.add(records_.at(i));
    return out;
  }

  /// Training and evaluation need both classes present.
  void validate_for_training(std::string_view what = "dataset") const {
    if (bonafide_count() == 0) throw ValidationError(std::string(what) + " has no bonafide records");
    if (spoof_count() == 0) throw ValidationError(std::string(what) + " has no spoof records");
  }

  friend bool operator==(const EmbeddingDataset& a, const EmbeddingDataset& b) {
    if (a.dim_ != b.dim_ || a.records_.size() != b.records_.size()) return false;
    for (std::size_t i = 0; i < a.records_.size(); ++i) {
      const auto& x = a.records_[i];
      const auto& y = b.records_[i];
      if (x.id != y.id || x.label != y.label || x.domain != y.domain || x.embedding != y.embedding) return false;
    }
    return true;
  }

 private:
  std::size_t dim_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_set<std::string> ids_;
  std::map<std::string, std::vector<std::size_t>> by_label_;
};

inline constexpr std::string_view kDatasetMagic = "PSED";
inline constexpr std::uint16_t kDatasetVersion = 1;

inline std::string encode_dataset(const EmbeddingDataset& ds) {
  io::ByteWriter w;
  w.bytes(kDatasetMagic);
  w.uint(kDatasetVersion);
  w.uint(static_cast<std::uint32_t>(ds.dim()));
  w.uint(static_cast<std::uint64_t>(ds.size()));
  for (const auto& r : ds.records()) {
    w.str16(r.id);
    w.str16(r.label);
    w.str16(r.domain);
    for (float v : r.embedding) w.f32(v);
  }
  return w.buffer();
}

inline EmbeddingDataset decode_dataset(std::string_view bytes) {
  io::ByteReader r(bytes);
  std::string magic;
  if (!r.bytes(4, magic) || magic != kDatasetMagic) throw FormatError("not an embedding dataset (bad magic)");
  std::uint16_t version = 0;
  if (!r.uint(version)) throw FormatError("truncated dataset header");
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  if (!r.uint(dim) || !r.uint(count)) throw FormatError("truncated dataset header");

  EmbeddingDataset ds(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    if (!r.str16(rec.id) || !r.str16(rec.label) || !r.str16(rec.domain))
      throw CorruptRecordError("record " + std::to_string(i) + " is truncated in its header");
    if (!io::valid_utf8(rec.id) || !io::valid_utf8(rec.label) || !io::valid_utf8(rec.domain))
      throw CorruptRecordError("record " + std::to_string(i) + " has a string that is not valid UTF-8");
    if (r.remaining() < static_cast<std::uint64_t>(dim) * 4)
      throw CorruptRecordError("record " + std::to_string(i) + " has fewer than " + std::to_string(dim) + " values");
    rec.embedding.resize(dim);
    for (float& v : rec.embedding) r.f32(v);
    ds.add(std::move(rec));
  }
  if (!r.at_end())
    throw CorruptRecordError("record " + std::to_string(count) + ": " + std::to_string(r.remaining()) +
                             " bytes found past the declared record count");
  return ds;
}

inline void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(ds));
}

inline EmbeddingDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace protospoof
