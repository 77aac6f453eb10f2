// Copyright 2026 The clipforensics Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/hash.hpp"
#include "embed/backend.hpp"
#include "image/raster.hpp"
#include "manifest/manifest.hpp"

namespace cfx::embed {

struct EmbeddingVector {
  Digest key{};
  std::vector<float> values;
};

// Cache key for one image under one preprocessing/backend pair.
Digest embedding_key(std::span<const std::uint8_t> image_bytes, const PreprocessSpec& spec,
                     const std::string& backend_identity);

/// Binary store of float32 rows keyed by 32-byte digests.
///
/// Layout (little-endian): 16-byte magic, u32 version, u32 feature_dim,
/// u64 count, count x (32-byte key, u64 row offset), then the rows.
/// The whole file is validated when opened. Many readers or one writer.
class EmbeddingCache {
 public:
  static constexpr std::uint32_t kVersion = 1;

  // In-memory cache; feature_dim 0 means "set by the first put".
  explicit EmbeddingCache(int feature_dim = 0);
  ~EmbeddingCache();
  EmbeddingCache(EmbeddingCache&&) noexcept;
  EmbeddingCache& operator=(EmbeddingCache&&) noexcept;

  // Opens an existing file or starts an empty cache bound to `path`.
  static EmbeddingCache open(const std::filesystem::path& path);
  static EmbeddingCache parse(std::span<const std::uint8_t> bytes);

  int feature_dim() const;
  std::size_t size() const;
  bool contains(const Digest& key) const;
  std::optional<std::vector<float>> get(const Digest& key) const;
  std::vector<Digest> keys() const;  // insertion order

  // Inserting an existing key with a different row is a data error.
  void put(const Digest& key, std::span<const float> row);

  std::vector<std::uint8_t> serialize() const;
  // Rewrites the bound file atomically. No-op for unbound caches.
  void flush() const;
  const std::filesystem::path& path() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Key source for a record: the file's bytes.
Digest record_key(const manifest::DatasetManifest& manifest, const manifest::ImageRecord& record,
                  const BackendConfig& backend);

/// Returns one vector per record, in order. Misses are extracted with
/// `encoder` and added to the cache; with no encoder a miss is a data error.
std::vector<EmbeddingVector> cache_get_or_extract(const manifest::DatasetManifest& manifest,
                                                  const std::vector<manifest::ImageRecord>& records,
                                                  EmbeddingCache& cache, const BackendConfig& backend,
                                                  Encoder* encoder);

// Same for in-memory rasters (laundered copies), keyed by their pixels.
std::vector<EmbeddingVector> cache_get_or_extract(const std::vector<image::Raster>& images,
                                                  EmbeddingCache& cache, const BackendConfig& backend,
                                                  Encoder* encoder);

}  // namespace cfx::embed
