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

#include "embed/cache.hpp"

#include <cmath>
#include <cstring>
#include <shared_mutex>
#include <unordered_map>

#include "common/error.hpp"
#include "common/io.hpp"

namespace cfx::embed {

namespace {

constexpr char kMagic[16] = {'C', 'L', 'I', 'P', 'F', 'O', 'R', 'E',
                             'N', 'S', 'I', 'C', 'S', '\0', '\0', '\0'};
constexpr std::size_t kHeaderSize = 16 + 4 + 4 + 8;
constexpr std::size_t kIndexEntry = 32 + 8;

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h;
    std::memcpy(&h, d.data(), sizeof h);
    return h;
  }
};

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t off) {
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  return v;
}

}  // namespace

Digest embedding_key(std::span<const std::uint8_t> image_bytes, const PreprocessSpec& spec,
                     const std::string& backend_identity) {
  Sha256 h;
  h.update_field("clipforensics-embedding-v1");
  h.update_field(std::string_view(reinterpret_cast<const char*>(image_bytes.data()), image_bytes.size()));
  h.update_field(spec.canonical());
  h.update_field(backend_identity);
  return h.finish();
}

struct EmbeddingCache::Impl {
  mutable std::shared_mutex mu;
  int dim = 0;
  std::vector<Digest> order;
  std::unordered_map<Digest, std::size_t, DigestHash> index;  // key -> row number
  std::vector<float> rows;
  std::filesystem::path path;
};

EmbeddingCache::EmbeddingCache(int feature_dim) : impl_(std::make_unique<Impl>()) {
  if (feature_dim < 0) data_error("negative feature_dim");
  impl_->dim = feature_dim;
}
EmbeddingCache::~EmbeddingCache() = default;
EmbeddingCache::EmbeddingCache(EmbeddingCache&&) noexcept = default;
EmbeddingCache& EmbeddingCache::operator=(EmbeddingCache&&) noexcept = default;

EmbeddingCache EmbeddingCache::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 16) != 0) {
    data_error("not an embedding cache (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 16);
  if (version != kVersion) data_error("unsupported embedding cache version {}", version);
  const auto dim = get_le<std::uint32_t>(bytes, 20);
  const auto count = get_le<std::uint64_t>(bytes, 24);
  if (dim == 0 && count > 0) data_error("embedding cache has rows but feature_dim 0");
  const std::size_t row_bytes = static_cast<std::size_t>(dim) * 4;
  const std::size_t rows_start = kHeaderSize + count * kIndexEntry;
  if (count > bytes.size() / kIndexEntry || rows_start + count * row_bytes != bytes.size()) {
    data_error("embedding cache size {} does not match header (count {}, dim {})", bytes.size(),
               count, dim);
  }
  EmbeddingCache cache(static_cast<int>(dim));
  Impl& im = *cache.impl_;
  im.rows.resize(count * dim);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::size_t e = kHeaderSize + k * kIndexEntry;
    Digest key;
    std::memcpy(key.data(), bytes.data() + e, 32);
    const auto off = get_le<std::uint64_t>(bytes, e + 32);
    if (off < rows_start || (off - rows_start) % row_bytes != 0 || off + row_bytes > bytes.size()) {
      data_error("embedding cache index entry {} has a bad offset {}", k, off);
    }
    if (!im.index.emplace(key, k).second) data_error("embedding cache has a duplicate key");
    im.order.push_back(key);
    std::memcpy(im.rows.data() + k * dim, bytes.data() + off, row_bytes);
  }
  for (float v : im.rows) {
    if (!std::isfinite(v)) data_error("embedding cache contains non-finite values");
  }
  return cache;
}

EmbeddingCache EmbeddingCache::open(const std::filesystem::path& path) {
  EmbeddingCache cache;
  if (std::filesystem::exists(path)) {
    try {
      cache = parse(read_file_bytes(path));
    } catch (const Error& e) {
      data_error("{}: {}", path.string(), e.what());
    }
  }
  cache.impl_->path = path;
  return cache;
}

int EmbeddingCache::feature_dim() const {
  std::shared_lock lock(impl_->mu);
  return impl_->dim;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(impl_->mu);
  return impl_->order.size();
}

bool EmbeddingCache::contains(const Digest& key) const {
  std::shared_lock lock(impl_->mu);
  return impl_->index.contains(key);
}

std::optional<std::vector<float>> EmbeddingCache::get(const Digest& key) const {
  std::shared_lock lock(impl_->mu);
  auto it = impl_->index.find(key);
  if (it == impl_->index.end()) return std::nullopt;
  const auto dim = static_cast<std::size_t>(impl_->dim);
  const float* row = impl_->rows.data() + it->second * dim;
  return std::vector<float>(row, row + dim);
}

std::vector<Digest> EmbeddingCache::keys() const {
  std::shared_lock lock(impl_->mu);
  return impl_->order;
}

void EmbeddingCache::put(const Digest& key, std::span<const float> row) {
  for (float v : row) {
    if (!std::isfinite(v)) data_error("refusing to cache a non-finite embedding");
  }
  std::unique_lock lock(impl_->mu);
  Impl& im = *impl_;
  if (im.dim == 0) {
    if (row.empty()) data_error("refusing to cache an empty embedding");
    im.dim = static_cast<int>(row.size());
  }
  if (row.size() != static_cast<std::size_t>(im.dim)) {
    data_error("feature_dim mismatch: cache holds {}-d rows, got {}", im.dim, row.size());
  }
  if (auto it = im.index.find(key); it != im.index.end()) {
    if (std::memcmp(im.rows.data() + it->second * row.size(), row.data(), row.size_bytes()) != 0) {
      data_error("cache key {} already holds a different row", to_hex(key).substr(0, 16));
    }
    return;
  }
  im.index.emplace(key, im.order.size());
  im.order.push_back(key);
  im.rows.insert(im.rows.end(), row.begin(), row.end());
}

std::vector<std::uint8_t> EmbeddingCache::serialize() const {
  std::shared_lock lock(impl_->mu);
  const Impl& im = *impl_;
  const std::uint64_t count = im.order.size();
  const std::size_t row_bytes = static_cast<std::size_t>(im.dim) * 4;
  const std::uint64_t rows_start = kHeaderSize + count * kIndexEntry;
  std::vector<std::uint8_t> out(rows_start + count * row_bytes);
  std::uint8_t* p = out.data();
  auto write = [&p](const void* src, std::size_t n) {
    std::memcpy(p, src, n);
    p += n;
  };
  const std::uint32_t version = kVersion;
  const auto dim = static_cast<std::uint32_t>(im.dim);
  write(kMagic, 16);
  write(&version, 4);
  write(&dim, 4);
  write(&count, 8);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t off = rows_start + k * row_bytes;
    write(im.order[k].data(), 32);
    write(&off, 8);
  }
  if (!im.rows.empty()) write(im.rows.data(), im.rows.size() * 4);
  return out;
}

void EmbeddingCache::flush() const {
  if (impl_->path.empty()) return;
  write_file_atomic(impl_->path, serialize());
}

const std::filesystem::path& EmbeddingCache::path() const { return impl_->path; }

Digest record_key(const manifest::DatasetManifest& manifest, const manifest::ImageRecord& record,
                  const BackendConfig& backend) {
  const auto path = manifest.resolve(record);
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const Error& e) {
    data_error("record '{}': {}", record.id, e.what());
  }
  return embedding_key(bytes, backend.preprocess, backend.identity());
}

namespace {

void check_dims(const EmbeddingCache& cache, const BackendConfig& backend) {
  const int dim = cache.feature_dim();
  if (dim != 0 && dim != backend.feature_dim) {
    data_error("feature_dim mismatch: cache has {}, backend {} declares {}", dim,
               backend.identity(), backend.feature_dim);
  }
}

}  // namespace

std::vector<EmbeddingVector> cache_get_or_extract(const manifest::DatasetManifest& manifest,
                                                  const std::vector<manifest::ImageRecord>& records,
                                                  EmbeddingCache& cache, const BackendConfig& backend,
                                                  Encoder* encoder) {
  std::vector<EmbeddingVector> out;
  out.reserve(records.size());
  if (records.empty()) return out;
  check_dims(cache, backend);
  for (const auto& r : records) {
    EmbeddingVector v;
    v.key = record_key(manifest, r, backend);
    if (auto hit = cache.get(v.key)) {
      v.values = std::move(*hit);
    } else {
      if (encoder == nullptr) {
        data_error("record '{}' is not in the embedding cache and no backend is available", r.id);
      }
      v.values = encoder->extract(image::load(manifest.resolve(r)));
      cache.put(v.key, v.values);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> cache_get_or_extract(const std::vector<image::Raster>& images,
                                                  EmbeddingCache& cache, const BackendConfig& backend,
                                                  Encoder* encoder) {
  std::vector<EmbeddingVector> out;
  out.reserve(images.size());
  if (images.empty()) return out;
  check_dims(cache, backend);
  for (std::size_t k = 0; k < images.size(); ++k) {
    EmbeddingVector v;
    v.key = embedding_key(image::identity_bytes(images[k]), backend.preprocess, backend.identity());
    if (auto hit = cache.get(v.key)) {
      v.values = std::move(*hit);
    } else {
      if (encoder == nullptr) data_error("image #{} is not in the embedding cache and no backend is available", k);
      v.values = encoder->extract(images[k]);
      cache.put(v.key, v.values);
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace cfx::embed
