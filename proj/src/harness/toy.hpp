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

#include <cstdint>
#include <filesystem>
#include <string>

namespace cfx::harness {

// Two Gaussian clusters in embedding space, served from a cache so no
// encoder is involved. Fake mean +offset, real mean -offset on every
// coordinate, unit covariance.
struct ToyEmbeddingOptions {
  std::uint64_t seed = 0;
  int dim = 64;
  double offset = 2.0;
  int ref_pairs = 200;
  int eval_per_class = 1000;
  std::string generator = "toy-gan";
};

// Small gray-ish rasters (real: smooth random fields; fake: the same plus
// a period-4 comb) embedded by a real backend.
struct ToyRasterOptions {
  std::uint64_t seed = 0;
  int side = 64;
  int ref_pairs = 10;
  int eval_per_class = 20;
  std::filesystem::path export_json;
};

// Writes manifests, record files, cache and config.json into `dir`; returns
// the config path.
std::filesystem::path make_toy_embeddings(const std::filesystem::path& dir, const ToyEmbeddingOptions& options);
std::filesystem::path make_toy_rasters(const std::filesystem::path& dir, const ToyRasterOptions& options);

}  // namespace cfx::harness
