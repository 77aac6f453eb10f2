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
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "launder/launder.hpp"
#include "manifest/manifest.hpp"

namespace cfx::refset {

struct SamplingPlan {
  int n_per_class = 10;
  std::uint64_t seed = 0;
  int runs = 1;
  bool require_pairing = true;
  double augmented_fraction = 0.0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SamplingPlan from_json(const nlohmann::json& j);
};

struct AugmentationEntry {
  std::string record_id;
  launder::LaunderRecipe recipe;
};

// Records chosen for one run, before embedding.
struct Selection {
  std::vector<manifest::ImageRecord> real;
  std::vector<manifest::ImageRecord> fake;
  std::vector<AugmentationEntry> augmentation;  // subset of the above
};

/// Seeded hash ranking over record ids: independent of manifest order.
/// With require_pairing the i-th real and fake share a pair_id.
Selection select(const manifest::DatasetManifest& manifest, const SamplingPlan& plan, int run,
                 const std::set<std::string>& exclude = {});

// Supplies vectors for selected records; implemented by the harness.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::vector<std::vector<float>> embed(const manifest::DatasetManifest& manifest,
                                                const std::vector<manifest::ImageRecord>& records) = 0;
  virtual std::vector<float> embed_laundered(const manifest::DatasetManifest& manifest,
                                             const manifest::ImageRecord& record,
                                             const launder::LaunderRecipe& recipe) = 0;
};

struct ReferenceSet {
  std::vector<std::vector<float>> real_vectors;
  std::vector<std::vector<float>> fake_vectors;
  std::vector<std::string> real_ids;
  std::vector<std::string> fake_ids;
  std::string manifest_name;
  SamplingPlan plan;
  int run = 0;
  std::vector<AugmentationEntry> augmentation_log;

  std::size_t n() const { return real_vectors.size(); }
  int feature_dim() const;
  // Provenance and id lists; vectors are not stored.
  nlohmann::ordered_json to_json() const;
};

ReferenceSet build(const manifest::DatasetManifest& manifest, const SamplingPlan& plan, int run,
                   EmbeddingSource& embeddings, const std::set<std::string>& exclude = {});

using RunsRule = std::function<int(int)>;

// min(50, ceil(10000 / N)), and 1 once N reaches 10000.
int default_runs(int n);

std::vector<SamplingPlan> size_sweep_plan(const std::vector<int>& n_values,
                                          const SamplingPlan& base = {},
                                          const RunsRule& rule = default_runs);

}  // namespace cfx::refset
