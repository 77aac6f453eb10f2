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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "classify/classify.hpp"
#include "embed/backend.hpp"
#include "launder/launder.hpp"
#include "refset/refset.hpp"

namespace cfx::harness {

struct ClassifierSpec {
  std::string kind = "svm";  // svm or an ablation kind
  double c = 1.0;
  double tol = 1e-4;
  classify::NormalizationConfig norm;
  classify::AblationParams ablation;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);
};

struct FewShotProtocol {
  int n_examples = 10;
  int runs = 100;
  bool require_pairing = false;
  std::filesystem::path pool_manifest;  // empty: the eval manifest

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static FewShotProtocol from_json(const nlohmann::json& j);
};

// Where vectors come from: an export manifest, or a bare identity for
// embeddings that only exist in a cache.
struct BackendSpec {
  std::filesystem::path export_json;
  embed::Tap tap = embed::Tap::penultimate;
  std::string checkpoint;
  std::string pretrain_tag;
  int feature_dim = 0;

  embed::BackendConfig resolve() const;
  nlohmann::ordered_json to_json() const;
  static BackendSpec from_json(const nlohmann::json& j, const std::filesystem::path& base);
};

struct ExperimentConfig {
  std::filesystem::path refset_manifest;
  std::filesystem::path eval_manifest;
  BackendSpec backend;
  std::filesystem::path cache;  // empty: in-memory only
  bool cache_only = false;
  ClassifierSpec classifier;
  refset::SamplingPlan sampling;
  std::vector<int> n_values = {10, 100};
  std::optional<int> sweep_runs;  // empty: runs chosen by N
  std::optional<launder::SweepGrid> robustness;
  FewShotProtocol fewshot;
  std::filesystem::path out_dir = "runs";
  std::uint64_t seed = 0;
  std::string method = "clip-svm";

  void validate() const;
  // Paths are written as stored; relative ones were resolved at load time.
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base);
  static ExperimentConfig load(const std::filesystem::path& path);

  // SHA-256 of the canonical JSON without the output directory.
  std::string hash() const;
  // out_dir / "<protocol>-<first 16 hex digits of hash>"
  std::filesystem::path run_dir(const std::string& protocol) const;
};

}  // namespace cfx::harness
