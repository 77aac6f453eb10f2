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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "classify/classify.hpp"
#include "embed/backend.hpp"
#include "embed/cache.hpp"
#include "harness/config.hpp"
#include "manifest/manifest.hpp"
#include "metrics/metrics.hpp"
#include "refset/refset.hpp"

namespace cfx::harness {

/// Cache-first embedding source. Misses go to the encoder, which is absent
/// in cache-only mode.
class CachedEmbeddings : public refset::EmbeddingSource {
 public:
  CachedEmbeddings(embed::EmbeddingCache& cache, embed::BackendConfig backend, embed::Encoder* encoder);

  std::vector<std::vector<float>> embed(const manifest::DatasetManifest& manifest,
                                        const std::vector<manifest::ImageRecord>& records) override;
  std::vector<float> embed_laundered(const manifest::DatasetManifest& manifest, const manifest::ImageRecord& record,
                                     const launder::LaunderRecipe& recipe) override;
  std::vector<std::vector<float>> embed_rasters(const std::vector<image::Raster>& images);

 private:
  embed::EmbeddingCache& cache_;
  embed::BackendConfig backend_;
  embed::Encoder* encoder_;
};

// Fails unless no id and no resolved path is shared between the two.
void check_disjoint(const manifest::DatasetManifest& train, const manifest::DatasetManifest& test);

/// Everything a protocol needs, opened once from a config.
class Session {
 public:
  explicit Session(ExperimentConfig config);
  ~Session();

  const ExperimentConfig& config() const { return config_; }
  const manifest::DatasetManifest& refset_manifest() const;
  const manifest::DatasetManifest& eval_manifest() const;
  const embed::BackendConfig& backend() const { return backend_; }
  CachedEmbeddings& embeddings() { return *source_; }
  embed::EmbeddingCache& cache() { return *cache_; }
  bool has_encoder() const { return encoder_ != nullptr; }

  // Eval-set vectors by id, computed once.
  const std::map<std::string, std::vector<float>>& eval_vectors();
  // Persists new cache rows when the cache is file-backed.
  void flush();

 private:
  ExperimentConfig config_;
  std::unique_ptr<manifest::DatasetManifest> refset_;
  std::unique_ptr<manifest::DatasetManifest> eval_;
  embed::BackendConfig backend_;
  std::unique_ptr<embed::EmbeddingCache> cache_;
  std::unique_ptr<embed::Encoder> encoder_;
  std::unique_ptr<CachedEmbeddings> source_;
  std::map<std::string, std::vector<float>> eval_vectors_;
  bool eval_ready_ = false;
};

classify::Model train_model(const refset::ReferenceSet& rs, const ClassifierSpec& spec, std::uint64_t seed);

std::map<std::string, double> score_vectors(const classify::Model& model,
                                            const std::map<std::string, std::vector<float>>& vectors);

// ---- size sweep ----

struct SizePoint {
  int n = 0;
  int runs = 0;
  metrics::EvalReport report;
  std::map<std::string, metrics::Stat> summary;  // metric -> over-run stat of the generator mean
  std::vector<nlohmann::ordered_json> refsets;
  std::vector<std::string> warnings;
};

struct SizeSweepResult {
  std::vector<SizePoint> points;
  nlohmann::ordered_json to_json(const ExperimentConfig& config) const;
  std::string to_csv() const;  // N,metric,mean,std
};

SizeSweepResult run_size_sweep(Session& session, const std::vector<int>& n_values);

// ---- robustness sweep ----

struct RobustnessRow {
  launder::Axis axis = launder::Axis::jpeg_q;
  double value = 0.0;
  double auc = 0.0;
  double acc = 0.0;
  metrics::EvalReport report;
};

struct RobustnessResult {
  double baseline_auc = 0.0;
  double baseline_acc = 0.0;
  nlohmann::ordered_json refset;
  nlohmann::ordered_json model;
  std::vector<RobustnessRow> rows;
  int trainings = 0;
  nlohmann::ordered_json to_json(const ExperimentConfig& config) const;
  std::string to_csv() const;  // axis,value,auc,acc
};

RobustnessResult run_robustness_sweep(Session& session, const launder::SweepGrid& grid);

// ---- few-shot ----

struct FewShotRun {
  std::vector<std::string> train_ids;
  std::size_t n_test = 0;
  metrics::RunReport report;
};

struct FewShotResult {
  metrics::EvalReport report;
  std::vector<FewShotRun> runs;
  nlohmann::ordered_json to_json(const ExperimentConfig& config) const;
};

FewShotResult run_fewshot(Session& session, const FewShotProtocol& protocol);

// ---- reports ----

enum class Layout { table_csv, json, markdown };
Layout parse_layout(const std::string& text);

/// Methods in the given order; generators in first-seen order. Imported score
/// tables become reports through evaluate_scores.
std::string emit_report(const std::vector<metrics::EvalReport>& reports, Layout layout,
                        metrics::Metric metric = metrics::Metric::auc);

metrics::EvalReport evaluate_scores(const std::string& method, const manifest::DatasetManifest& eval,
                                    const std::map<std::string, double>& scores);

// Mean over generators of one metric in a single-run report.
double generator_mean(const metrics::RunReport& run, metrics::Metric metric);

}  // namespace cfx::harness
