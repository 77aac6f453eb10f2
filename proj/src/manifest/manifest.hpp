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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfx::manifest {

enum class Label { real, fake };

const char* to_string(Label label);
Label parse_label(const std::string& text);  // throws data error on unknown values

struct Resolution {
  int width = 0;
  int height = 0;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// One image entry. Unknown keys found on load are kept in `extra` and written
/// back after the known keys, in their original order.
struct ImageRecord {
  std::string id;
  std::string path;
  Label label = Label::real;
  std::string generator;
  std::string source_set;
  std::optional<std::string> caption;
  std::optional<std::string> pair_id;
  std::optional<Resolution> resolution;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool is_fake() const { return label == Label::fake; }
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct DatasetManifest {
  std::string name;
  std::string notes;
  std::vector<ImageRecord> records;
  // Directory that relative record paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ImageRecord& record) const;
  const ImageRecord* find(const std::string& id) const;
  std::size_t pair_count() const;
};

/// Checks every record and cross-record invariant; throws a data error
/// describing the first violation.
void validate(const DatasetManifest& manifest);

DatasetManifest parse_manifest(const std::string& jsonl, const std::string& name = "manifest");
DatasetManifest load_manifest(const std::filesystem::path& path);

std::string serialize_record(const ImageRecord& record);
std::string serialize_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

enum class SplitKey { generator, source_set, label };
SplitKey parse_split_key(const std::string& text);

/// Partitions records by the value of `key`. Record order inside each group
/// follows the manifest.
std::map<std::string, std::vector<ImageRecord>> split_by(const DatasetManifest& manifest,
                                                         SplitKey key);

/// Detector outputs for a subset of manifest ids, read from `id,score` CSV.
struct ScoreTable {
  std::string method_name;
  std::map<std::string, double> entries;
  std::vector<std::string> warnings;
  std::size_t rows_read = 0;
};

ScoreTable parse_scores(const std::string& csv, const DatasetManifest& manifest,
                        const std::string& method_name);
ScoreTable import_scores(const std::filesystem::path& path, const DatasetManifest& manifest);

std::string serialize_scores(const std::vector<std::pair<std::string, double>>& rows);

}  // namespace cfx::manifest
