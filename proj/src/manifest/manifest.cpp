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

#include "manifest/manifest.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/io.hpp"

namespace cfx::manifest {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Label label) { return label == Label::real ? "real" : "fake"; }

Label parse_label(const std::string& text) {
  if (text == "real") return Label::real;
  if (text == "fake") return Label::fake;
  data_error("unknown label value '{}' (expected real or fake)", text);
}

std::filesystem::path DatasetManifest::resolve(const ImageRecord& record) const {
  std::filesystem::path p(record.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

const ImageRecord* DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::size_t DatasetManifest::pair_count() const {
  std::map<std::string, std::pair<int, int>> members;
  for (const auto& r : records) {
    if (!r.pair_id) continue;
    auto& m = members[*r.pair_id];
    (r.is_fake() ? m.second : m.first)++;
  }
  std::size_t n = 0;
  for (const auto& [_, m] : members) {
    if (m.first == 1 && m.second == 1) ++n;
  }
  return n;
}

void validate(const DatasetManifest& manifest) {
  if (manifest.records.empty()) data_error("manifest '{}' has no records", manifest.name);
  std::set<std::string> ids;
  struct Members {
    int real = 0;
    int fake = 0;
  };
  std::map<std::string, Members> pairs;
  for (const auto& r : manifest.records) {
    if (r.id.empty()) data_error("record with empty id");
    if (!ids.insert(r.id).second) data_error("duplicate id '{}'", r.id);
    if (r.path.empty()) data_error("record '{}' has an empty path", r.id);
    const bool generator_real = r.generator == "real";
    if ((r.label == Label::real) != generator_real) {
      data_error("record '{}': label {} with generator '{}' (label=real iff generator=real)",
                 r.id, to_string(r.label), r.generator);
    }
    if (r.resolution && (r.resolution->width < 1 || r.resolution->height < 1)) {
      data_error("record '{}': non-positive resolution", r.id);
    }
    if (r.pair_id) {
      auto& m = pairs[*r.pair_id];
      (r.is_fake() ? m.fake : m.real)++;
    }
  }
  for (const auto& [pid, m] : pairs) {
    if (m.real + m.fake < 2) continue;  // lone members are legal here
    if (m.real == 0) data_error("pair {} lacks a real member", pid);
    if (m.fake == 0) data_error("pair {} lacks a fake member", pid);
    if (m.real + m.fake > 2) {
      data_error("pair {} has {} members (a pair is one real and one fake)", pid, m.real + m.fake);
    }
  }
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {"id",      "path",    "label", "generator",
                                             "source_set", "caption", "pair_id", "width",
                                             "height"};
  return keys;
}

std::string required_string(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) data_error("missing key '{}'", key);
  if (!it->is_string()) data_error("key '{}' must be a string", key);
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) data_error("key '{}' must be a string", key);
  return it->get<std::string>();
}

std::optional<int> optional_int(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) data_error("key '{}' must be an integer", key);
  return it->get<int>();
}

ImageRecord record_from_json(const ordered_json& obj) {
  if (!obj.is_object()) data_error("expected a JSON object");
  ImageRecord r;
  r.id = required_string(obj, "id");
  r.path = required_string(obj, "path");
  r.label = parse_label(required_string(obj, "label"));
  r.generator = required_string(obj, "generator");
  r.source_set = required_string(obj, "source_set");
  r.caption = optional_string(obj, "caption");
  r.pair_id = optional_string(obj, "pair_id");
  const auto w = optional_int(obj, "width");
  const auto h = optional_int(obj, "height");
  if (w.has_value() != h.has_value()) data_error("width and height must appear together");
  if (w) r.resolution = Resolution{*w, *h};
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known_keys().contains(it.key())) r.extra[it.key()] = it.value();
  }
  return r;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& jsonl, const std::string& name) {
  DatasetManifest m;
  m.name = name;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      m.records.push_back(record_from_json(ordered_json::parse(line)));
    } catch (const ordered_json::exception& e) {
      data_error("{}: line {}: parse error: {}", name, line_no, e.what());
    } catch (const Error& e) {
      data_error("{}: line {}: {}", name, line_no, e.what());
    }
  }
  validate(m);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  auto m = parse_manifest(read_file_text(path), path.stem().string());
  m.base_dir = path.parent_path();
  return m;
}

std::string serialize_record(const ImageRecord& r) {
  ordered_json obj = ordered_json::object();
  obj["id"] = r.id;
  obj["path"] = r.path;
  obj["label"] = to_string(r.label);
  obj["generator"] = r.generator;
  obj["source_set"] = r.source_set;
  if (r.caption) obj["caption"] = *r.caption;
  if (r.pair_id) obj["pair_id"] = *r.pair_id;
  if (r.resolution) {
    obj["width"] = r.resolution->width;
    obj["height"] = r.resolution->height;
  }
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it) obj[it.key()] = it.value();
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  write_file_atomic(path, serialize_manifest(manifest));
}

SplitKey parse_split_key(const std::string& text) {
  if (text == "generator") return SplitKey::generator;
  if (text == "source_set") return SplitKey::source_set;
  if (text == "label") return SplitKey::label;
  config_error("unknown split key '{}' (generator, source_set, label)", text);
}

std::map<std::string, std::vector<ImageRecord>> split_by(const DatasetManifest& manifest,
                                                         SplitKey key) {
  std::map<std::string, std::vector<ImageRecord>> groups;
  for (const auto& r : manifest.records) {
    switch (key) {
      case SplitKey::generator:
        groups[r.generator].push_back(r);
        break;
      case SplitKey::source_set:
        groups[r.source_set].push_back(r);
        break;
      case SplitKey::label:
        groups[to_string(r.label)].push_back(r);
        break;
    }
  }
  return groups;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

ScoreTable parse_scores(const std::string& csv, const DatasetManifest& manifest,
                        const std::string& method_name) {
  std::unordered_map<std::string, const ImageRecord*> index;
  for (const auto& r : manifest.records) index.emplace(r.id, &r);

  ScoreTable table;
  table.method_name = method_name;
  std::istringstream in(csv);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "id,score") data_error("{}: line 1: expected header 'id,score'", method_name);
      header_seen = true;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 2 || cells[0].empty()) {
      data_error("{}: line {}: expected 'id,score'", method_name, line_no);
    }
    ++table.rows_read;
    const std::string& id = cells[0];
    const std::string& text = cells[1];
    double score = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), score);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      data_error("{}: line {} (id {}): score '{}' is not a decimal number", method_name, line_no,
                 id, text);
    }
    if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
      data_error("{}: line {} (id {}): score {} outside [0,1]", method_name, line_no, id, text);
    }
    if (!index.contains(id)) {
      table.warnings.push_back(
          fmt::format("line {}: id '{}' not in manifest '{}'", line_no, id, manifest.name));
      continue;
    }
    if (!table.entries.emplace(id, score).second) {
      data_error("{}: line {}: duplicate id '{}'", method_name, line_no, id);
    }
  }
  if (!header_seen) data_error("{}: empty score file", method_name);
  return table;
}

ScoreTable import_scores(const std::filesystem::path& path, const DatasetManifest& manifest) {
  return parse_scores(read_file_text(path), manifest, path.stem().string());
}

std::string serialize_scores(const std::vector<std::pair<std::string, double>>& rows) {
  std::string out = "id,score\n";
  for (const auto& [id, score] : rows) out += fmt::format("{},{}\n", id, score);
  return out;
}

}  // namespace cfx::manifest
