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
#include <mutex>
#include <string>
#include <vector>

#include "embed/preprocess.hpp"
#include "image/raster.hpp"

namespace cfx::embed {

class OnnxGraph;

enum class Tap { penultimate, final };

const char* to_string(Tap tap);
Tap parse_tap(const std::string& text);
// Graph output name for a tap.
const char* tap_output(Tap tap);

struct BackendConfig {
  std::filesystem::path graph_path;
  Tap tap = Tap::penultimate;
  int feature_dim = 0;
  std::string pretrain_tag;
  std::string checkpoint;
  PreprocessSpec preprocess;
  int penultimate_dim = 0;
  int final_dim = 0;

  // Everything that changes the produced vectors except the image itself.
  std::string identity() const;
};

// Reads an export manifest (`<name>.export.json`). The graph is not opened.
BackendConfig load_backend_config(const std::filesystem::path& export_json, Tap tap);

/// Wraps a backend. The graph is loaded on first use so that cache-only runs
/// never touch it. extract() may be called from several threads.
class Encoder {
 public:
  explicit Encoder(BackendConfig config);
  ~Encoder();
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;

  const BackendConfig& config() const { return config_; }
  int feature_dim() const { return config_.feature_dim; }
  bool loaded() const;

  // Loads the graph now and checks the tap's declared width against it.
  void load();

  std::vector<float> extract(const image::Raster& image);
  // Runs an already preprocessed tensor (3 x side x side).
  std::vector<float> extract_tensor(const std::vector<float>& tensor);
  // Both taps in one pass.
  std::pair<std::vector<float>, std::vector<float>> extract_both(const std::vector<float>& tensor);

 private:
  const OnnxGraph& graph();

  BackendConfig config_;
  std::unique_ptr<OnnxGraph> graph_;
  std::once_flag once_;
};

// Width of a graph output's last axis, or -1 when the graph leaves it symbolic.
int declared_output_dim(const OnnxGraph& graph, const std::string& output);

}  // namespace cfx::embed
