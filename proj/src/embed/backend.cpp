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

#include "embed/backend.hpp"

#include <cmath>

#include <json.hpp>

#include "common/error.hpp"
#include "common/io.hpp"
#include "embed/onnx_graph.hpp"

namespace cfx::embed {

const char* to_string(Tap tap) { return tap == Tap::penultimate ? "penultimate" : "final"; }

Tap parse_tap(const std::string& text) {
  if (text == "penultimate") return Tap::penultimate;
  if (text == "final") return Tap::final;
  config_error("unknown feature tap '{}' (penultimate or final)", text);
}

const char* tap_output(Tap tap) {
  return tap == Tap::penultimate ? "features_penultimate" : "features_final";
}

std::string BackendConfig::identity() const {
  return fmt::format("checkpoint={};pretrain={};tap={};dim={}", checkpoint, pretrain_tag,
                     to_string(tap), feature_dim);
}

BackendConfig load_backend_config(const std::filesystem::path& export_json, Tap tap) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(export_json));
  } catch (const nlohmann::json::exception& e) {
    config_error("{}: {}", export_json.string(), e.what());
  }
  BackendConfig c;
  c.tap = tap;
  try {
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.pretrain_tag = j.value("pretrain_tag", std::string());
    c.graph_path = export_json.parent_path() / j.at("graph").get<std::string>();
    c.penultimate_dim = j.at("dims").at("penultimate").get<int>();
    c.final_dim = j.at("dims").at("final").get<int>();
    c.preprocess = PreprocessSpec::from_json(j.value("preprocess", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    config_error("{}: bad export manifest: {}", export_json.string(), e.what());
  }
  c.feature_dim = tap == Tap::penultimate ? c.penultimate_dim : c.final_dim;
  if (c.feature_dim <= 0) config_error("{}: declared {} dim must be positive", export_json.string(), to_string(tap));
  return c;
}

int declared_output_dim(const OnnxGraph& graph, const std::string& output) {
  const ValueInfo* info = graph.output(output);
  if (!info) return -1;
  if (info->dims.empty()) return -1;
  return static_cast<int>(info->dims.back());
}

Encoder::Encoder(BackendConfig config) : config_(std::move(config)) {}
Encoder::~Encoder() = default;

bool Encoder::loaded() const { return graph_ != nullptr; }

void Encoder::load() { graph(); }

const OnnxGraph& Encoder::graph() {
  std::call_once(once_, [this] {
    auto g = std::make_unique<OnnxGraph>(OnnxGraph::load(config_.graph_path));
    const std::string out = tap_output(config_.tap);
    if (!g->output(out)) {
      backend_error("graph '{}' has no '{}' output for tap {}", config_.graph_path.string(), out,
                    to_string(config_.tap));
    }
    const int dim = declared_output_dim(*g, out);
    if (dim > 0 && dim != config_.feature_dim) {
      backend_error("graph declares {} width {} but the export manifest says {}", out, dim,
                    config_.feature_dim);
    }
    graph_ = std::move(g);
  });
  return *graph_;
}

namespace {

std::vector<float> take_row(const Tensor& t, const std::string& name, int expected) {
  if (!t.is_float() || t.numel() != static_cast<std::size_t>(expected)) {
    backend_error("output '{}' has shape {}, expected {} values", name, t.shape_string(), expected);
  }
  for (float v : t.f) {
    if (!std::isfinite(v)) backend_error("output '{}' contains non-finite values", name);
  }
  return t.f;
}

}  // namespace

std::vector<float> Encoder::extract_tensor(const std::vector<float>& tensor) {
  const OnnxGraph& g = graph();
  const std::int64_t side = config_.preprocess.target_side;
  std::map<std::string, Tensor> feeds;
  feeds.emplace("pixel_values", Tensor::floats({1, 3, side, side}, tensor));
  const std::string out = tap_output(config_.tap);
  auto result = g.run(feeds, {out});
  return take_row(result.at(out), out, config_.feature_dim);
}

std::pair<std::vector<float>, std::vector<float>> Encoder::extract_both(
    const std::vector<float>& tensor) {
  const OnnxGraph& g = graph();
  const std::int64_t side = config_.preprocess.target_side;
  std::map<std::string, Tensor> feeds;
  feeds.emplace("pixel_values", Tensor::floats({1, 3, side, side}, tensor));
  auto result = g.run(feeds, {"features_penultimate", "features_final"});
  return {take_row(result.at("features_penultimate"), "features_penultimate", config_.penultimate_dim),
          take_row(result.at("features_final"), "features_final", config_.final_dim)};
}

std::vector<float> Encoder::extract(const image::Raster& image) {
  return extract_tensor(preprocess(image, config_.preprocess));
}

}  // namespace cfx::embed
