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

#include "launder/launder.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace cfx::launder {

const char* to_string(StepKind kind) {
  switch (kind) {
    case StepKind::crop:
      return "crop";
    case StepKind::resize:
      return "resize";
    case StepKind::jpeg:
      return "jpeg";
    case StepKind::webp:
      return "webp";
  }
  return "?";
}

namespace {

const char* param_name(StepKind kind) {
  switch (kind) {
    case StepKind::crop:
      return "fraction";
    case StepKind::resize:
      return "scale";
    default:
      return "quality";
  }
}

StepKind parse_step_kind(const std::string& text) {
  if (text == "crop") return StepKind::crop;
  if (text == "resize") return StepKind::resize;
  if (text == "jpeg") return StepKind::jpeg;
  if (text == "webp") return StepKind::webp;
  config_error("unknown laundering step '{}'", text);
}

void check_step(const Step& s) {
  switch (s.kind) {
    case StepKind::crop:
      if (!(s.value > 0.0 && s.value <= 1.0)) config_error("crop fraction {} outside (0,1]", s.value);
      break;
    case StepKind::resize:
      if (!(s.value > 0.0) || !std::isfinite(s.value)) config_error("resize scale {} must be positive", s.value);
      break;
    case StepKind::jpeg:
    case StepKind::webp:
      if (!(s.value >= 1.0 && s.value <= 100.0) || s.value != std::floor(s.value)) {
        config_error("{} quality {} outside 1..100", to_string(s.kind), s.value);
      }
      break;
  }
}

void check_floor(int width, int height, StepKind kind) {
  if (width < kMinSide || height < kMinSide) {
    data_error("{} would produce a {}x{} image (minimum side {} px)", to_string(kind), width,
               height, kMinSide);
  }
}

}  // namespace

void LaunderRecipe::validate() const {
  if (steps.empty()) config_error("laundering recipe has no steps");
  for (const auto& s : steps) check_step(s);
}

nlohmann::json LaunderRecipe::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : steps) {
    nlohmann::json step = {{"op", to_string(s.kind)}};
    if (s.kind == StepKind::jpeg || s.kind == StepKind::webp) {
      step[param_name(s.kind)] = static_cast<int>(s.value);
    } else {
      step[param_name(s.kind)] = s.value;
    }
    arr.push_back(std::move(step));
  }
  return {{"seed", seed}, {"steps", std::move(arr)}};
}

LaunderRecipe LaunderRecipe::from_json(const nlohmann::json& j) {
  LaunderRecipe r;
  try {
    r.seed = j.value("seed", std::uint64_t{0});
    for (const auto& s : j.at("steps")) {
      Step step;
      step.kind = parse_step_kind(s.at("op").get<std::string>());
      step.value = s.at(param_name(step.kind)).get<double>();
      r.steps.push_back(step);
    }
  } catch (const nlohmann::json::exception& e) {
    config_error("bad laundering recipe: {}", e.what());
  }
  r.validate();
  return r;
}

image::Raster apply(const image::Raster& input, const LaunderRecipe& recipe) {
  recipe.validate();
  if (input.empty()) data_error("cannot launder an empty image");
  image::Raster cur = input;
  for (std::size_t k = 0; k < recipe.steps.size(); ++k) {
    const Step& s = recipe.steps[k];
    switch (s.kind) {
      case StepKind::crop: {
        const int side = static_cast<int>(std::lround(s.value * std::min(cur.width, cur.height)));
        check_floor(side, side, s.kind);
        Rng rng(combine64(recipe.seed, k));
        const int left = static_cast<int>(rng.uniform_int(0, cur.width - side));
        const int top = static_cast<int>(rng.uniform_int(0, cur.height - side));
        cur = image::crop(cur, left, top, side, side);
        break;
      }
      case StepKind::resize: {
        const int w = static_cast<int>(std::lround(s.value * cur.width));
        const int h = static_cast<int>(std::lround(s.value * cur.height));
        check_floor(w, h, s.kind);
        cur = image::resize_bicubic(cur, w, h);
        break;
      }
      case StepKind::jpeg:
      case StepKind::webp: {
        const auto codec = s.kind == StepKind::jpeg ? image::Codec::jpeg : image::Codec::webp;
        cur = image::decode(image::encode(cur, codec, static_cast<int>(s.value)));
        break;
      }
    }
    check_floor(cur.width, cur.height, s.kind);
  }
  return cur;
}

LaunderRecipe social_pipeline(std::uint64_t seed) {
  Rng rng(combine64(seed, fnv1a64("social_pipeline")));
  LaunderRecipe r;
  r.seed = seed;
  r.steps.push_back({StepKind::crop, rng.uniform(0.5, 1.0)});
  r.steps.push_back({StepKind::resize, rng.uniform(0.5, 1.25)});
  r.steps.push_back({StepKind::jpeg, static_cast<double>(rng.uniform_int(60, 100))});
  return r;
}

const char* to_string(Axis axis) {
  switch (axis) {
    case Axis::jpeg_q:
      return "jpeg_q";
    case Axis::webp_q:
      return "webp_q";
    case Axis::resize_scale:
      return "resize_scale";
  }
  return "?";
}

Axis parse_axis(const std::string& text) {
  if (text == "jpeg_q") return Axis::jpeg_q;
  if (text == "webp_q") return Axis::webp_q;
  if (text == "resize_scale") return Axis::resize_scale;
  config_error("unknown sweep axis '{}' (jpeg_q, webp_q, resize_scale)", text);
}

void SweepGrid::validate() const {
  if (values.empty()) config_error("sweep grid for {} has no values", to_string(axis));
  for (double v : values) recipe(v).validate();
}

LaunderRecipe SweepGrid::recipe(double value) const {
  LaunderRecipe r;
  switch (axis) {
    case Axis::jpeg_q:
      r.steps.push_back({StepKind::jpeg, value});
      break;
    case Axis::webp_q:
      r.steps.push_back({StepKind::webp, value});
      break;
    case Axis::resize_scale:
      r.steps.push_back({StepKind::resize, value});
      break;
  }
  return r;
}

SweepGrid SweepGrid::jpeg_default() { return {Axis::jpeg_q, {100, 90, 80, 70, 60}}; }
SweepGrid SweepGrid::webp_default() { return {Axis::webp_q, {100, 90, 80, 70, 60}}; }
SweepGrid SweepGrid::resize_default() { return {Axis::resize_scale, {1.25, 1.0, 0.75, 0.5, 0.25}}; }

std::vector<std::pair<double, std::vector<image::Raster>>> sweep(
    const std::vector<image::Raster>& images, const SweepGrid& grid) {
  grid.validate();
  std::vector<std::pair<double, std::vector<image::Raster>>> out;
  for (double v : grid.values) {
    const auto recipe = grid.recipe(v);
    std::vector<image::Raster> laundered;
    laundered.reserve(images.size());
    for (const auto& img : images) laundered.push_back(apply(img, recipe));
    out.emplace_back(v, std::move(laundered));
  }
  return out;
}

}  // namespace cfx::launder
