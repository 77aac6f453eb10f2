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
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "image/raster.hpp"

namespace cfx::launder {

enum class StepKind { crop, resize, jpeg, webp };

const char* to_string(StepKind kind);

// crop: fraction of the shorter side in (0,1]; resize: scale > 0;
// jpeg/webp: quality 1..100.
struct Step {
  StepKind kind = StepKind::resize;
  double value = 1.0;

  friend bool operator==(const Step&, const Step&) = default;
};

struct LaunderRecipe {
  std::vector<Step> steps;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static LaunderRecipe from_json(const nlohmann::json& j);

  friend bool operator==(const LaunderRecipe&, const LaunderRecipe&) = default;
};

// Outputs below this side length are refused.
inline constexpr int kMinSide = 16;

image::Raster apply(const image::Raster& image, const LaunderRecipe& recipe);

// crop f ~ U[0.5,1], resize s ~ U[0.5,1.25], jpeg q ~ U{60..100}, in that order.
LaunderRecipe social_pipeline(std::uint64_t seed);

enum class Axis { jpeg_q, webp_q, resize_scale };

const char* to_string(Axis axis);
Axis parse_axis(const std::string& text);

struct SweepGrid {
  Axis axis = Axis::jpeg_q;
  std::vector<double> values;

  void validate() const;
  // Single-step recipe for one grid value.
  LaunderRecipe recipe(double value) const;

  static SweepGrid jpeg_default();    // 100..60 step 10
  static SweepGrid webp_default();    // 100..60 step 10
  static SweepGrid resize_default();  // 1.25..0.25 step 0.25
};

// One laundered copy per (value, image), values in grid order.
std::vector<std::pair<double, std::vector<image::Raster>>> sweep(
    const std::vector<image::Raster>& images, const SweepGrid& grid);

}  // namespace cfx::launder
