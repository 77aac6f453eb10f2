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

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "image/raster.hpp"

namespace cfx::embed {

struct PreprocessSpec {
  int target_side = 224;
  std::string interpolation = "bicubic";
  std::string crop = "center";
  std::array<double, 3> mean = {0.48145466, 0.4578275, 0.40821073};
  std::array<double, 3> std = {0.26862954, 0.26130258, 0.27577711};

  void validate() const;
  // Stable text form; part of every cache key.
  std::string canonical() const;

  nlohmann::json to_json() const;
  static PreprocessSpec from_json(const nlohmann::json& j);
};

// Where the center crop lands after the shorter side is scaled to `side`.
struct CropWindow {
  int resized_width = 0;
  int resized_height = 0;
  int left = 0;
  int top = 0;
};

CropWindow crop_window(int width, int height, int side);

// Returns a 3 x side x side channel-major tensor.
std::vector<float> preprocess(const image::Raster& image, const PreprocessSpec& spec);

}  // namespace cfx::embed
