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

#include "embed/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "common/error.hpp"

namespace cfx::embed {

void PreprocessSpec::validate() const {
  if (target_side <= 0) config_error("preprocess target_side must be positive, got {}", target_side);
  if (interpolation != "bicubic") config_error("unsupported interpolation '{}'", interpolation);
  if (crop != "center") config_error("unsupported crop '{}'", crop);
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(std[c] > 0.0) || !std::isfinite(std[c])) {
      config_error("preprocess std[{}] must be strictly positive", c);
    }
    if (!std::isfinite(mean[c])) config_error("preprocess mean[{}] is not finite", c);
  }
}

std::string PreprocessSpec::canonical() const {
  return fmt::format("side={};interp={};crop={};mean={},{},{};std={},{},{}", target_side,
                     interpolation, crop, mean[0], mean[1], mean[2], std[0], std[1], std[2]);
}

nlohmann::json PreprocessSpec::to_json() const {
  return {{"target_side", target_side}, {"interpolation", interpolation}, {"crop", crop},
          {"mean", mean},               {"std", std}};
}

PreprocessSpec PreprocessSpec::from_json(const nlohmann::json& j) {
  PreprocessSpec spec;
  try {
    spec.target_side = j.value("target_side", spec.target_side);
    spec.interpolation = j.value("interpolation", spec.interpolation);
    spec.crop = j.value("crop", spec.crop);
    if (j.contains("mean")) spec.mean = j.at("mean").get<std::array<double, 3>>();
    if (j.contains("std")) spec.std = j.at("std").get<std::array<double, 3>>();
  } catch (const nlohmann::json::exception& e) {
    config_error("bad preprocess block: {}", e.what());
  }
  spec.validate();
  return spec;
}

CropWindow crop_window(int width, int height, int side) {
  if (width < 1 || height < 1) data_error("image has a zero dimension ({}x{})", width, height);
  CropWindow w;
  if (width <= height) {
    w.resized_width = side;
    w.resized_height = static_cast<int>(static_cast<double>(side) * height / width);
  } else {
    w.resized_width = static_cast<int>(static_cast<double>(side) * width / height);
    w.resized_height = side;
  }
  // Half-way offsets round to even.
  w.left = static_cast<int>(std::nearbyint((w.resized_width - side) / 2.0));
  w.top = static_cast<int>(std::nearbyint((w.resized_height - side) / 2.0));
  return w;
}

std::vector<float> preprocess(const image::Raster& img, const PreprocessSpec& spec) {
  spec.validate();
  const int side = spec.target_side;
  const CropWindow win = crop_window(img.width, img.height, side);
  const auto resized =
      image::resize_bicubic(image::to_planar(img), win.resized_width, win.resized_height);
  std::vector<float> out(static_cast<std::size_t>(3) * side * side);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double v = std::clamp(resized.at(c, win.left + x, win.top + y), 0.0, 1.0);
        out[(static_cast<std::size_t>(c) * side + y) * side + x] =
            static_cast<float>((v - spec.mean[c]) / spec.std[c]);
      }
    }
  }
  return out;
}

}  // namespace cfx::embed
