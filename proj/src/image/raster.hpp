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
#include <span>
#include <string_view>
#include <vector>

namespace cfx::image {

// 8-bit RGB, row-major, interleaved.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const { return width <= 0 || height <= 0; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

// Planar float image, channel-major.
struct PlanarImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  PlanarImage() = default;
  PlanarImage(int w, int h, int c)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}

  double& at(int c, int x, int y) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int x, int y) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

enum class Codec { png, jpeg, webp };

// Decodes PNG/JPEG/WEBP/BMP bytes to RGB. Grayscale is replicated across
// channels, alpha is dropped, 16-bit samples are scaled to 8 bits.
Raster decode(std::span<const std::uint8_t> bytes);
Raster load(const std::filesystem::path& path);

// quality is ignored for PNG.
std::vector<std::uint8_t> encode(const Raster& raster, Codec codec, int quality = 95);
void save_png(const Raster& raster, const std::filesystem::path& path);

// Bytes that identify a decoded raster for cache keys.
std::vector<std::uint8_t> identity_bytes(const Raster& raster);

PlanarImage to_planar(const Raster& raster);  // values in [0, 1]
Raster to_raster(const PlanarImage& image);   // clamps and rounds to 8 bits

// Separable bicubic resampling (Keys kernel, a = -0.5). When shrinking, the
// kernel support is widened by the scale factor so the filter also acts as
// the anti-aliasing low-pass. Scale 1 is an exact identity.
PlanarImage resize_bicubic(const PlanarImage& image, int new_width, int new_height);
Raster resize_bicubic(const Raster& raster, int new_width, int new_height);

Raster crop(const Raster& raster, int left, int top, int width, int height);

double psnr(const Raster& a, const Raster& b);

}  // namespace cfx::image
