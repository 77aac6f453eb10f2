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

#include "image/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "common/error.hpp"
#include "common/io.hpp"

namespace cfx::image {

namespace {

template <typename T>
Raster from_mat(const cv::Mat& m, double scale) {
  Raster out(m.cols, m.rows);
  const int ch = m.channels();
  for (int y = 0; y < m.rows; ++y) {
    const T* row = m.ptr<T>(y);
    for (int x = 0; x < m.cols; ++x) {
      const T* px = row + static_cast<std::ptrdiff_t>(x) * ch;
      for (int c = 0; c < 3; ++c) {
        // OpenCV stores BGR(A); grayscale has a single channel.
        const int src = ch == 1 ? 0 : 2 - c;
        const double v = std::round(static_cast<double>(px[src]) * scale);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

cv::Mat to_bgr_mat(const Raster& raster) {
  cv::Mat m(raster.height, raster.width, CV_8UC3);
  for (int y = 0; y < raster.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < raster.width; ++x) {
      for (int c = 0; c < 3; ++c) row[x * 3 + (2 - c)] = raster.at(x, y, c);
    }
  }
  return m;
}

}  // namespace

Raster decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) data_error("cannot decode an empty image buffer");
  const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                       const_cast<std::uint8_t*>(bytes.data()));
  const cv::Mat m = cv::imdecode(buffer, cv::IMREAD_UNCHANGED | cv::IMREAD_IGNORE_ORIENTATION);
  if (m.empty()) data_error("unsupported or corrupt image data ({} bytes)", bytes.size());
  if (m.cols < 1 || m.rows < 1) data_error("zero-dimension image");
  const int ch = m.channels();
  if (ch != 1 && ch != 3 && ch != 4) {
    data_error("image has {} channels; no RGB conversion is defined", ch);
  }
  switch (m.depth()) {
    case CV_8U:
      return from_mat<std::uint8_t>(m, 1.0);
    case CV_16U:
      return from_mat<std::uint16_t>(m, 255.0 / 65535.0);
    default:
      data_error("unsupported sample depth {}", m.depth());
  }
}

Raster load(const std::filesystem::path& path) {
  try {
    return decode(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode(const Raster& raster, Codec codec, int quality) {
  if (raster.empty()) data_error("cannot encode an empty raster");
  std::vector<int> params;
  const char* ext = ".png";
  switch (codec) {
    case Codec::png:
      params = {cv::IMWRITE_PNG_COMPRESSION, 3};
      break;
    case Codec::jpeg:
      ext = ".jpg";
      params = {cv::IMWRITE_JPEG_QUALITY, quality};
      break;
    case Codec::webp:
      ext = ".webp";
      params = {cv::IMWRITE_WEBP_QUALITY, quality};
      break;
  }
  std::vector<std::uint8_t> out;
  bool ok = false;
  try {
    ok = cv::imencode(ext, to_bgr_mat(raster), out, params);
  } catch (const cv::Exception& e) {
    data_error("{} encode failed: {}", ext, e.what());
  }
  if (!ok) data_error("{} encode failed", ext);
  return out;
}

void save_png(const Raster& raster, const std::filesystem::path& path) {
  write_file_atomic(path, encode(raster, Codec::png));
}

std::vector<std::uint8_t> identity_bytes(const Raster& raster) {
  std::vector<std::uint8_t> out;
  out.reserve(raster.pixels.size() + 16);
  const char tag[] = "RGB8";
  out.insert(out.end(), tag, tag + 4);
  for (int v : {raster.width, raster.height}) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  out.insert(out.end(), raster.pixels.begin(), raster.pixels.end());
  return out;
}

PlanarImage to_planar(const Raster& raster) {
  PlanarImage out(raster.width, raster.height, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < raster.height; ++y) {
      for (int x = 0; x < raster.width; ++x) out.at(c, x, y) = raster.at(x, y, c) / 255.0;
    }
  }
  return out;
}

Raster to_raster(const PlanarImage& image) {
  if (image.channels != 3) internal_error("to_raster expects 3 channels, got {}", image.channels);
  Raster out(image.width, image.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        const double v = std::round(std::clamp(image.at(c, x, y), 0.0, 1.0) * 255.0);
        out.at(x, y, c) = static_cast<std::uint8_t>(v);
      }
    }
  }
  return out;
}

namespace {

double keys_cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

struct Taps {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

Taps resample_taps(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double filter_scale = std::max(scale, 1.0);
  const double support = 2.0 * filter_scale;
  Taps taps;
  taps.first.resize(out_size);
  taps.weights.resize(out_size);
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(static_cast<int>(center - support + 0.5), 0);
    const int hi = std::min(static_cast<int>(center + support + 0.5), in_size);
    auto& w = taps.weights[i];
    double total = 0.0;
    for (int j = lo; j < hi; ++j) {
      w.push_back(keys_cubic((j - center + 0.5) / filter_scale));
      total += w.back();
    }
    if (total != 0.0) {
      for (auto& v : w) v /= total;
    }
    taps.first[i] = lo;
  }
  return taps;
}

}  // namespace

PlanarImage resize_bicubic(const PlanarImage& image, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) {
    data_error("resize target {}x{} is empty", new_width, new_height);
  }
  if (image.width < 1 || image.height < 1) data_error("cannot resize an empty image");
  const Taps horiz = resample_taps(image.width, new_width);
  const Taps vert = resample_taps(image.height, new_height);

  PlanarImage tmp(new_width, image.height, image.channels);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < new_width; ++x) {
        const auto& w = horiz.weights[x];
        const int lo = horiz.first[x];
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * image.at(c, lo + static_cast<int>(k), y);
        tmp.at(c, x, y) = acc;
      }
    }
  }
  PlanarImage out(new_width, new_height, image.channels);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < new_height; ++y) {
      const auto& w = vert.weights[y];
      const int lo = vert.first[y];
      for (int x = 0; x < new_width; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * tmp.at(c, x, lo + static_cast<int>(k));
        out.at(c, x, y) = acc;
      }
    }
  }
  return out;
}

Raster resize_bicubic(const Raster& raster, int new_width, int new_height) {
  if (new_width == raster.width && new_height == raster.height) return raster;
  return to_raster(resize_bicubic(to_planar(raster), new_width, new_height));
}

Raster crop(const Raster& raster, int left, int top, int width, int height) {
  if (left < 0 || top < 0 || width < 1 || height < 1 || left + width > raster.width ||
      top + height > raster.height) {
    data_error("crop window {}x{}+{}+{} outside {}x{} image", width, height, left, top,
               raster.width, raster.height);
  }
  Raster out(width, height);
  for (int y = 0; y < height; ++y) {
    const auto* src = &raster.pixels[(static_cast<std::size_t>(top + y) * raster.width + left) * 3];
    std::copy(src, src + static_cast<std::size_t>(width) * 3,
              &out.pixels[static_cast<std::size_t>(y) * width * 3]);
  }
  return out;
}

double psnr(const Raster& a, const Raster& b) {
  if (a.width != b.width || a.height != b.height) {
    data_error("psnr: size mismatch {}x{} vs {}x{}", a.width, a.height, b.width, b.height);
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.pixels.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace cfx::image
