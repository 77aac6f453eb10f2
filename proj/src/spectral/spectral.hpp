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
#include <string>
#include <vector>

#include <json.hpp>

#include "image/raster.hpp"

namespace cfx::spectral {

constexpr int kMinResidualSide = 32;
constexpr int kMinDecimatedSide = 16;
constexpr double kDefaultPeakK = 6.0;

/// Luminance minus its 3x3 median, then mean-subtracted. The median window
/// wraps around the borders, matching the periodic extension of the FFT.
/// Luminance uses Rec. 601 weights on [0,1] samples.
image::PlanarImage noise_residual(const image::Raster& image);

// Average of |FFT2|^2 over residuals, DC at (side/2, side/2). Row-major, row
// index is the vertical frequency.
struct SpectrumMap {
  int side = 0;
  int n_images = 0;
  std::vector<double> power;

  double at(int row, int col) const { return power[static_cast<std::size_t>(row) * side + col]; }
  double total() const;
};

/// Center crop or zero-pad a single-channel image to side x side.
image::PlanarImage fit_to_side(const image::PlanarImage& residual, int side);

// Power spectrum of one already-fitted residual (side x side).
SpectrumMap power_spectrum(const image::PlanarImage& fitted);

SpectrumMap mean_power_spectrum(const std::vector<image::Raster>& images, int side);
// Same reduction over precomputed residuals.
SpectrumMap mean_power_spectrum(const std::vector<image::PlanarImage>& residuals, int side);

struct Peak {
  int u = 0;  // horizontal frequency, bins from DC
  int v = 0;  // vertical frequency, bins from DC
  double power = 0.0;
  double ratio = 0.0;  // power over local background median
};

struct PeakReport {
  std::vector<Peak> peaks;
  double median = 0.0;  // whole map, DC block excluded
  double spread = 0.0;  // 1.4826 * MAD, same population
  double k = kDefaultPeakK;

  nlohmann::ordered_json to_json() const;
};

/// A bin is a peak when it is the maximum of its 9x9 (wrapped) neighbourhood
/// and exceeds the neighbourhood median by k robust spreads. The spread is
/// floored at 1e-9 of the global median so exactly flat backgrounds stay
/// well defined. The 3x3 block around DC is never reported.
PeakReport detect_peaks(const SpectrumMap& spectrum, double k = kDefaultPeakK);

/// Lanczos-3 windowed-sinc low-pass with cutoff pi/factor applied
/// separably, then every factor-th sample. Input is first center-cropped so
/// both sides divide by factor.
image::Raster decimate(const image::Raster& image, int factor);
image::PlanarImage decimate(const image::PlanarImage& image, int factor);

// Exports: log-scaled 8-bit PGM, raw little-endian float32, JSON sidecar.
std::string to_pgm(const SpectrumMap& spectrum);
void export_spectrum(const SpectrumMap& spectrum, const std::filesystem::path& stem);
SpectrumMap load_spectrum(const std::filesystem::path& stem);

// Synthetic inputs with known spectra. Values are gray, in [0,1] before
// 8-bit quantization: 0.5 + amplitude * cos(2 pi x / period) + N(0, noise).
image::Raster comb_image(int width, int height, int period, double amplitude, double noise, std::uint64_t seed);
image::Raster white_noise_image(int width, int height, double noise, std::uint64_t seed);

}  // namespace cfx::spectral
