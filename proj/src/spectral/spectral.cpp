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

#include "spectral/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/rng.hpp"

namespace cfx::spectral {

using image::PlanarImage;
using image::Raster;

namespace {

// Sum of a range by a balanced binary tree; fixes the rounding order.
double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

double SpectrumMap::total() const { return pairwise_sum(power.data(), power.size()); }

PlanarImage noise_residual(const Raster& img) {
  if (img.width < kMinResidualSide || img.height < kMinResidualSide) {
    data_error("image {}x{} is below the {} px minimum for residual extraction", img.width, img.height,
               kMinResidualSide);
  }
  const int w = img.width, h = img.height;
  PlanarImage lum(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      lum.at(0, x, y) = (0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2)) / 255.0;
    }
  }
  PlanarImage res(w, h, 1);
  double window[9];
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          window[n++] = lum.at(0, (x + dx + w) % w, (y + dy + h) % h);
        }
      }
      std::nth_element(window, window + 4, window + 9);
      res.at(0, x, y) = lum.at(0, x, y) - window[4];
    }
  }
  const double mean = pairwise_sum(res.data.data(), res.data.size()) / static_cast<double>(res.data.size());
  for (auto& v : res.data) v -= mean;
  return res;
}

PlanarImage fit_to_side(const PlanarImage& r, int side) {
  if (side < 1) config_error("spectrum side must be positive, got {}", side);
  if (r.channels != 1) internal_error("residual must have one channel");
  PlanarImage out(side, side, 1);
  // Offsets map output (0,0) onto the source; negative means padding.
  const int ox = (r.width - side) / 2;
  const int oy = (r.height - side) / 2;
  for (int y = 0; y < side; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= r.height) continue;
    for (int x = 0; x < side; ++x) {
      const int sx = x + ox;
      if (sx >= 0 && sx < r.width) out.at(0, x, y) = r.at(0, sx, sy);
    }
  }
  return out;
}

SpectrumMap power_spectrum(const PlanarImage& fitted) {
  if (fitted.width != fitted.height || fitted.channels != 1) internal_error("power_spectrum needs a square residual");
  const int n = fitted.width;
  const int half = n / 2 + 1;
  std::vector<double> in(fitted.data);
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n) * half));
  if (!out) internal_error("fftw allocation failed");
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_2d(n, n, in.data(), out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  SpectrumMap map;
  map.side = n;
  map.n_images = 1;
  map.power.assign(static_cast<std::size_t>(n) * n, 0.0);
  const int c = n / 2;
  for (int ky = 0; ky < n; ++ky) {
    for (int kx = 0; kx < n; ++kx) {
      // Columns past n/2 come from Hermitian symmetry.
      int sy = ky, sx = kx;
      if (kx >= half) {
        sx = n - kx;
        sy = (n - ky) % n;
      }
      const auto& z = out[static_cast<std::size_t>(sy) * half + sx];
      const double p = z[0] * z[0] + z[1] * z[1];
      const int row = (ky + c) % n;
      const int col = (kx + c) % n;
      map.power[static_cast<std::size_t>(row) * n + col] = p;
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  return map;
}

namespace {

SpectrumMap reduce(const std::vector<SpectrumMap>& maps, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return maps[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  SpectrumMap a = reduce(maps, lo, mid);
  const SpectrumMap b = reduce(maps, mid, hi);
  for (std::size_t i = 0; i < a.power.size(); ++i) a.power[i] += b.power[i];
  a.n_images += b.n_images;
  return a;
}

}  // namespace

SpectrumMap mean_power_spectrum(const std::vector<PlanarImage>& residuals, int side) {
  if (residuals.empty()) data_error("no images to average");
  std::vector<SpectrumMap> maps;
  maps.reserve(residuals.size());
  for (const auto& r : residuals) maps.push_back(power_spectrum(fit_to_side(r, side)));
  SpectrumMap sum = reduce(maps, 0, maps.size());
  for (auto& p : sum.power) p /= static_cast<double>(sum.n_images);
  return sum;
}

SpectrumMap mean_power_spectrum(const std::vector<Raster>& images, int side) {
  if (images.empty()) data_error("no images to average");
  std::vector<PlanarImage> residuals;
  residuals.reserve(images.size());
  for (const auto& img : images) residuals.push_back(noise_residual(img));
  return mean_power_spectrum(residuals, side);
}

nlohmann::ordered_json PeakReport::to_json() const {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& p : peaks) list.push_back({{"u", p.u}, {"v", p.v}, {"power", p.power}, {"ratio", p.ratio}});
  return {{"k", k}, {"median", median}, {"spread", spread}, {"peaks", list}};
}

PeakReport detect_peaks(const SpectrumMap& s, double k) {
  if (!(k > 0.0)) config_error("peak threshold k must be positive, got {}", k);
  const int n = s.side;
  if (n < 1 || s.power.size() != static_cast<std::size_t>(n) * n) data_error("malformed spectrum map");
  const int c = n / 2;
  auto near_dc = [&](int row, int col) { return std::abs(row - c) <= 1 && std::abs(col - c) <= 1; };

  PeakReport rep;
  rep.k = k;
  std::vector<double> all;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      if (!near_dc(r, col)) all.push_back(s.at(r, col));
    }
  }
  if (all.empty()) return rep;
  rep.median = median_of(all);
  for (auto& v : all) v = std::abs(v - rep.median);
  rep.spread = 1.4826 * median_of(all);
  const double floor = std::max(1e-9 * rep.median, std::numeric_limits<double>::min());

  const int radius = std::min(4, (n - 1) / 2);
  std::vector<double> hood;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      if (near_dc(r, col)) continue;
      const double p = s.at(r, col);
      hood.clear();
      bool is_max = true;
      for (int dy = -radius; dy <= radius && is_max; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double q = s.at((r + dy + n) % n, (col + dx + n) % n);
          if (q > p) {
            is_max = false;
            break;
          }
          hood.push_back(q);
        }
      }
      if (!is_max) continue;
      const double med = median_of(hood);
      for (auto& v : hood) v = std::abs(v - med);
      double spread = std::max(1.4826 * median_of(hood), floor);
      // Self-conjugate bins of a real signal carry one degree of freedom
      // instead of two, so their power fluctuates sqrt(2) times more.
      const bool self_conjugate = (r == 0 || r == c) && (col == 0 || col == c);
      if (self_conjugate && n % 2 == 0) spread *= std::sqrt(2.0);
      if (p > med + k * spread) {
        rep.peaks.push_back({col - c, r - c, p, p / std::max(med, floor)});
      }
    }
  }
  std::sort(rep.peaks.begin(), rep.peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    if (a.v != b.v) return a.v < b.v;
    return a.u < b.u;
  });
  return rep;
}

namespace {

std::vector<double> lanczos_taps(int factor) {
  const int reach = 3 * factor;
  std::vector<double> taps(static_cast<std::size_t>(2 * reach + 1));
  auto sinc = [](double x) { return x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x); };
  double sum = 0.0;
  for (int i = -reach; i <= reach; ++i) {
    const double t = static_cast<double>(i) / factor;
    const double v = sinc(t) * sinc(t / 3.0);
    taps[static_cast<std::size_t>(i + reach)] = v;
    sum += v;
  }
  for (auto& v : taps) v /= sum;
  return taps;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

PlanarImage decimate(const PlanarImage& img, int factor) {
  if (factor < 2) config_error("decimation factor must be at least 2, got {}", factor);
  const int w = img.width / factor, h = img.height / factor;
  if (w < kMinDecimatedSide || h < kMinDecimatedSide) {
    data_error("decimating {}x{} by {} falls below the {} px floor", img.width, img.height, factor, kMinDecimatedSide);
  }
  const int cw = w * factor, ch = h * factor;
  const int left = (img.width - cw) / 2, top = (img.height - ch) / 2;
  const auto taps = lanczos_taps(factor);
  const int reach = 3 * factor;

  PlanarImage out(w, h, img.channels);
  std::vector<double> rows(static_cast<std::size_t>(cw) * h);
  for (int c = 0; c < img.channels; ++c) {
    // Vertical pass at the kept rows only.
    for (int oy = 0; oy < h; ++oy) {
      const int cy = oy * factor;
      for (int x = 0; x < cw; ++x) {
        double acc = 0.0;
        for (int t = -reach; t <= reach; ++t) {
          acc += taps[static_cast<std::size_t>(t + reach)] * img.at(c, left + x, top + reflect(cy + t, ch));
        }
        rows[static_cast<std::size_t>(oy) * cw + x] = acc;
      }
    }
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < w; ++ox) {
        const int cx = ox * factor;
        double acc = 0.0;
        for (int t = -reach; t <= reach; ++t) {
          acc += taps[static_cast<std::size_t>(t + reach)] * rows[static_cast<std::size_t>(oy) * cw + reflect(cx + t, cw)];
        }
        out.at(c, ox, oy) = acc;
      }
    }
  }
  return out;
}

Raster decimate(const Raster& img, int factor) { return image::to_raster(decimate(image::to_planar(img), factor)); }

std::string to_pgm(const SpectrumMap& s) {
  std::vector<double> logp(s.power.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < s.power.size(); ++i) {
    logp[i] = std::log10(1.0 + s.power[i]);
    lo = std::min(lo, logp[i]);
    hi = std::max(hi, logp[i]);
  }
  std::string out = fmt::format("P5\n{} {}\n255\n", s.side, s.side);
  for (double v : logp) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
  return out;
}

void export_spectrum(const SpectrumMap& s, const std::filesystem::path& stem) {
  auto with = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  write_file_atomic(with(".pgm"), to_pgm(s));
  std::vector<float> f(s.power.begin(), s.power.end());
  write_f32_file(with(".f32"), f);
  nlohmann::ordered_json meta = {{"side", s.side},
                                 {"n_images", s.n_images},
                                 {"layout", "row-major, dc at (side/2, side/2)"},
                                 {"dtype", "float32-le"},
                                 {"scale", "linear power"}};
  write_file_atomic(with(".json"), meta.dump(2) + "\n");
}

SpectrumMap load_spectrum(const std::filesystem::path& stem) {
  auto with = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file_text(with(".json")));
  } catch (const nlohmann::json::exception& e) {
    data_error("bad spectrum sidecar: {}", e.what());
  }
  SpectrumMap s;
  s.side = meta.at("side").get<int>();
  s.n_images = meta.at("n_images").get<int>();
  const auto f = read_f32_file(with(".f32"));
  if (f.size() != static_cast<std::size_t>(s.side) * s.side) {
    data_error("spectrum file holds {} values, sidecar says side {}", f.size(), s.side);
  }
  s.power.assign(f.begin(), f.end());
  return s;
}

Raster comb_image(int width, int height, int period, double amplitude, double noise, std::uint64_t seed) {
  if (width < 1 || height < 1) config_error("image size must be positive");
  if (period < 1) config_error("comb period must be positive");
  Rng rng(combine64(seed, fnv1a64("comb")));
  Raster r(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = 0.5 + amplitude * std::cos(2.0 * M_PI * (x % period) / period) + noise * rng.normal();
      const auto q = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * v), 0L, 255L));
      for (int c = 0; c < 3; ++c) r.at(x, y, c) = q;
    }
  }
  return r;
}

Raster white_noise_image(int width, int height, double noise, std::uint64_t seed) {
  return comb_image(width, height, 1, 0.0, noise, seed);
}

}  // namespace cfx::spectral
