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

#include <cmath>
#include <filesystem>
#include <set>

#include <doctest.h>

#include "common/error.hpp"
#include "image/raster.hpp"
#include "launder/launder.hpp"
#include "oracles/natural_image.hpp"

using namespace cfx;
using namespace cfx::launder;

namespace {

image::Raster fixture(int i) {
  return image::load(std::filesystem::path(CFX_FIXTURE_DIR) / "encoder/images" /
                     ("fixture_" + std::to_string(i) + ".png"));
}

image::Raster square(int side) {
  const auto src = fixture(3);  // 896x448
  return image::resize_bicubic(image::crop(src, 0, 0, 448, 448), side, side);
}

LaunderRecipe single(StepKind kind, double value, std::uint64_t seed = 0) {
  LaunderRecipe r;
  r.steps.push_back({kind, value});
  r.seed = seed;
  return r;
}

}  // namespace

TEST_CASE("unit resize is an identity") {
  const auto img = fixture(0);
  const auto out = apply(img, single(StepKind::resize, 1.0));
  CHECK(out == img);
}

TEST_CASE("jpeg 100 stays close on natural images") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = oracle::natural_image(s, 256, 192);
    const auto out = apply(img, single(StepKind::jpeg, 100));
    CHECK(out.width == img.width);
    CHECK(out.height == img.height);
    CHECK(image::psnr(img, out) > 40.0);
  }
}

TEST_CASE("crop geometry and reproducibility") {
  const auto img = square(256);
  const auto a = apply(img, single(StepKind::crop, 0.5, 7));
  const auto b = apply(img, single(StepKind::crop, 0.5, 7));
  CHECK(a.width == 128);
  CHECK(a.height == 128);
  CHECK(a == b);
  // The window has to be somewhere inside the source.
  bool found = false;
  for (int top = 0; top <= 128 && !found; ++top)
    for (int left = 0; left <= 128 && !found; ++left)
      if (image::crop(img, left, top, 128, 128) == a) found = true;
  CHECK(found);
  // Different seeds move the window on a 129x129 grid of positions.
  std::set<std::vector<std::uint8_t>> windows;
  for (std::uint64_t s = 0; s < 10; ++s) windows.insert(apply(img, single(StepKind::crop, 0.5, s)).pixels);
  CHECK(windows.size() >= 9);
}

TEST_CASE("recipes are validated") {
  CHECK_THROWS_AS(single(StepKind::crop, 0.0).validate(), Error);
  CHECK_THROWS_AS(single(StepKind::crop, 1.5).validate(), Error);
  CHECK_THROWS_AS(single(StepKind::resize, -1).validate(), Error);
  CHECK_THROWS_AS(single(StepKind::jpeg, 0).validate(), Error);
  CHECK_THROWS_AS(single(StepKind::webp, 101).validate(), Error);
  const auto img = square(64);
  CHECK_THROWS_AS(apply(img, single(StepKind::resize, 0.2)), Error);  // 13 px
  CHECK(apply(img, single(StepKind::resize, 0.25)).width == 16);
  CHECK_THROWS_AS(apply(img, single(StepKind::crop, 0.2)), Error);
}

TEST_CASE("recipe json round trip") {
  const auto r = social_pipeline(99);
  CHECK(LaunderRecipe::from_json(r.to_json()) == r);
}

TEST_CASE("social pipeline sampling") {
  CHECK(social_pipeline(3) == social_pipeline(3));
  std::set<std::vector<double>> distinct;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::vector<double> key;
    for (const auto& st : social_pipeline(s).steps) key.push_back(st.value);
    distinct.insert(key);
  }
  CHECK(distinct.size() >= 99);

  double q_sum = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto r = social_pipeline(s);
    REQUIRE(r.steps.size() == 3);
    CHECK(r.steps[0].kind == StepKind::crop);
    CHECK(r.steps[1].kind == StepKind::resize);
    CHECK(r.steps[2].kind == StepKind::jpeg);
    CHECK(r.steps[0].value >= 0.5);
    CHECK(r.steps[0].value <= 1.0);
    CHECK(r.steps[1].value >= 0.5);
    CHECK(r.steps[1].value <= 1.25);
    CHECK(r.steps[2].value == std::round(r.steps[2].value));
    CHECK(r.steps[2].value >= 60);
    CHECK(r.steps[2].value <= 100);
    q_sum += r.steps[2].value;
  }
  CHECK(q_sum / 1000 >= 78);
  CHECK(q_sum / 1000 <= 82);

  const auto img = fixture(2);
  CHECK(apply(img, social_pipeline(5)) == apply(img, social_pipeline(5)));
}

TEST_CASE("sweeps") {
  const std::vector<image::Raster> two = {fixture(0), fixture(4)};
  const auto jpeg = sweep(two, SweepGrid{Axis::jpeg_q, {100, 90, 80, 70, 60}});
  std::size_t outputs = 0;
  for (const auto& [_, imgs] : jpeg) outputs += imgs.size();
  CHECK(jpeg.size() == 5);
  CHECK(outputs == 10);

  const auto img = square(128);
  const auto resized = sweep({img}, SweepGrid::resize_default());
  REQUIRE(resized.size() == 5);
  for (const auto& [s, imgs] : resized) {
    CHECK(imgs[0].width == static_cast<int>(std::lround(s * 128)));
    CHECK(imgs[0].height == static_cast<int>(std::lround(s * 128)));
  }
  CHECK_THROWS_AS(sweep({square(32)}, SweepGrid::resize_default()), Error);
  CHECK_THROWS_AS(SweepGrid(SweepGrid{Axis::webp_q, {}}).validate(), Error);
  CHECK(parse_axis("webp_q") == Axis::webp_q);
  CHECK_THROWS_AS(parse_axis("blur"), Error);
}

TEST_CASE("webp size shrinks with quality") {
  for (int i = 0; i < 5; ++i) {
    const auto img = fixture(i);
    int inversions = 0;
    std::size_t previous = 0;
    for (double q : SweepGrid::webp_default().values) {
      const auto size = image::encode(img, image::Codec::webp, static_cast<int>(q)).size();
      if (previous != 0 && size > previous) ++inversions;
      previous = size;
    }
    CHECK(inversions <= 1);
  }
}

TEST_CASE("resize there and back restores dimensions") {
  // Only when scale * side is a whole number; otherwise rounding twice can
  // land one pixel off (150 * 0.75 = 112.5 -> 113 -> 151).
  for (const auto& img : {square(96), square(160), image::resize_bicubic(fixture(3), 320, 160)}) {
    for (double s : {0.5, 0.75, 1.25, 2.0}) {
      const auto there = apply(img, single(StepKind::resize, s));
      const auto back = apply(there, single(StepKind::resize, 1.0 / s));
      CHECK(back.width == img.width);
      CHECK(back.height == img.height);
    }
  }
}
