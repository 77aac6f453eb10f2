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
#include "common/hash.hpp"
#include "common/io.hpp"
#include "common/rng.hpp"

using namespace cfx;

TEST_CASE("sha256 known answers") {
  CHECK(to_hex(sha256(std::string_view("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(to_hex(sha256(std::string_view(""))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  Sha256 h;
  h.update(std::string_view("a")).update(std::string_view("bc"));
  CHECK(h.finish() == sha256(std::string_view("abc")));
}

TEST_CASE("length-prefixed fields do not alias") {
  Sha256 a, b;
  a.update_field("ab").update_field("c");
  b.update_field("a").update_field("bc");
  CHECK(a.finish() != b.finish());
}

TEST_CASE("base64 round trip and known text") {
  const std::string text = "hello world";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  CHECK(base64_encode(bytes) == "aGVsbG8gd29ybGQ=");
  CHECK(base64_decode("aGVsbG8gd29ybGQ=") == text);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint8_t>(i * 37 + 11);
    const auto back = base64_decode(base64_encode(v));
    CHECK(std::vector<std::uint8_t>(back.begin(), back.end()) == v);
  }
  CHECK_THROWS_AS(base64_decode("@@@@"), Error);
}

TEST_CASE("rng streams are reproducible and in range") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(Rng(42).next() != c.next());
  Rng r(7);
  std::set<std::int64_t> seen;
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.uniform_int(-3, 3);
    CHECK(k >= -3);
    CHECK(k <= 3);
    seen.insert(k);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(seen.size() == 7);
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  CHECK(fnv1a64("a") != fnv1a64("b"));
  CHECK(combine64(1, 2) != combine64(2, 1));
}

TEST_CASE("atomic writes and float side files") {
  const auto dir = std::filesystem::temp_directory_path() / "cfx_common_io";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "a.txt", std::string_view("one"));
  write_file_atomic(dir / "a.txt", std::string_view("two"));
  CHECK(read_file_text(dir / "a.txt") == "two");
  CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator()) == 1);
  const std::vector<float> v = {1.5f, -0.0f, 3e-38f, 1e30f};
  write_f32_file(dir / "v.f32", v);
  CHECK(std::filesystem::file_size(dir / "v.f32") == 16);
  CHECK(read_f32_file(dir / "v.f32") == v);
  write_file_atomic(dir / "bad.f32", std::string_view("abc"));
  CHECK_THROWS_AS(read_f32_file(dir / "bad.f32"), Error);
  try {
    read_file_bytes(dir / "missing");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
  std::filesystem::remove_all(dir);
}
