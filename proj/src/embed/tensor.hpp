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
#include <vector>

namespace cfx::embed {

enum class DType { f32, i64, boolean };

const char* to_string(DType dtype);

// Dense row-major tensor. Float data lives in `f`; int64 and bool data in `i`
// (bool as 0/1).
struct Tensor {
  DType dtype = DType::f32;
  std::vector<std::int64_t> shape;
  std::vector<float> f;
  std::vector<std::int64_t> i;

  static Tensor floats(std::vector<std::int64_t> shape, std::vector<float> values);
  static Tensor ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> values);
  static Tensor bools(std::vector<std::int64_t> shape, std::vector<std::int64_t> values);
  static Tensor zeros(DType dtype, std::vector<std::int64_t> shape);

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
  bool is_float() const { return dtype == DType::f32; }
  std::string shape_string() const;

  // Element i as double / int64 regardless of storage.
  double get(std::size_t k) const { return is_float() ? f[k] : static_cast<double>(i[k]); }
  std::int64_t get_int(std::size_t k) const {
    return is_float() ? static_cast<std::int64_t>(f[k]) : i[k];
  }
  std::vector<std::int64_t> to_int_vector() const;
};

std::size_t shape_numel(const std::vector<std::int64_t>& shape);

}  // namespace cfx::embed
