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
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "embed/tensor.hpp"

namespace cfx::embed {

struct Attribute {
  enum class Kind { none, i, f, s, ints, floats, tensor } kind = Kind::none;
  std::int64_t i = 0;
  float f = 0.0f;
  std::string s;
  std::vector<std::int64_t> ints;
  std::vector<float> floats;
  Tensor tensor;
};

struct Node {
  std::string name;
  std::string op_type;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, Attribute> attributes;

  std::int64_t attr_int(const std::string& key, std::int64_t fallback) const;
  float attr_float(const std::string& key, float fallback) const;
  std::vector<std::int64_t> attr_ints(const std::string& key) const;
  const Attribute* attr(const std::string& key) const;
};

struct ValueInfo {
  std::string name;
  // -1 marks a symbolic or unknown dimension.
  std::vector<std::int64_t> dims;
};

/// An ONNX model evaluated by a reference interpreter. Loaded graphs are
/// immutable; `run` may be called concurrently.
class OnnxGraph {
 public:
  static OnnxGraph load(const std::filesystem::path& path);

  const std::vector<ValueInfo>& inputs() const { return inputs_; }
  const std::vector<ValueInfo>& outputs() const { return outputs_; }
  const ValueInfo* output(const std::string& name) const;
  std::size_t node_count() const { return nodes_.size(); }
  std::vector<std::string> op_types() const;

  /// Evaluates only the nodes that `wanted` depends on. Node failures are
  /// reported as backend errors naming the node and operator.
  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& feeds,
                                    const std::vector<std::string>& wanted) const;

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, Tensor> initializers_;
  std::vector<ValueInfo> inputs_;
  std::vector<ValueInfo> outputs_;
};

/// Executes one node. Missing optional inputs are passed as nullptr.
std::vector<Tensor> execute_node(const Node& node, const std::vector<const Tensor*>& inputs);

bool is_supported_op(const std::string& op_type);

}  // namespace cfx::embed
