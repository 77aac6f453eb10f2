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

#include "embed/onnx_graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/io.hpp"
#include "onnx.pb.h"

namespace cfx::embed {

namespace {

Tensor convert_tensor(const onnx::TensorProto& proto, const std::filesystem::path& model_dir) {
  std::vector<std::int64_t> shape(proto.dims().begin(), proto.dims().end());
  const std::size_t n = shape_numel(shape);

  std::string raw;
  if (proto.data_location() == onnx::TensorProto::EXTERNAL) {
    std::string location;
    std::int64_t offset = 0;
    std::int64_t length = -1;
    for (const auto& kv : proto.external_data()) {
      if (kv.key() == "location") location = kv.value();
      if (kv.key() == "offset") offset = std::stoll(kv.value());
      if (kv.key() == "length") length = std::stoll(kv.value());
    }
    const auto file = model_dir / location;
    std::ifstream in(file, std::ios::binary);
    if (!in) backend_error("initializer '{}': cannot open external data '{}'", proto.name(), file.string());
    in.seekg(offset);
    if (length < 0) {
      in.seekg(0, std::ios::end);
      length = static_cast<std::int64_t>(in.tellg()) - offset;
      in.seekg(offset);
    }
    raw.resize(static_cast<std::size_t>(length));
    if (!in.read(raw.data(), length)) {
      backend_error("initializer '{}': short read from '{}'", proto.name(), file.string());
    }
  } else if (proto.has_raw_data()) {
    raw = proto.raw_data();
  }

  auto check_raw = [&](std::size_t elem) {
    if (raw.size() != n * elem) {
      backend_error("initializer '{}': {} bytes for {} elements", proto.name(), raw.size(), n);
    }
  };

  switch (proto.data_type()) {
    case onnx::TensorProto::FLOAT: {
      std::vector<float> v(n);
      if (!raw.empty() || n == 0) {
        check_raw(4);
        std::memcpy(v.data(), raw.data(), raw.size());
      } else {
        if (static_cast<std::size_t>(proto.float_data_size()) != n) {
          backend_error("initializer '{}': float_data size mismatch", proto.name());
        }
        std::copy(proto.float_data().begin(), proto.float_data().end(), v.begin());
      }
      return Tensor::floats(std::move(shape), std::move(v));
    }
    case onnx::TensorProto::DOUBLE: {
      std::vector<float> v(n);
      if (!raw.empty() || n == 0) {
        check_raw(8);
        for (std::size_t k = 0; k < n; ++k) {
          double d;
          std::memcpy(&d, raw.data() + k * 8, 8);
          v[k] = static_cast<float>(d);
        }
      } else {
        for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<float>(proto.double_data(static_cast<int>(k)));
      }
      return Tensor::floats(std::move(shape), std::move(v));
    }
    case onnx::TensorProto::INT64: {
      std::vector<std::int64_t> v(n);
      if (!raw.empty() || n == 0) {
        check_raw(8);
        std::memcpy(v.data(), raw.data(), raw.size());
      } else {
        std::copy(proto.int64_data().begin(), proto.int64_data().end(), v.begin());
      }
      return Tensor::ints(std::move(shape), std::move(v));
    }
    case onnx::TensorProto::INT32:
    case onnx::TensorProto::BOOL:
    case onnx::TensorProto::UINT8:
    case onnx::TensorProto::INT8: {
      const bool is_bool = proto.data_type() == onnx::TensorProto::BOOL;
      std::vector<std::int64_t> v(n);
      if (!raw.empty() || n == 0) {
        const std::size_t elem = proto.data_type() == onnx::TensorProto::INT32 ? 4 : 1;
        check_raw(elem);
        for (std::size_t k = 0; k < n; ++k) {
          if (elem == 4) {
            std::int32_t x;
            std::memcpy(&x, raw.data() + k * 4, 4);
            v[k] = x;
          } else if (proto.data_type() == onnx::TensorProto::INT8) {
            v[k] = static_cast<std::int8_t>(raw[k]);
          } else {
            v[k] = static_cast<std::uint8_t>(raw[k]);
          }
        }
      } else {
        for (std::size_t k = 0; k < n; ++k) v[k] = proto.int32_data(static_cast<int>(k));
      }
      if (is_bool) return Tensor::bools(std::move(shape), std::move(v));
      return Tensor::ints(std::move(shape), std::move(v));
    }
    default:
      backend_error("initializer '{}': unsupported data type {}", proto.name(), proto.data_type());
  }
}

Attribute convert_attribute(const onnx::AttributeProto& a, const std::filesystem::path& dir) {
  Attribute out;
  switch (a.type()) {
    case onnx::AttributeProto::INT:
      out.kind = Attribute::Kind::i;
      out.i = a.i();
      break;
    case onnx::AttributeProto::FLOAT:
      out.kind = Attribute::Kind::f;
      out.f = a.f();
      break;
    case onnx::AttributeProto::STRING:
      out.kind = Attribute::Kind::s;
      out.s = a.s();
      break;
    case onnx::AttributeProto::INTS:
      out.kind = Attribute::Kind::ints;
      out.ints.assign(a.ints().begin(), a.ints().end());
      break;
    case onnx::AttributeProto::FLOATS:
      out.kind = Attribute::Kind::floats;
      out.floats.assign(a.floats().begin(), a.floats().end());
      break;
    case onnx::AttributeProto::TENSOR:
      out.kind = Attribute::Kind::tensor;
      out.tensor = convert_tensor(a.t(), dir);
      break;
    default:
      break;  // graphs and sparse tensors are rejected by the op itself if used
  }
  return out;
}

ValueInfo convert_value_info(const onnx::ValueInfoProto& v) {
  ValueInfo info;
  info.name = v.name();
  if (v.type().has_tensor_type() && v.type().tensor_type().has_shape()) {
    for (const auto& d : v.type().tensor_type().shape().dim()) {
      info.dims.push_back(d.has_dim_value() ? d.dim_value() : -1);
    }
  }
  return info;
}

}  // namespace

std::int64_t Node::attr_int(const std::string& key, std::int64_t fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.i;
}

float Node::attr_float(const std::string& key, float fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.f;
}

std::vector<std::int64_t> Node::attr_ints(const std::string& key) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? std::vector<std::int64_t>{} : it->second.ints;
}

const Attribute* Node::attr(const std::string& key) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? nullptr : &it->second;
}

OnnxGraph OnnxGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) backend_error("cannot open encoder graph '{}'", path.string());
  onnx::ModelProto model;
  if (!model.ParseFromIstream(&in)) {
    backend_error("'{}' is not a valid ONNX model", path.string());
  }
  const auto dir = path.parent_path();
  const auto& g = model.graph();

  OnnxGraph graph;
  for (const auto& init : g.initializer()) {
    graph.initializers_.emplace(init.name(), convert_tensor(init, dir));
  }
  for (const auto& v : g.input()) {
    if (!graph.initializers_.contains(v.name())) graph.inputs_.push_back(convert_value_info(v));
  }
  for (const auto& v : g.output()) graph.outputs_.push_back(convert_value_info(v));

  std::set<std::string> unsupported;
  for (const auto& n : g.node()) {
    if (!n.domain().empty() && n.domain() != "ai.onnx") {
      unsupported.insert(n.domain() + "::" + n.op_type());
      continue;
    }
    Node node;
    node.name = n.name();
    node.op_type = n.op_type();
    node.inputs.assign(n.input().begin(), n.input().end());
    node.outputs.assign(n.output().begin(), n.output().end());
    for (const auto& a : n.attribute()) node.attributes.emplace(a.name(), convert_attribute(a, dir));
    if (!is_supported_op(node.op_type)) unsupported.insert(node.op_type);
    graph.nodes_.push_back(std::move(node));
  }
  if (!unsupported.empty()) {
    std::string list;
    for (const auto& op : unsupported) list += (list.empty() ? "" : ", ") + op;
    backend_error("'{}' uses unsupported operators: {}", path.string(), list);
  }
  return graph;
}

const ValueInfo* OnnxGraph::output(const std::string& name) const {
  for (const auto& o : outputs_) {
    if (o.name == name) return &o;
  }
  return nullptr;
}

std::vector<std::string> OnnxGraph::op_types() const {
  std::set<std::string> ops;
  for (const auto& n : nodes_) ops.insert(n.op_type);
  return {ops.begin(), ops.end()};
}

std::map<std::string, Tensor> OnnxGraph::run(const std::map<std::string, Tensor>& feeds,
                                             const std::vector<std::string>& wanted) const {
  for (const auto& w : wanted) {
    if (!output(w)) backend_error("graph has no output named '{}'", w);
  }
  for (const auto& in : inputs_) {
    if (!feeds.contains(in.name)) backend_error("missing graph input '{}'", in.name);
  }

  // Backward pass: mark the nodes the requested outputs depend on.
  std::unordered_map<std::string, std::size_t> producer;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    for (const auto& o : nodes_[k].outputs) producer[o] = k;
  }
  std::vector<bool> needed(nodes_.size(), false);
  std::vector<std::string> stack(wanted.begin(), wanted.end());
  std::set<std::string> visited;
  while (!stack.empty()) {
    auto name = std::move(stack.back());
    stack.pop_back();
    if (name.empty() || !visited.insert(name).second) continue;
    auto it = producer.find(name);
    if (it == producer.end()) continue;
    if (needed[it->second]) continue;
    needed[it->second] = true;
    for (const auto& in : nodes_[it->second].inputs) stack.push_back(in);
  }

  std::unordered_map<std::string, Tensor> values;
  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (name.empty()) return nullptr;
    if (auto it = values.find(name); it != values.end()) return &it->second;
    if (auto it = feeds.find(name); it != feeds.end()) return &it->second;
    if (auto it = initializers_.find(name); it != initializers_.end()) return &it->second;
    return nullptr;
  };

  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!needed[k]) continue;
    const Node& node = nodes_[k];
    std::vector<const Tensor*> args;
    args.reserve(node.inputs.size());
    for (const auto& in : node.inputs) {
      const Tensor* t = lookup(in);
      if (!in.empty() && t == nullptr) {
        backend_error("node '{}' ({}): input '{}' is not available", node.name, node.op_type, in);
      }
      args.push_back(t);
    }
    std::vector<Tensor> results;
    try {
      results = execute_node(node, args);
    } catch (const Error& e) {
      backend_error("node '{}' ({}): {}", node.name, node.op_type, e.what());
    } catch (const std::exception& e) {
      backend_error("node '{}' ({}): {}", node.name, node.op_type, e.what());
    }
    for (std::size_t o = 0; o < node.outputs.size() && o < results.size(); ++o) {
      if (!node.outputs[o].empty()) values[node.outputs[o]] = std::move(results[o]);
    }
  }

  std::map<std::string, Tensor> out;
  for (const auto& w : wanted) {
    const Tensor* t = lookup(w);
    if (!t) backend_error("output '{}' was not produced", w);
    out.emplace(w, *t);
  }
  return out;
}

}  // namespace cfx::embed
