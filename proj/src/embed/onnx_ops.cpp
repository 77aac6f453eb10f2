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

// Reference kernels for the ONNX operators found in exported vision
// transformers (opset 13-18). Float math is float32 like common runtimes;
// reductions accumulate in double.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include <Eigen/Core>
#include <fmt/format.h>

#include "common/error.hpp"
#include "embed/onnx_graph.hpp"

namespace cfx::embed {

const char* to_string(DType dtype) {
  switch (dtype) {
    case DType::f32:
      return "float32";
    case DType::i64:
      return "int64";
    case DType::boolean:
      return "bool";
  }
  return "?";
}

std::size_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) backend_error("negative dimension {}", d);
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::floats(std::vector<std::int64_t> shape, std::vector<float> values) {
  Tensor t;
  t.dtype = DType::f32;
  t.shape = std::move(shape);
  t.f = std::move(values);
  if (t.f.size() != shape_numel(t.shape)) backend_error("tensor data does not match shape");
  return t;
}

Tensor Tensor::ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> values) {
  Tensor t;
  t.dtype = DType::i64;
  t.shape = std::move(shape);
  t.i = std::move(values);
  if (t.i.size() != shape_numel(t.shape)) backend_error("tensor data does not match shape");
  return t;
}

Tensor Tensor::bools(std::vector<std::int64_t> shape, std::vector<std::int64_t> values) {
  Tensor t = ints(std::move(shape), std::move(values));
  t.dtype = DType::boolean;
  return t;
}

Tensor Tensor::zeros(DType dtype, std::vector<std::int64_t> shape) {
  Tensor t;
  t.dtype = dtype;
  t.shape = std::move(shape);
  if (dtype == DType::f32) {
    t.f.assign(shape_numel(t.shape), 0.0f);
  } else {
    t.i.assign(shape_numel(t.shape), 0);
  }
  return t;
}

std::size_t Tensor::numel() const { return shape_numel(shape); }

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t k = 0; k < shape.size(); ++k) s += (k ? "," : "") + std::to_string(shape[k]);
  return s + ")";
}

std::vector<std::int64_t> Tensor::to_int_vector() const {
  std::vector<std::int64_t> out(numel());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = get_int(k);
  return out;
}

namespace {

using Shape = std::vector<std::int64_t>;
using Args = std::vector<const Tensor*>;

const Tensor& need(const Args& args, std::size_t k, const Node& node) {
  if (k >= args.size() || args[k] == nullptr) {
    backend_error("{} requires input #{}", node.op_type, k);
  }
  return *args[k];
}

const Tensor* optional(const Args& args, std::size_t k) {
  return k < args.size() ? args[k] : nullptr;
}

std::int64_t normalize_axis(std::int64_t axis, std::size_t rank) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < -r || axis >= std::max<std::int64_t>(r, 1)) {
    backend_error("axis {} out of range for rank {}", axis, rank);
  }
  return axis < 0 ? axis + r : axis;
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * static_cast<std::size_t>(shape[k]);
  return s;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::int64_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const std::int64_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      backend_error("cannot broadcast shapes of rank {} and {} (dim {} vs {})", a.size(), b.size(), da, db);
    }
    out[k] = da == 1 ? db : da;
  }
  return out;
}

// For every output element, the linear index into an input broadcast to `out`.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> idx(n);
  if (in == out) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  if (shape_numel(in) == 1) return idx;  // all zeros
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  const auto in_strides = strides_of(in);
  std::vector<std::size_t> eff(rank, 0);
  for (std::size_t k = 0; k < in.size(); ++k) {
    eff[k + offset] = in[k] == 1 ? 0 : in_strides[k];
  }
  std::vector<std::int64_t> counter(rank, 0);
  std::size_t cur = 0;
  for (std::size_t lin = 0; lin < n; ++lin) {
    idx[lin] = cur;
    for (std::size_t k = rank; k-- > 0;) {
      if (++counter[k] < out[k]) {
        cur += eff[k];
        break;
      }
      cur -= eff[k] * static_cast<std::size_t>(counter[k] - 1);
      counter[k] = 0;
    }
  }
  return idx;
}

template <typename FloatOp, typename IntOp>
Tensor binary(const Tensor& a, const Tensor& b, FloatOp fop, IntOp iop) {
  const Shape shape = broadcast_shapes(a.shape, b.shape);
  const auto ia = broadcast_index(a.shape, shape);
  const auto ib = broadcast_index(b.shape, shape);
  const std::size_t n = ia.size();
  if (a.is_float() || b.is_float()) {
    std::vector<float> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = fop(static_cast<float>(a.get(ia[k])), static_cast<float>(b.get(ib[k])));
    }
    return Tensor::floats(shape, std::move(out));
  }
  std::vector<std::int64_t> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = iop(a.i[ia[k]], b.i[ib[k]]);
  return Tensor::ints(shape, std::move(out));
}

template <typename Cmp>
Tensor compare(const Tensor& a, const Tensor& b, Cmp cmp) {
  const Shape shape = broadcast_shapes(a.shape, b.shape);
  const auto ia = broadcast_index(a.shape, shape);
  const auto ib = broadcast_index(b.shape, shape);
  std::vector<std::int64_t> out(ia.size());
  for (std::size_t k = 0; k < ia.size(); ++k) out[k] = cmp(a.get(ia[k]), b.get(ib[k])) ? 1 : 0;
  return Tensor::bools(shape, std::move(out));
}

template <typename Fn>
Tensor unary_float(const Tensor& x, Fn fn) {
  if (!x.is_float()) backend_error("expects a float tensor, got {}", to_string(x.dtype));
  Tensor out = x;
  for (auto& v : out.f) v = fn(v);
  return out;
}

Tensor reshape_to(const Tensor& x, Shape shape) {
  Tensor out = x;
  out.shape = std::move(shape);
  if (out.numel() != x.numel()) {
    backend_error("cannot reshape {} to {}", x.shape_string(), out.shape_string());
  }
  return out;
}

// Copies elements of `x` selected by `src_index` (one per output element).
Tensor gather_elements(const Tensor& x, Shape shape, const std::vector<std::size_t>& src_index) {
  Tensor out;
  out.dtype = x.dtype;
  out.shape = std::move(shape);
  if (x.is_float()) {
    out.f.resize(src_index.size());
    for (std::size_t k = 0; k < src_index.size(); ++k) out.f[k] = x.f[src_index[k]];
  } else {
    out.i.resize(src_index.size());
    for (std::size_t k = 0; k < src_index.size(); ++k) out.i[k] = x.i[src_index[k]];
  }
  return out;
}

Tensor op_constant(const Node& node, const Args&) {
  if (const auto* a = node.attr("value")) return a->tensor;
  if (const auto* a = node.attr("value_float")) return Tensor::floats({}, {a->f});
  if (const auto* a = node.attr("value_floats")) {
    return Tensor::floats({static_cast<std::int64_t>(a->floats.size())}, a->floats);
  }
  if (const auto* a = node.attr("value_int")) return Tensor::ints({}, {a->i});
  if (const auto* a = node.attr("value_ints")) {
    return Tensor::ints({static_cast<std::int64_t>(a->ints.size())}, a->ints);
  }
  backend_error("Constant without a supported value attribute");
}

Tensor op_unsqueeze(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  std::vector<std::int64_t> axes = node.attr_ints("axes");
  if (const Tensor* a = optional(args, 1)) axes = a->to_int_vector();
  const std::size_t rank = x.rank() + axes.size();
  for (auto& ax : axes) ax = normalize_axis(ax, rank);
  std::sort(axes.begin(), axes.end());
  Shape shape;
  std::size_t src = 0;
  for (std::size_t k = 0; k < rank; ++k) {
    if (std::binary_search(axes.begin(), axes.end(), static_cast<std::int64_t>(k))) {
      shape.push_back(1);
    } else {
      shape.push_back(x.shape.at(src++));
    }
  }
  return reshape_to(x, std::move(shape));
}

Tensor op_squeeze(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  std::vector<std::int64_t> axes = node.attr_ints("axes");
  if (const Tensor* a = optional(args, 1)) axes = a->to_int_vector();
  for (auto& ax : axes) ax = normalize_axis(ax, x.rank());
  Shape shape;
  for (std::size_t k = 0; k < x.rank(); ++k) {
    const bool listed = std::find(axes.begin(), axes.end(), static_cast<std::int64_t>(k)) != axes.end();
    if (axes.empty() ? x.shape[k] == 1 : listed) {
      if (x.shape[k] != 1) backend_error("cannot squeeze axis {} of size {}", k, x.shape[k]);
      continue;
    }
    shape.push_back(x.shape[k]);
  }
  return reshape_to(x, std::move(shape));
}

Tensor op_reshape(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  auto target = need(args, 1, node).to_int_vector();
  const bool allowzero = node.attr_int("allowzero", 0) != 0;
  std::int64_t infer = -1;
  std::size_t known = 1;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] == 0 && !allowzero) target[k] = x.shape.at(k);
    if (target[k] == -1) {
      if (infer >= 0) backend_error("Reshape with more than one -1");
      infer = static_cast<std::int64_t>(k);
    } else {
      known *= static_cast<std::size_t>(target[k]);
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0) backend_error("Reshape cannot infer dimension");
    target[static_cast<std::size_t>(infer)] = static_cast<std::int64_t>(x.numel() / known);
  }
  return reshape_to(x, std::move(target));
}

Tensor op_flatten(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const auto axis = normalize_axis(node.attr_int("axis", 1), x.rank() + 1);
  std::int64_t outer = 1;
  for (std::int64_t k = 0; k < axis; ++k) outer *= x.shape[k];
  return reshape_to(x, {outer, static_cast<std::int64_t>(x.numel()) / std::max<std::int64_t>(outer, 1)});
}

Tensor op_transpose(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  auto perm = node.attr_ints("perm");
  if (perm.empty()) {
    perm.resize(x.rank());
    std::iota(perm.rbegin(), perm.rend(), 0);
  }
  if (perm.size() != x.rank()) backend_error("Transpose perm has wrong length");
  Shape shape(x.rank());
  for (std::size_t k = 0; k < x.rank(); ++k) shape[k] = x.shape[static_cast<std::size_t>(perm[k])];
  const auto in_strides = strides_of(x.shape);
  std::vector<std::size_t> eff(x.rank());
  for (std::size_t k = 0; k < x.rank(); ++k) eff[k] = in_strides[static_cast<std::size_t>(perm[k])];
  const std::size_t n = x.numel();
  std::vector<std::size_t> src(n);
  std::vector<std::int64_t> counter(x.rank(), 0);
  std::size_t cur = 0;
  for (std::size_t lin = 0; lin < n; ++lin) {
    src[lin] = cur;
    for (std::size_t k = x.rank(); k-- > 0;) {
      if (++counter[k] < shape[k]) {
        cur += eff[k];
        break;
      }
      cur -= eff[k] * static_cast<std::size_t>(counter[k] - 1);
      counter[k] = 0;
    }
  }
  return gather_elements(x, std::move(shape), src);
}

Tensor op_concat(const Node& node, const Args& args) {
  std::vector<const Tensor*> parts;
  for (const auto* a : args) {
    if (a) parts.push_back(a);
  }
  if (parts.empty()) backend_error("Concat without inputs");
  const Tensor& first = *parts.front();
  const auto axis = static_cast<std::size_t>(normalize_axis(node.attr_int("axis", 0), first.rank()));
  Shape shape = first.shape;
  shape[axis] = 0;
  bool any_float = false;
  for (const auto* p : parts) {
    if (p->rank() != first.rank()) backend_error("Concat rank mismatch");
    for (std::size_t k = 0; k < first.rank(); ++k) {
      if (k != axis && p->shape[k] != first.shape[k]) backend_error("Concat shape mismatch on axis {}", k);
    }
    shape[axis] += p->shape[axis];
    any_float = any_float || p->is_float();
  }
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(shape[k]);
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < shape.size(); ++k) inner *= static_cast<std::size_t>(shape[k]);
  Tensor out = Tensor::zeros(any_float ? DType::f32 : first.dtype, shape);
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (const auto* p : parts) {
      const std::size_t chunk = static_cast<std::size_t>(p->shape[axis]) * inner;
      for (std::size_t k = 0; k < chunk; ++k) {
        const std::size_t src = o * chunk + k;
        if (out.is_float()) {
          out.f[pos++] = static_cast<float>(p->get(src));
        } else {
          out.i[pos++] = p->i[src];
        }
      }
    }
  }
  return out;
}

Tensor op_shape(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const auto r = static_cast<std::int64_t>(x.rank());
  std::int64_t start = node.attr_int("start", 0);
  std::int64_t end = node.attr_int("end", r);
  if (start < 0) start += r;
  if (end < 0) end += r;
  start = std::clamp<std::int64_t>(start, 0, r);
  end = std::clamp<std::int64_t>(end, 0, r);
  std::vector<std::int64_t> dims;
  for (std::int64_t k = start; k < end; ++k) dims.push_back(x.shape[static_cast<std::size_t>(k)]);
  return Tensor::ints({static_cast<std::int64_t>(dims.size())}, dims);
}

Tensor op_gather(const Node& node, const Args& args) {
  const Tensor& data = need(args, 0, node);
  const Tensor& indices = need(args, 1, node);
  const auto axis = static_cast<std::size_t>(normalize_axis(node.attr_int("axis", 0), data.rank()));
  const std::int64_t dim = data.shape[axis];
  Shape shape(data.shape.begin(), data.shape.begin() + static_cast<std::ptrdiff_t>(axis));
  shape.insert(shape.end(), indices.shape.begin(), indices.shape.end());
  shape.insert(shape.end(), data.shape.begin() + static_cast<std::ptrdiff_t>(axis) + 1, data.shape.end());
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(data.shape[k]);
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < data.rank(); ++k) inner *= static_cast<std::size_t>(data.shape[k]);
  const std::size_t nidx = indices.numel();
  std::vector<std::size_t> src;
  src.reserve(outer * nidx * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < nidx; ++j) {
      std::int64_t ix = indices.get_int(j);
      if (ix < 0) ix += dim;
      if (ix < 0 || ix >= dim) backend_error("Gather index {} out of range [0,{})", ix, dim);
      const std::size_t base = (o * static_cast<std::size_t>(dim) + static_cast<std::size_t>(ix)) * inner;
      for (std::size_t k = 0; k < inner; ++k) src.push_back(base + k);
    }
  }
  return gather_elements(data, std::move(shape), src);
}

Tensor op_slice(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  std::vector<std::int64_t> starts, ends, axes, steps;
  if (const Tensor* t = optional(args, 1)) {
    starts = t->to_int_vector();
    ends = need(args, 2, node).to_int_vector();
    if (const Tensor* a = optional(args, 3)) axes = a->to_int_vector();
    if (const Tensor* s = optional(args, 4)) steps = s->to_int_vector();
  } else {
    starts = node.attr_ints("starts");
    ends = node.attr_ints("ends");
    axes = node.attr_ints("axes");
  }
  if (axes.empty()) {
    axes.resize(starts.size());
    std::iota(axes.begin(), axes.end(), 0);
  }
  if (steps.empty()) steps.assign(starts.size(), 1);
  const std::size_t rank = x.rank();
  std::vector<std::int64_t> first(rank, 0), step(rank, 1);
  Shape shape = x.shape;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    const auto ax = static_cast<std::size_t>(normalize_axis(axes[k], rank));
    const std::int64_t dim = x.shape[ax];
    const std::int64_t st = steps[k];
    if (st == 0) backend_error("Slice step 0");
    std::int64_t s = starts[k];
    std::int64_t e = ends[k];
    if (s < 0) s += dim;
    if (e < 0) e += dim;
    if (st > 0) {
      s = std::clamp<std::int64_t>(s, 0, dim);
      e = std::clamp<std::int64_t>(e, 0, dim);
      shape[ax] = e > s ? (e - s + st - 1) / st : 0;
    } else {
      s = std::clamp<std::int64_t>(s, 0, dim - 1);
      e = std::clamp<std::int64_t>(e, -1, dim - 1);
      shape[ax] = s > e ? (s - e - st - 1) / (-st) : 0;
    }
    first[ax] = s;
    step[ax] = st;
  }
  const auto in_strides = strides_of(x.shape);
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> src(n);
  std::vector<std::int64_t> counter(rank, 0);
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < rank; ++k) {
      off += static_cast<std::size_t>(first[k] + counter[k] * step[k]) * in_strides[k];
    }
    src[lin] = off;
    for (std::size_t k = rank; k-- > 0;) {
      if (++counter[k] < shape[k]) break;
      counter[k] = 0;
    }
  }
  return gather_elements(x, std::move(shape), src);
}

Tensor op_constant_of_shape(const Node& node, const Args& args) {
  const auto shape = need(args, 0, node).to_int_vector();
  const auto* a = node.attr("value");
  if (a == nullptr) return Tensor::zeros(DType::f32, shape);
  Tensor out = Tensor::zeros(a->tensor.dtype, shape);
  if (out.is_float()) {
    std::fill(out.f.begin(), out.f.end(), a->tensor.f.at(0));
  } else {
    std::fill(out.i.begin(), out.i.end(), a->tensor.i.at(0));
  }
  return out;
}

Tensor op_expand(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const Shape shape = broadcast_shapes(x.shape, need(args, 1, node).to_int_vector());
  return gather_elements(x, shape, broadcast_index(x.shape, shape));
}

Tensor op_where(const Node& node, const Args& args) {
  const Tensor& cond = need(args, 0, node);
  const Tensor& a = need(args, 1, node);
  const Tensor& b = need(args, 2, node);
  const Shape shape = broadcast_shapes(broadcast_shapes(cond.shape, a.shape), b.shape);
  const auto ic = broadcast_index(cond.shape, shape);
  const auto ia = broadcast_index(a.shape, shape);
  const auto ib = broadcast_index(b.shape, shape);
  Tensor out = Tensor::zeros(a.is_float() || b.is_float() ? DType::f32 : a.dtype, shape);
  for (std::size_t k = 0; k < ic.size(); ++k) {
    const bool c = cond.get_int(ic[k]) != 0;
    if (out.is_float()) {
      out.f[k] = static_cast<float>(c ? a.get(ia[k]) : b.get(ib[k]));
    } else {
      out.i[k] = c ? a.i[ia[k]] : b.i[ib[k]];
    }
  }
  return out;
}

Tensor op_cast(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const auto to = node.attr_int("to", 1);
  const std::size_t n = x.numel();
  switch (to) {
    case 1:   // FLOAT
    case 10:  // FLOAT16, computed in float32
    case 11: {
      std::vector<float> v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<float>(x.get(k));
      return Tensor::floats(x.shape, std::move(v));
    }
    case 6:  // INT32
    case 7: {
      std::vector<std::int64_t> v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = x.get_int(k);
      return Tensor::ints(x.shape, std::move(v));
    }
    case 9: {
      std::vector<std::int64_t> v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = x.get(k) != 0.0 ? 1 : 0;
      return Tensor::bools(x.shape, std::move(v));
    }
    default:
      backend_error("Cast to data type {} is not supported", to);
  }
}

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

Tensor op_matmul(const Node& node, const Args& args) {
  Tensor a = need(args, 0, node);
  Tensor b = need(args, 1, node);
  if (!a.is_float() || !b.is_float()) backend_error("MatMul expects float inputs");
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if (a_vec) a.shape.insert(a.shape.begin(), 1);
  if (b_vec) b.shape.push_back(1);
  const std::int64_t m = a.shape[a.rank() - 2];
  const std::int64_t k = a.shape[a.rank() - 1];
  const std::int64_t n = b.shape[b.rank() - 1];
  if (b.shape[b.rank() - 2] != k) {
    backend_error("MatMul inner dimensions differ: {} vs {}", a.shape_string(), b.shape_string());
  }
  const Shape a_batch(a.shape.begin(), a.shape.end() - 2);
  const Shape b_batch(b.shape.begin(), b.shape.end() - 2);
  const Shape batch = broadcast_shapes(a_batch, b_batch);
  const auto ia = broadcast_index(a_batch, batch);
  const auto ib = broadcast_index(b_batch, batch);
  Shape shape = batch;
  shape.push_back(m);
  shape.push_back(n);
  std::vector<float> out(shape_numel(shape));
  const std::size_t a_step = static_cast<std::size_t>(m * k);
  const std::size_t b_step = static_cast<std::size_t>(k * n);
  const std::size_t o_step = static_cast<std::size_t>(m * n);
  for (std::size_t bi = 0; bi < ia.size(); ++bi) {
    ConstMap am(a.f.data() + ia[bi] * a_step, m, k);
    ConstMap bm(b.f.data() + ib[bi] * b_step, k, n);
    MutMap om(out.data() + bi * o_step, m, n);
    om.noalias() = am * bm;
  }
  if (a_vec) shape.erase(shape.end() - 2);
  if (b_vec) shape.pop_back();
  return Tensor::floats(std::move(shape), std::move(out));
}

Tensor op_gemm(const Node& node, const Args& args) {
  const Tensor& a = need(args, 0, node);
  const Tensor& b = need(args, 1, node);
  if (a.rank() != 2 || b.rank() != 2) backend_error("Gemm expects 2-D inputs");
  const float alpha = node.attr_float("alpha", 1.0f);
  const float beta = node.attr_float("beta", 1.0f);
  const bool ta = node.attr_int("transA", 0) != 0;
  const bool tb = node.attr_int("transB", 0) != 0;
  ConstMap am(a.f.data(), a.shape[0], a.shape[1]);
  ConstMap bm(b.f.data(), b.shape[0], b.shape[1]);
  RowMatrix prod;
  if (ta && tb) {
    prod = am.transpose() * bm.transpose();
  } else if (ta) {
    prod = am.transpose() * bm;
  } else if (tb) {
    prod = am * bm.transpose();
  } else {
    prod = am * bm;
  }
  prod *= alpha;
  Tensor out = Tensor::floats({prod.rows(), prod.cols()},
                              std::vector<float>(prod.data(), prod.data() + prod.size()));
  if (const Tensor* c = optional(args, 2)) {
    const auto ic = broadcast_index(c->shape, out.shape);
    for (std::size_t k = 0; k < ic.size(); ++k) out.f[k] += beta * static_cast<float>(c->get(ic[k]));
  }
  return out;
}

Tensor op_softmax(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const auto axis = static_cast<std::size_t>(normalize_axis(node.attr_int("axis", -1), x.rank()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(x.shape[k]);
  for (std::size_t k = axis + 1; k < x.rank(); ++k) inner *= static_cast<std::size_t>(x.shape[k]);
  const auto len = static_cast<std::size_t>(x.shape[axis]);
  Tensor out = x;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, x.f[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const float e = std::exp(x.f[base + j * inner] - mx);
        out.f[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) {
        out.f[base + j * inner] = static_cast<float>(out.f[base + j * inner] / total);
      }
    }
  }
  return out;
}

Tensor op_layer_norm(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const Tensor* scale = optional(args, 1);
  const Tensor* bias = optional(args, 2);
  const auto axis = static_cast<std::size_t>(normalize_axis(node.attr_int("axis", -1), x.rank()));
  const double eps = node.attr_float("epsilon", 1e-5f);
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(x.shape[k]);
  for (std::size_t k = axis; k < x.rank(); ++k) inner *= static_cast<std::size_t>(x.shape[k]);
  const Shape norm_shape(x.shape.begin() + static_cast<std::ptrdiff_t>(axis), x.shape.end());
  std::vector<std::size_t> is, ib;
  if (scale) is = broadcast_index(scale->shape, norm_shape);
  if (bias) ib = broadcast_index(bias->shape, norm_shape);
  Tensor out = x;
  for (std::size_t o = 0; o < outer; ++o) {
    const float* row = x.f.data() + o * inner;
    double mean = 0.0;
    for (std::size_t j = 0; j < inner; ++j) mean += row[j];
    mean /= static_cast<double>(inner);
    double var = 0.0;
    for (std::size_t j = 0; j < inner; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(inner);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < inner; ++j) {
      double v = (row[j] - mean) * inv;
      if (scale) v *= scale->f[is[j]];
      if (bias) v += bias->f[ib[j]];
      out.f[o * inner + j] = static_cast<float>(v);
    }
  }
  return out;
}

Tensor op_reduce_mean(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  std::vector<std::int64_t> axes = node.attr_ints("axes");
  if (const Tensor* a = optional(args, 1)) axes = a->to_int_vector();
  const bool keep = node.attr_int("keepdims", 1) != 0;
  if (axes.empty()) {
    axes.resize(x.rank());
    std::iota(axes.begin(), axes.end(), 0);
  }
  std::vector<bool> reduced(x.rank(), false);
  for (auto ax : axes) reduced[static_cast<std::size_t>(normalize_axis(ax, x.rank()))] = true;
  Shape keep_shape = x.shape;
  for (std::size_t k = 0; k < x.rank(); ++k) {
    if (reduced[k]) keep_shape[k] = 1;
  }
  const auto out_strides = strides_of(keep_shape);
  std::vector<double> acc(shape_numel(keep_shape), 0.0);
  std::vector<std::int64_t> counter(x.rank(), 0);
  const std::size_t n = x.numel();
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < x.rank(); ++k) {
      if (!reduced[k]) off += static_cast<std::size_t>(counter[k]) * out_strides[k];
    }
    acc[off] += x.get(lin);
    for (std::size_t k = x.rank(); k-- > 0;) {
      if (++counter[k] < x.shape[k]) break;
      counter[k] = 0;
    }
  }
  const double count = static_cast<double>(n) / static_cast<double>(std::max<std::size_t>(acc.size(), 1));
  std::vector<float> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / count);
  Shape shape;
  if (keep) {
    shape = keep_shape;
  } else {
    for (std::size_t k = 0; k < x.rank(); ++k) {
      if (!reduced[k]) shape.push_back(x.shape[k]);
    }
  }
  return Tensor::floats(std::move(shape), std::move(out));
}

Tensor op_conv(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const Tensor& w = need(args, 1, node);
  const Tensor* bias = optional(args, 2);
  if (x.rank() != 4 || w.rank() != 4) backend_error("only 2-D convolution is supported");
  if (const auto* ap = node.attr("auto_pad"); ap && ap->s != "NOTSET" && !ap->s.empty()) {
    backend_error("Conv auto_pad={} is not supported", ap->s);
  }
  const std::int64_t group = node.attr_int("group", 1);
  auto strides = node.attr_ints("strides");
  auto pads = node.attr_ints("pads");
  auto dil = node.attr_ints("dilations");
  if (strides.empty()) strides = {1, 1};
  if (pads.empty()) pads = {0, 0, 0, 0};
  if (dil.empty()) dil = {1, 1};
  const std::int64_t batch = x.shape[0], cin = x.shape[1], ih = x.shape[2], iw = x.shape[3];
  const std::int64_t cout = w.shape[0], cpg = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  if (cpg * group != cin) backend_error("Conv channel mismatch: {} vs {}x{}", cin, cpg, group);
  const std::int64_t oh = (ih + pads[0] + pads[2] - dil[0] * (kh - 1) - 1) / strides[0] + 1;
  const std::int64_t ow = (iw + pads[1] + pads[3] - dil[1] * (kw - 1) - 1) / strides[1] + 1;
  const std::int64_t opg = cout / group;
  std::vector<float> out(static_cast<std::size_t>(batch * cout * oh * ow));
  RowMatrix cols(cpg * kh * kw, oh * ow);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t g = 0; g < group; ++g) {
      for (std::int64_t c = 0; c < cpg; ++c) {
        const float* plane = x.f.data() + ((b * cin) + g * cpg + c) * ih * iw;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const std::int64_t row = (c * kh + ky) * kw + kx;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const std::int64_t y = oy * strides[0] - pads[0] + ky * dil[0];
              for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t xx = ox * strides[1] - pads[1] + kx * dil[1];
                cols(row, oy * ow + ox) =
                    (y >= 0 && y < ih && xx >= 0 && xx < iw) ? plane[y * iw + xx] : 0.0f;
              }
            }
          }
        }
      }
      ConstMap wm(w.f.data() + g * opg * cpg * kh * kw, opg, cpg * kh * kw);
      MutMap om(out.data() + ((b * cout) + g * opg) * oh * ow, opg, oh * ow);
      om.noalias() = wm * cols;
    }
    if (bias) {
      for (std::int64_t c = 0; c < cout; ++c) {
        float* plane = out.data() + (b * cout + c) * oh * ow;
        for (std::int64_t k = 0; k < oh * ow; ++k) plane[k] += bias->f[static_cast<std::size_t>(c)];
      }
    }
  }
  return Tensor::floats({batch, cout, oh, ow}, std::move(out));
}

std::vector<Tensor> op_split(const Node& node, const Args& args) {
  const Tensor& x = need(args, 0, node);
  const auto axis = static_cast<std::size_t>(normalize_axis(node.attr_int("axis", 0), x.rank()));
  std::vector<std::int64_t> sizes = node.attr_ints("split");
  if (const Tensor* s = optional(args, 1)) sizes = s->to_int_vector();
  if (sizes.empty()) {
    const std::int64_t parts = node.attr_int("num_outputs", static_cast<std::int64_t>(node.outputs.size()));
    const std::int64_t each = (x.shape[axis] + parts - 1) / parts;
    std::int64_t left = x.shape[axis];
    for (std::int64_t p = 0; p < parts; ++p) {
      sizes.push_back(std::min(each, left));
      left -= sizes.back();
    }
  }
  std::vector<Tensor> outs;
  std::int64_t start = 0;
  for (auto sz : sizes) {
    Node slice;
    slice.op_type = "Slice";
    Tensor st = Tensor::ints({1}, {start});
    Tensor en = Tensor::ints({1}, {start + sz});
    Tensor ax = Tensor::ints({1}, {static_cast<std::int64_t>(axis)});
    outs.push_back(op_slice(slice, {&x, &st, &en, &ax}));
    start += sz;
  }
  return outs;
}

float erf_f(float v) { return std::erf(v); }

using SingleOp = std::function<Tensor(const Node&, const Args&)>;

const std::unordered_map<std::string, SingleOp>& single_ops() {
  static const std::unordered_map<std::string, SingleOp> ops = {
      {"Constant", op_constant},
      {"Identity", [](const Node& n, const Args& a) { return need(a, 0, n); }},
      {"Unsqueeze", op_unsqueeze},
      {"Squeeze", op_squeeze},
      {"Reshape", op_reshape},
      {"Flatten", op_flatten},
      {"Transpose", op_transpose},
      {"Concat", op_concat},
      {"Shape", op_shape},
      {"Gather", op_gather},
      {"Slice", op_slice},
      {"ConstantOfShape", op_constant_of_shape},
      {"Expand", op_expand},
      {"Where", op_where},
      {"Cast", op_cast},
      {"MatMul", op_matmul},
      {"Gemm", op_gemm},
      {"Softmax", op_softmax},
      {"LayerNormalization", op_layer_norm},
      {"ReduceMean", op_reduce_mean},
      {"Conv", op_conv},
      {"Add",
       [](const Node& n, const Args& a) {
         return binary(need(a, 0, n), need(a, 1, n), std::plus<float>(), std::plus<std::int64_t>());
       }},
      {"Sub",
       [](const Node& n, const Args& a) {
         return binary(need(a, 0, n), need(a, 1, n), std::minus<float>(), std::minus<std::int64_t>());
       }},
      {"Mul",
       [](const Node& n, const Args& a) {
         return binary(need(a, 0, n), need(a, 1, n), std::multiplies<float>(),
                       std::multiplies<std::int64_t>());
       }},
      {"Div",
       [](const Node& n, const Args& a) {
         return binary(need(a, 0, n), need(a, 1, n), std::divides<float>(),
                       [](std::int64_t p, std::int64_t q) {
                         if (q == 0) backend_error("integer division by zero");
                         return p / q;
                       });
       }},
      {"Pow",
       [](const Node& n, const Args& a) {
         return binary(need(a, 0, n), need(a, 1, n), [](float p, float q) { return std::pow(p, q); },
                       [](std::int64_t p, std::int64_t q) {
                         return static_cast<std::int64_t>(std::pow(static_cast<double>(p), static_cast<double>(q)));
                       });
       }},
      {"Equal",
       [](const Node& n, const Args& a) {
         return compare(need(a, 0, n), need(a, 1, n), [](double p, double q) { return p == q; });
       }},
      {"Less",
       [](const Node& n, const Args& a) {
         return compare(need(a, 0, n), need(a, 1, n), [](double p, double q) { return p < q; });
       }},
      {"Greater",
       [](const Node& n, const Args& a) {
         return compare(need(a, 0, n), need(a, 1, n), [](double p, double q) { return p > q; });
       }},
      {"Sqrt", [](const Node& n, const Args& a) { return unary_float(need(a, 0, n), [](float v) { return std::sqrt(v); }); }},
      {"Erf", [](const Node& n, const Args& a) { return unary_float(need(a, 0, n), erf_f); }},
      {"Tanh", [](const Node& n, const Args& a) { return unary_float(need(a, 0, n), [](float v) { return std::tanh(v); }); }},
      {"Exp", [](const Node& n, const Args& a) { return unary_float(need(a, 0, n), [](float v) { return std::exp(v); }); }},
      {"Neg", [](const Node& n, const Args& a) { return unary_float(need(a, 0, n), [](float v) { return -v; }); }},
      {"Relu", [](const Node& n, const Args& a) { return unary_float(need(a, 0, n), [](float v) { return std::max(v, 0.0f); }); }},
      {"Sigmoid",
       [](const Node& n, const Args& a) {
         return unary_float(need(a, 0, n), [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
       }},
      {"Gelu",
       [](const Node& n, const Args& a) {
         const auto* approx = n.attr("approximate");
         if (approx && approx->s == "tanh") {
           return unary_float(need(a, 0, n), [](float v) {
             return 0.5f * v * (1.0f + std::tanh(0.7978845608f * (v + 0.044715f * v * v * v)));
           });
         }
         return unary_float(need(a, 0, n), [](float v) { return 0.5f * v * (1.0f + std::erf(v * 0.70710678f)); });
       }},
  };
  return ops;
}

}  // namespace

bool is_supported_op(const std::string& op_type) {
  return op_type == "Split" || single_ops().contains(op_type);
}

std::vector<Tensor> execute_node(const Node& node, const std::vector<const Tensor*>& inputs) {
  if (node.op_type == "Split") return op_split(node, inputs);
  auto it = single_ops().find(node.op_type);
  if (it == single_ops().end()) backend_error("unsupported operator {}", node.op_type);
  std::vector<Tensor> out;
  out.push_back(it->second(node, inputs));
  return out;
}

}  // namespace cfx::embed
