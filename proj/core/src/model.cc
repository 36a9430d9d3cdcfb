// Copyright 2026 The pathlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pathlens/model.h"

#include <algorithm>
#include <set>
#include <unordered_set>
#include <utility>

#include "pathlens/error.h"

namespace pathlens {

std::string_view LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return "input";
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "pool-max";
    case LayerKind::kAvgPool: return "pool-avg";
    case LayerKind::kGlobalAvgPool: return "global-avg-pool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kAdd: return "add";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

LayerKind ParseLayerKind(std::string_view name) {
  for (LayerKind kind : {LayerKind::kInput, LayerKind::kConv, LayerKind::kRelu,
                         LayerKind::kMaxPool, LayerKind::kAvgPool,
                         LayerKind::kGlobalAvgPool, LayerKind::kDense, LayerKind::kAdd,
                         LayerKind::kSoftmax}) {
    if (LayerKindName(kind) == name) return kind;
  }
  Fail(ErrorCode::kFormat, "unknown layer kind '" + std::string(name) + "'");
}

int WindowOutputSize(int input, int kernel, int stride, int padding) {
  if (kernel <= 0 || stride <= 0) return 0;
  const int span = input + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

std::size_t LayerNode::ExpectedWeightCount(const Shape& input) const {
  switch (kind) {
    case LayerKind::kConv:
      return static_cast<std::size_t>(shape.channels) * input.channels * kernel * kernel;
    case LayerKind::kDense:
      return static_cast<std::size_t>(shape.channels) * input.size();
    default:
      return 0;
  }
}

// ---------------------------------------------------------------------------
// Hierarchy

Hierarchy::Hierarchy() { nodes_.push_back(HierarchyNode{"root", -1, {}, -1}); }

int Hierarchy::AddGroup(int parent, std::string name) {
  Require(parent >= 0 && parent < static_cast<int>(nodes_.size()) && !IsLeaf(parent),
          ErrorCode::kInvariantViolation, "group parent must be an existing group", name);
  Require(!name.empty() && name.find('/') == std::string::npos,
          ErrorCode::kInvariantViolation, "hierarchy names must be non-empty and contain no '/'",
          name);
  Require(ChildNamed(parent, name) < 0, ErrorCode::kInvariantViolation,
          "duplicate hierarchy path", Path(parent) + "/" + name);
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(HierarchyNode{std::move(name), parent, {}, -1});
  nodes_[parent].children.push_back(index);
  return index;
}

int Hierarchy::AddLeaf(int parent, int layer, std::string name) {
  Require(layer >= 0, ErrorCode::kInvariantViolation, "leaf must reference a layer", name);
  const int index = AddGroup(parent, std::move(name));
  nodes_[index].layer = layer;
  return index;
}

std::string Hierarchy::Path(int index) const {
  std::vector<const std::string*> parts;
  for (int i = index; i >= 0; i = nodes_.at(i).parent) parts.push_back(&nodes_[i].name);
  std::string out;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (!out.empty()) out += '/';
    out += **it;
  }
  return out;
}

int Hierarchy::ChildNamed(int parent, std::string_view name) const {
  for (int child : nodes_.at(parent).children) {
    if (nodes_[child].name == name) return child;
  }
  return -1;
}

int Hierarchy::Find(std::string_view path) const {
  std::size_t start = 0;
  std::size_t slash = path.find('/');
  if (path.substr(0, slash) != nodes_[kRoot].name) return -1;
  int current = kRoot;
  while (slash != std::string_view::npos) {
    start = slash + 1;
    slash = path.find('/', start);
    const auto part = path.substr(start, slash == std::string_view::npos ? slash : slash - start);
    current = ChildNamed(current, part);
    if (current < 0) return -1;
  }
  return current;
}

int Hierarchy::LeafOfLayer(int layer) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].layer == layer) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Hierarchy::Preorder() const {
  std::vector<int> order;
  std::vector<int> stack{kRoot};
  while (!stack.empty()) {
    const int top = stack.back();
    stack.pop_back();
    order.push_back(top);
    const auto& children = nodes_[top].children;
    for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

std::vector<int> Hierarchy::LayersUnder(int index) const {
  std::vector<int> layers;
  std::vector<int> stack{index};
  while (!stack.empty()) {
    const int top = stack.back();
    stack.pop_back();
    if (nodes_[top].layer >= 0) layers.push_back(nodes_[top].layer);
    const auto& children = nodes_[top].children;
    for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(*it);
  }
  return layers;
}

int Hierarchy::Depth(int index) const {
  int depth = 0;
  for (int i = nodes_.at(index).parent; i >= 0; i = nodes_[i].parent) ++depth;
  return depth;
}

int Hierarchy::LowestCommonAncestor(int a, int b) const {
  int da = Depth(a);
  int db = Depth(b);
  while (da > db) { a = nodes_[a].parent; --da; }
  while (db > da) { b = nodes_[b].parent; --db; }
  while (a != b) {
    a = nodes_[a].parent;
    b = nodes_[b].parent;
  }
  return a;
}

bool Hierarchy::IsAncestorOrSelf(int ancestor, int index) const {
  for (int i = index; i >= 0; i = nodes_.at(i).parent) {
    if (i == ancestor) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// ModelGraph

namespace {

Shape DeriveShape(const LayerNode& node, const std::vector<LayerNode>& nodes) {
  const auto in = [&](int k) -> const Shape& { return nodes[node.inputs[k]].shape; };
  switch (node.kind) {
    case LayerKind::kInput:
      return node.shape;
    case LayerKind::kConv:
      return Shape{node.shape.channels,
                   WindowOutputSize(in(0).height, node.kernel, node.stride, node.padding),
                   WindowOutputSize(in(0).width, node.kernel, node.stride, node.padding)};
    case LayerKind::kRelu:
      return in(0);
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      return Shape{in(0).channels, WindowOutputSize(in(0).height, node.kernel, node.stride, 0),
                   WindowOutputSize(in(0).width, node.kernel, node.stride, 0)};
    case LayerKind::kGlobalAvgPool:
      return Shape{in(0).channels, 1, 1};
    case LayerKind::kDense:
      return Shape{node.shape.channels, 1, 1};
    case LayerKind::kAdd:
      return in(0);
    case LayerKind::kSoftmax:
      return in(0);
  }
  return {};
}

std::size_t ExpectedArity(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return 0;
    case LayerKind::kAdd: return 2;
    default: return 1;
  }
}

}  // namespace

ModelGraph::ModelGraph(std::vector<LayerNode> nodes, Hierarchy hierarchy)
    : nodes_(std::move(nodes)), hierarchy_(std::move(hierarchy)) {
  Validate();
}

void ModelGraph::Validate() {
  const int count = static_cast<int>(nodes_.size());
  Require(count > 0, ErrorCode::kInvariantViolation, "model has no layers");
  Require(count <= kMaxNodes, ErrorCode::kInvariantViolation,
          "model exceeds the supported envelope of " + std::to_string(kMaxNodes) + " layers");

  std::unordered_set<std::string> ids;
  consumers_.assign(count, {});
  input_ = -1;
  output_ = -1;
  for (int i = 0; i < count; ++i) {
    const LayerNode& node = nodes_[i];
    Require(!node.id.empty(), ErrorCode::kInvariantViolation, "layer id must be non-empty");
    Require(ids.insert(node.id).second, ErrorCode::kInvariantViolation, "duplicate layer id",
            node.id);
    Require(node.inputs.size() == ExpectedArity(node.kind), ErrorCode::kInvariantViolation,
            std::string(LayerKindName(node.kind)) + " layer has wrong number of inbound edges",
            node.id);
    for (int producer : node.inputs) {
      Require(producer >= 0 && producer < i, ErrorCode::kInvariantViolation,
              "edges must go from an earlier layer (graph must be acyclic)", node.id);
      consumers_[producer].push_back(i);
    }
    if (node.kind == LayerKind::kInput) {
      Require(input_ < 0, ErrorCode::kInvariantViolation, "model has more than one input node",
              node.id);
      input_ = i;
    }
    if (node.kind == LayerKind::kSoftmax) {
      Require(output_ < 0, ErrorCode::kInvariantViolation,
              "model has more than one softmax output node", node.id);
      output_ = i;
    }
    if (node.kind == LayerKind::kAdd) {
      Require(nodes_[node.inputs[0]].shape == nodes_[node.inputs[1]].shape,
              ErrorCode::kShapeMismatch, "add inputs have different shapes", node.id);
    }
    if (node.kind == LayerKind::kConv || node.kind == LayerKind::kMaxPool ||
        node.kind == LayerKind::kAvgPool) {
      Require(node.kernel >= 1 && node.stride >= 1 && node.padding >= 0,
              ErrorCode::kInvariantViolation, "invalid window parameters", node.id);
    }
    if (node.kind == LayerKind::kSoftmax) {
      const Shape& in = nodes_[node.inputs[0]].shape;
      Require(in.height == 1 && in.width == 1, ErrorCode::kShapeMismatch,
              "softmax expects a 1x1 spatial input", node.id);
    }

    const Shape derived = DeriveShape(node, nodes_);
    Require(derived.channels >= 1 && derived.height >= 1 && derived.width >= 1,
            ErrorCode::kShapeMismatch, "layer produces an empty output", node.id);
    Require(derived == node.shape, ErrorCode::kShapeMismatch,
            "declared shape " + ToString(node.shape) + " differs from derived shape " +
                ToString(derived),
            node.id);
    Require(node.shape.channels <= kMaxChannels && node.shape.height <= kMaxSpatial &&
                node.shape.width <= kMaxSpatial,
            ErrorCode::kInvariantViolation, "layer exceeds the supported model envelope",
            node.id);

    if (node.kind == LayerKind::kConv || node.kind == LayerKind::kDense) {
      const Shape& in = nodes_[node.inputs[0]].shape;
      Require(node.weights.size() == node.ExpectedWeightCount(in), ErrorCode::kShapeMismatch,
              "weight count " + std::to_string(node.weights.size()) + " inconsistent with " +
                  std::to_string(in.channels) + " input and " +
                  std::to_string(node.shape.channels) + " output channels",
              node.id);
      Require(node.bias.size() == static_cast<std::size_t>(node.shape.channels),
              ErrorCode::kShapeMismatch, "bias length differs from output channel count",
              node.id);
    } else {
      Require(node.weights.empty() && node.bias.empty(), ErrorCode::kInvariantViolation,
              "only conv and dense layers carry weights", node.id);
    }
  }
  Require(input_ >= 0, ErrorCode::kInvariantViolation, "model has no input node");
  Require(output_ >= 0, ErrorCode::kInvariantViolation, "model has no softmax output node");
  Require(consumers_[output_].empty(), ErrorCode::kInvariantViolation,
          "softmax output must be a sink", nodes_[output_].id);

  // Hierarchy: one leaf per layer, unique sibling names.
  std::vector<int> leaf_count(count, 0);
  for (std::size_t h = 0; h < hierarchy_.size(); ++h) {
    const HierarchyNode& hn = hierarchy_.node(static_cast<int>(h));
    std::set<std::string> names;
    for (int child : hn.children) {
      Require(names.insert(hierarchy_.node(child).name).second, ErrorCode::kInvariantViolation,
              "duplicate hierarchy path", hierarchy_.Path(child));
    }
    if (hn.layer >= 0) {
      Require(hn.layer < count, ErrorCode::kInvariantViolation,
              "hierarchy leaf references unknown layer", hierarchy_.Path(static_cast<int>(h)));
      Require(hn.children.empty(), ErrorCode::kInvariantViolation,
              "hierarchy leaf has children", hierarchy_.Path(static_cast<int>(h)));
      ++leaf_count[hn.layer];
    }
  }
  for (int i = 0; i < count; ++i) {
    Require(leaf_count[i] == 1, ErrorCode::kInvariantViolation,
            "layer must belong to exactly one hierarchy leaf", nodes_[i].id);
  }
}

int ModelGraph::IndexOf(std::string_view id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int ModelGraph::IndexOrThrow(std::string_view id) const {
  const int index = IndexOf(id);
  if (index < 0) Fail(ErrorCode::kNotFound, "unknown layer", std::string(id));
  return index;
}

std::vector<int> ModelGraph::DefaultCandidateLayers() const {
  std::vector<int> layers;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == LayerKind::kRelu || nodes_[i].kind == LayerKind::kAdd) {
      layers.push_back(static_cast<int>(i));
    }
  }
  return layers;
}

std::size_t ModelGraph::ParameterCount() const {
  std::size_t total = 0;
  for (const auto& node : nodes_) total += node.weights.size() + node.bias.size();
  return total;
}

// ---------------------------------------------------------------------------
// ModelBuilder

ModelBuilder& ModelBuilder::Group(std::string path) {
  group_ = std::move(path);
  return *this;
}

const LayerNode& ModelBuilder::Producer(std::string_view id) const {
  for (const auto& node : nodes_) {
    if (node.id == id) return node;
  }
  Fail(ErrorCode::kNotFound, "unknown producer layer", std::string(id));
}

int ModelBuilder::Append(LayerNode node, std::vector<std::string_view> inputs) {
  for (auto input : inputs) {
    (void)Producer(input);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].id == input) node.inputs.push_back(static_cast<int>(i));
    }
  }
  const int index = static_cast<int>(nodes_.size());
  int parent = Hierarchy::kRoot;
  std::size_t start = 0;
  while (start < group_.size()) {
    std::size_t slash = group_.find('/', start);
    if (slash == std::string::npos) slash = group_.size();
    const std::string part = group_.substr(start, slash - start);
    const int existing = hierarchy_.ChildNamed(parent, part);
    parent = existing >= 0 ? existing : hierarchy_.AddGroup(parent, part);
    start = slash + 1;
  }
  hierarchy_.AddLeaf(parent, index, node.id);
  nodes_.push_back(std::move(node));
  return index;
}

ModelBuilder& ModelBuilder::Input(std::string id, Shape shape) {
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kInput;
  node.shape = shape;
  Append(std::move(node), {});
  return *this;
}

ModelBuilder& ModelBuilder::Conv(std::string id, std::string_view input, int out_channels,
                                 int kernel, int stride, int padding) {
  const Shape in = Producer(input).shape;
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kConv;
  node.kernel = kernel;
  node.stride = stride;
  node.padding = padding;
  node.shape = Shape{out_channels, WindowOutputSize(in.height, kernel, stride, padding),
                     WindowOutputSize(in.width, kernel, stride, padding)};
  node.weights.assign(node.ExpectedWeightCount(in), 0.0);
  node.bias.assign(out_channels, 0.0);
  Append(std::move(node), {input});
  return *this;
}

ModelBuilder& ModelBuilder::Relu(std::string id, std::string_view input) {
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kRelu;
  node.shape = Producer(input).shape;
  Append(std::move(node), {input});
  return *this;
}

ModelBuilder& ModelBuilder::MaxPool(std::string id, std::string_view input, int kernel,
                                    int stride) {
  const Shape in = Producer(input).shape;
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kMaxPool;
  node.kernel = kernel;
  node.stride = stride;
  node.shape = Shape{in.channels, WindowOutputSize(in.height, kernel, stride, 0),
                     WindowOutputSize(in.width, kernel, stride, 0)};
  Append(std::move(node), {input});
  return *this;
}

ModelBuilder& ModelBuilder::AvgPool(std::string id, std::string_view input, int kernel,
                                    int stride) {
  MaxPool(std::move(id), input, kernel, stride);
  nodes_.back().kind = LayerKind::kAvgPool;
  return *this;
}

ModelBuilder& ModelBuilder::GlobalAvgPool(std::string id, std::string_view input) {
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kGlobalAvgPool;
  node.shape = Shape{Producer(input).shape.channels, 1, 1};
  Append(std::move(node), {input});
  return *this;
}

ModelBuilder& ModelBuilder::Dense(std::string id, std::string_view input, int out_features) {
  const Shape in = Producer(input).shape;
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kDense;
  node.shape = Shape{out_features, 1, 1};
  node.weights.assign(node.ExpectedWeightCount(in), 0.0);
  node.bias.assign(out_features, 0.0);
  Append(std::move(node), {input});
  return *this;
}

ModelBuilder& ModelBuilder::Add(std::string id, std::string_view lhs, std::string_view rhs) {
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kAdd;
  node.shape = Producer(lhs).shape;
  Append(std::move(node), {lhs, rhs});
  return *this;
}

ModelBuilder& ModelBuilder::Softmax(std::string id, std::string_view input) {
  LayerNode node;
  node.id = std::move(id);
  node.kind = LayerKind::kSoftmax;
  node.shape = Producer(input).shape;
  Append(std::move(node), {input});
  return *this;
}

ModelGraph ModelBuilder::Build() && {
  return ModelGraph(std::move(nodes_), std::move(hierarchy_));
}

void CheckExample(const ModelGraph& model, const Example& example) {
  const Shape& expected = model.input_shape();
  Require(example.pixels.shape() == expected, ErrorCode::kShapeMismatch,
          "example shape " + ToString(example.pixels.shape()) + " does not match model input " +
              ToString(expected),
          model.node(model.input_node()).id);
}

}  // namespace pathlens
