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

#ifndef PATHLENS_MODEL_H_
#define PATHLENS_MODEL_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pathlens/tensor.h"

namespace pathlens {

enum class LayerKind {
  kInput,
  kConv,
  kRelu,
  kMaxPool,
  kAvgPool,
  kGlobalAvgPool,
  kDense,
  kAdd,
  kSoftmax,
};

std::string_view LayerKindName(LayerKind kind);
LayerKind ParseLayerKind(std::string_view name);

// Declared model envelope. Models outside it are rejected at construction.
inline constexpr int kMaxNodes = 128;
inline constexpr int kMaxChannels = 64;
inline constexpr int kMaxSpatial = 64;

struct LayerNode {
  std::string id;
  LayerKind kind = LayerKind::kInput;
  Shape shape;              // output shape; channels == |F^i|
  std::vector<int> inputs;  // producer node indices
  int kernel = 0;           // conv / pooling window
  int stride = 1;
  int padding = 0;          // conv only
  // conv: [out][in][kernel][kernel]; dense: [out][in_features]
  std::vector<double> weights;
  std::vector<double> bias;

  int channel_count() const { return shape.channels; }
  std::size_t ExpectedWeightCount(const Shape& input) const;
};

struct HierarchyNode {
  std::string name;
  int parent = -1;
  std::vector<int> children;
  int layer = -1;  // node index in the graph for leaves, -1 for groups
};

// Tree of named groups whose leaves are the layers of a model. Node 0 is the
// root. Sibling names are unique, so "/"-joined paths identify nodes.
class Hierarchy {
 public:
  Hierarchy();

  static constexpr int kRoot = 0;

  int AddGroup(int parent, std::string name);
  int AddLeaf(int parent, int layer, std::string name);

  std::size_t size() const { return nodes_.size(); }
  const HierarchyNode& node(int index) const { return nodes_.at(index); }
  bool IsLeaf(int index) const { return nodes_.at(index).layer >= 0; }

  std::string Path(int index) const;
  int Find(std::string_view path) const;  // -1 when absent
  int ChildNamed(int parent, std::string_view name) const;
  int LeafOfLayer(int layer) const;       // -1 when absent

  std::vector<int> Preorder() const;
  // Layers under `index` in preorder.
  std::vector<int> LayersUnder(int index) const;
  int Depth(int index) const;
  int LowestCommonAncestor(int a, int b) const;
  bool IsAncestorOrSelf(int ancestor, int index) const;

 private:
  std::vector<HierarchyNode> nodes_;
};

// DAG of layers in topological order plus the group hierarchy. Construction
// validates every structural invariant; a constructed graph is treated as
// immutable by the analysis code and may be shared across threads.
class ModelGraph {
 public:
  ModelGraph() = default;
  ModelGraph(std::vector<LayerNode> nodes, Hierarchy hierarchy);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<LayerNode>& nodes() const { return nodes_; }
  const LayerNode& node(int index) const { return nodes_.at(index); }
  // Weight updates during fixture training; shapes must not change.
  LayerNode& mutable_node(int index) { return nodes_.at(index); }
  const Hierarchy& hierarchy() const { return hierarchy_; }

  int IndexOf(std::string_view id) const;  // -1 when absent
  int IndexOrThrow(std::string_view id) const;  // throws kNotFound

  int input_node() const { return input_; }
  int output_node() const { return output_; }
  const Shape& input_shape() const { return nodes_[input_].shape; }
  int num_classes() const { return nodes_[output_].shape.channels; }
  const std::vector<int>& consumers(int index) const { return consumers_.at(index); }

  // Post-activation outputs: every relu and residual add, in topological order.
  std::vector<int> DefaultCandidateLayers() const;
  std::size_t ParameterCount() const;

 private:
  void Validate();

  std::vector<LayerNode> nodes_;
  Hierarchy hierarchy_;
  std::vector<std::vector<int>> consumers_;
  int input_ = -1;
  int output_ = -1;
};

// Appends layers in topological order and derives their output shapes.
// Layers land in the group named by the last Group() call ("" is the root).
class ModelBuilder {
 public:
  ModelBuilder& Group(std::string path);

  ModelBuilder& Input(std::string id, Shape shape);
  ModelBuilder& Conv(std::string id, std::string_view input, int out_channels,
                     int kernel, int stride = 1, int padding = 0);
  ModelBuilder& Relu(std::string id, std::string_view input);
  ModelBuilder& MaxPool(std::string id, std::string_view input, int kernel, int stride);
  ModelBuilder& AvgPool(std::string id, std::string_view input, int kernel, int stride);
  ModelBuilder& GlobalAvgPool(std::string id, std::string_view input);
  ModelBuilder& Dense(std::string id, std::string_view input, int out_features);
  ModelBuilder& Add(std::string id, std::string_view lhs, std::string_view rhs);
  ModelBuilder& Softmax(std::string id, std::string_view input);

  ModelGraph Build() &&;

 private:
  int Append(LayerNode node, std::vector<std::string_view> inputs);
  const LayerNode& Producer(std::string_view id) const;

  std::vector<LayerNode> nodes_;
  Hierarchy hierarchy_;
  std::string group_;
};

// Spatial output size of a window operation.
int WindowOutputSize(int input, int kernel, int stride, int padding);

struct Example {
  Tensor pixels;  // C x H x W, values in [0,1]
  int label = 0;
  std::string group_tag;
};

struct ExampleSet {
  std::string name;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

// Throws kShapeMismatch naming the input layer when the example does not fit.
void CheckExample(const ModelGraph& model, const Example& example);

}  // namespace pathlens

#endif  // PATHLENS_MODEL_H_
