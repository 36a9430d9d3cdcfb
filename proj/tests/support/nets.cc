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

#include "nets.h"

#include <algorithm>
#include <cmath>

namespace pathlens::testing {

void RandomizeWeights(ModelGraph& model, std::uint64_t seed, double scale, double bias) {
  Random rng(seed);
  for (std::size_t i = 0; i < model.size(); ++i) {
    LayerNode& node = model.mutable_node(static_cast<int>(i));
    if (node.weights.empty()) continue;
    const double fan_in =
        static_cast<double>(node.weights.size()) / static_cast<double>(node.shape.channels);
    const double stddev = scale * std::sqrt(2.0 / fan_in);
    for (double& w : node.weights) w = stddev * rng.Normal();
    for (double& b : node.bias) b = rng.Uniform(-bias, bias);
  }
}

Example RandomExample(const ModelGraph& model, Random& rng, int label) {
  Example ex;
  ex.pixels = Tensor(model.input_shape());
  for (double& v : ex.pixels.data()) v = rng.Uniform(0.05, 0.95);
  ex.label = label;
  ex.group_tag = "normal";
  return ex;
}

ExampleSet RandomExamples(const ModelGraph& model, int count, std::uint64_t seed, int label) {
  Random rng(seed);
  ExampleSet set;
  set.name = "random";
  for (int i = 0; i < count; ++i) set.examples.push_back(RandomExample(model, rng, label));
  return set;
}

ModelGraph ResidualNet(std::uint64_t seed) {
  ModelBuilder b;
  b.Input("input", {2, 8, 8});
  b.Group("stem").Conv("stem.conv", "input", 4, 3, 1, 1).Relu("stem.relu", "stem.conv");
  b.Group("block")
      .Conv("block.conv1", "stem.relu", 4, 3, 1, 1)
      .Relu("block.relu1", "block.conv1")
      .Conv("block.conv2", "block.relu1", 4, 3, 1, 1)
      .Add("block.add", "block.conv2", "stem.relu")
      .Relu("block.relu2", "block.add");
  b.Group("tail")
      .MaxPool("tail.maxpool", "block.relu2", 2, 2)
      .Conv("tail.conv", "tail.maxpool", 6, 3, 1, 1)
      .Relu("tail.relu", "tail.conv")
      .AvgPool("tail.avgpool", "tail.relu", 2, 2)
      .GlobalAvgPool("tail.gap", "tail.avgpool")
      .Dense("tail.dense", "tail.gap", 3)
      .Softmax("tail.softmax", "tail.dense");
  ModelGraph model = std::move(b).Build();
  RandomizeWeights(model, seed);
  return model;
}

ModelGraph DenseHeadNet(std::uint64_t seed) {
  ModelBuilder b;
  b.Input("input", {1, 7, 7});
  b.Conv("conv", "input", 3, 3, 2, 0)
      .Relu("relu", "conv")
      .Dense("fc1", "relu", 5)
      .Relu("fc1.relu", "fc1")
      .Dense("fc2", "fc1.relu", 3)
      .Softmax("softmax", "fc2");
  ModelGraph model = std::move(b).Build();
  RandomizeWeights(model, seed);
  return model;
}

ModelGraph ProbeNet(std::uint64_t seed, int n) {
  ModelBuilder b;
  b.Input("input", {1, 8, 8});
  b.Group("probe").Conv("probe.conv", "input", n, 3, 1, 1).Relu("probe.relu", "probe.conv");
  b.Group("head")
      .Conv("head.conv", "probe.relu", 4, 3, 1, 1)
      .Relu("head.relu", "head.conv")
      .GlobalAvgPool("head.gap", "head.relu")
      .Dense("head.dense", "head.gap", 2)
      .Softmax("head.softmax", "head.dense");
  ModelGraph model = std::move(b).Build();
  RandomizeWeights(model, seed, 1.0, 0.2);
  return model;
}

ModelGraph TinyNet(std::uint64_t seed) {
  ModelBuilder b;
  b.Input("input", {1, 4, 4});
  b.Conv("conv", "input", 2, 3).Relu("relu", "conv").Dense("dense", "relu", 2).Softmax(
      "softmax", "dense");
  ModelGraph model = std::move(b).Build();
  RandomizeWeights(model, seed);
  return model;
}

ModelGraph DistractorNet(std::uint64_t seed) {
  ModelBuilder b;
  b.Input("input", {1, 8, 8});
  b.Group("feat").Conv("feat.conv", "input", 3, 3, 1, 1).Relu("feat.relu", "feat.conv");
  b.Group("head")
      .GlobalAvgPool("head.gap", "feat.relu")
      .Dense("head.dense", "head.gap", 2)
      .Softmax("head.softmax", "head.dense");
  ModelGraph model = std::move(b).Build();
  Random rng(seed);
  auto jitter = [&] { return 1.0 + rng.Uniform(-0.1, 0.1); };
  LayerNode& conv = model.mutable_node(model.IndexOrThrow("feat.conv"));
  // [out][in][3][3]
  for (int k = 0; k < 9; ++k) {
    conv.weights[0 * 9 + k] = 0.5 * jitter();   // loud distractor
    conv.weights[1 * 9 + k] = 0.12 * jitter();  // class driver
    conv.weights[2 * 9 + k] = 0.02 * jitter();  // weak third map
  }
  conv.bias = {1.0 * jitter(), 0.0, 0.0};
  LayerNode& dense = model.mutable_node(model.IndexOrThrow("head.dense"));
  // [out][in]: class 0 is a constant, class 1 reads map 1 (and a little of map 2).
  dense.weights = {0.0, 0.0, 0.0, 0.0, 2.5 * jitter(), 0.3 * jitter()};
  dense.bias = {0.0, 0.0};
  return model;
}

ExampleSet DistractorExamples(std::uint64_t seed, int count) {
  Random rng(seed);
  ExampleSet set;
  set.name = "distractor";
  for (int i = 0; i < count; ++i) {
    Example ex;
    ex.pixels = Tensor({1, 8, 8});
    for (double& v : ex.pixels.data()) v = rng.Uniform(0.4, 1.0);
    ex.label = 1;
    set.examples.push_back(std::move(ex));
  }
  return set;
}

ModelGraph EdgeNet() {
  ModelBuilder b;
  b.Input("input", {1, 16, 16});
  b.Group("edge").Conv("edge.conv", "input", 1, 3, 1, 1).Relu("edge.relu", "edge.conv");
  b.Group("head")
      .GlobalAvgPool("head.gap", "edge.relu")
      .Dense("head.dense", "head.gap", 2)
      .Softmax("head.softmax", "head.dense");
  ModelGraph model = std::move(b).Build();
  LayerNode& conv = model.mutable_node(model.IndexOrThrow("edge.conv"));
  conv.weights = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
  conv.bias = {0.0};
  LayerNode& dense = model.mutable_node(model.IndexOrThrow("head.dense"));
  dense.weights = {-1.0, 1.0};
  dense.bias = {0.0, 0.0};
  return model;
}

}  // namespace pathlens::testing
