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

#include "pathlens/fixture.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.h"
#include "pathlens/engine.h"
#include "pathlens/error.h"
#include "random.h"

namespace pathlens {

namespace {

void DrawSquare(Tensor& img, int cy, int cx, int half, double intensity) {
  for (int d = -half; d <= half; ++d) {
    for (auto [y, x] : {std::pair{cy - half, cx + d}, std::pair{cy + half, cx + d},
                        std::pair{cy + d, cx - half}, std::pair{cy + d, cx + half}}) {
      if (y >= 0 && y < img.shape().height && x >= 0 && x < img.shape().width) {
        img.at(0, y, x) = std::max(img.at(0, y, x), intensity);
      }
    }
  }
}

void DrawPlus(Tensor& img, int cy, int cx, int half, double intensity) {
  for (int d = -half; d <= half; ++d) {
    for (auto [y, x] : {std::pair{cy, cx + d}, std::pair{cy + d, cx}}) {
      if (y >= 0 && y < img.shape().height && x >= 0 && x < img.shape().width) {
        img.at(0, y, x) = std::max(img.at(0, y, x), intensity);
      }
    }
  }
}

}  // namespace

ExampleSet MotifDataset(int count, std::uint64_t seed, std::string name) {
  Require(count >= 0, ErrorCode::kInvalidArgument, "example count must be >= 0");
  internal::Random rng(seed);
  ExampleSet set;
  set.name = std::move(name);
  const Shape shape{1, kFixtureImageSize, kFixtureImageSize};
  for (int i = 0; i < count; ++i) {
    Example ex;
    ex.label = i % kFixtureClasses;
    ex.group_tag = "normal";
    ex.pixels = Tensor(shape);
    const double background = rng.Uniform(0.0, 0.25);
    for (double& v : ex.pixels.data()) v = background + 0.05 * rng.Normal();
    const int half = 2 + rng.Index(3);
    const int cy = half + rng.Index(kFixtureImageSize - 2 * half);
    const int cx = half + rng.Index(kFixtureImageSize - 2 * half);
    const double intensity = background + rng.Uniform(0.35, 0.75);
    if (ex.label == 0) {
      DrawSquare(ex.pixels, cy, cx, half, intensity);
    } else {
      DrawPlus(ex.pixels, cy, cx, half, intensity);
    }
    for (double& v : ex.pixels.data()) v = std::clamp(v, 0.0, 1.0);
    set.examples.push_back(std::move(ex));
  }
  return set;
}

ModelGraph FixtureArchitecture() {
  ModelBuilder b;
  b.Input("input", {1, kFixtureImageSize, kFixtureImageSize});
  b.Group("stem").Conv("stem.conv", "input", 8, 3, 1, 1).Relu("stem.relu", "stem.conv");
  b.Group("block1")
      .Conv("block1.conv1", "stem.relu", 8, 3, 1, 1)
      .Relu("block1.relu1", "block1.conv1")
      .Conv("block1.conv2", "block1.relu1", 8, 3, 1, 1)
      .Add("block1.add", "block1.conv2", "stem.relu")
      .Relu("block1.relu2", "block1.add");
  b.Group("pool").MaxPool("pool", "block1.relu2", 2, 2);
  b.Group("block2")
      .Conv("block2.conv1", "pool", 16, 3, 1, 1)
      .Relu("block2.relu1", "block2.conv1")
      .Conv("block2.conv2", "block2.relu1", 16, 3, 1, 1)
      .Conv("block2.proj", "pool", 16, 1)
      .Add("block2.add", "block2.conv2", "block2.proj")
      .Relu("block2.relu2", "block2.add");
  b.Group("head")
      .GlobalAvgPool("head.gap", "block2.relu2")
      .Dense("head.dense", "head.gap", kFixtureClasses)
      .Softmax("head.softmax", "head.dense");
  return std::move(b).Build();
}

void InitializeWeights(ModelGraph& model, std::uint64_t seed) {
  internal::Random rng(seed);
  for (std::size_t i = 0; i < model.size(); ++i) {
    LayerNode& node = model.mutable_node(static_cast<int>(i));
    if (node.weights.empty()) continue;
    const double fan_in = static_cast<double>(node.weights.size()) /
                          static_cast<double>(node.shape.channels);
    const double gain = node.kind == LayerKind::kConv ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / fan_in);
    for (double& w : node.weights) w = stddev * rng.Normal();
    std::fill(node.bias.begin(), node.bias.end(), 0.0);
  }
}

TrainReport Train(ModelGraph& model, const ExampleSet& data, const TrainOptions& options) {
  Require(!data.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  Require(options.batch_size >= 1 && options.epochs >= 0, ErrorCode::kInvalidArgument,
          "batch size must be >= 1 and epochs >= 0");
  internal::Random rng(options.seed);
  ParameterGradients velocity = ParameterGradients::ZerosLike(model);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainReport report;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.Index(static_cast<int>(i))]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<ParameterGradients> slots(end - start, ParameterGradients::ZerosLike(model));
      std::vector<double> losses(end - start, 0.0);
      internal::ParallelFor(end - start, options.threads, [&](std::size_t k) {
        losses[k] = AccumulateParameterGradients(model, data.examples[order[start + k]],
                                                 slots[k]);
      });
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t n = 0; n < model.size(); ++n) {
        LayerNode& node = model.mutable_node(static_cast<int>(n));
        auto step = [&](std::vector<double>& params, std::vector<double>& vel,
                        auto member) {
          for (std::size_t p = 0; p < params.size(); ++p) {
            double g = 0.0;
            for (const auto& s : slots) g += (s.*member)[n][p];
            vel[p] = options.momentum * vel[p] - options.learning_rate * g * scale;
            params[p] += vel[p];
          }
        };
        step(node.weights, velocity.weights[n], &ParameterGradients::weights);
        step(node.bias, velocity.bias[n], &ParameterGradients::bias);
      }
      for (double l : losses) epoch_loss += l;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  report.train_accuracy = Accuracy(model, data);
  return report;
}

double Accuracy(const ModelGraph& model, const ExampleSet& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data.examples) {
    correct += Forward(model, ex).predicted_class == ex.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void RoundWeightsToFloat32(ModelGraph& model) {
  for (std::size_t i = 0; i < model.size(); ++i) {
    LayerNode& node = model.mutable_node(static_cast<int>(i));
    for (double& w : node.weights) w = static_cast<float>(w);
    for (double& b : node.bias) b = static_cast<float>(b);
  }
}

Fixture BuildFixture(const FixtureOptions& options) {
  Fixture fixture;
  fixture.model = FixtureArchitecture();
  fixture.train = MotifDataset(options.train_count, options.seed, "train");
  fixture.test = MotifDataset(options.test_count, options.seed + 1, "test");
  InitializeWeights(fixture.model, options.seed + 2);
  TrainOptions train = options.train;
  train.seed = options.seed + 3;
  fixture.report = Train(fixture.model, fixture.train, train);
  RoundWeightsToFloat32(fixture.model);
  fixture.report.train_accuracy = Accuracy(fixture.model, fixture.train);
  fixture.test_accuracy = Accuracy(fixture.model, fixture.test);
  return fixture;
}

}  // namespace pathlens
