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

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "error_code.h"
#include "nets.h"
#include "oracles.h"
#include "pathlens/engine.h"
#include "pathlens/neuronview.h"

namespace pathlens::testing {
namespace {

TEST(HeatmapTest, NormalizesByMaxAbs) {
  double scale = 0.0;
  const auto out = NormalizeMaxAbs(std::vector<double>{-4.0, 2.0, 0.0, 1.0}, &scale);
  EXPECT_EQ(scale, 4.0);
  EXPECT_EQ(out, (std::vector<double>{-1.0, 0.5, 0.0, 0.25}));
  EXPECT_EQ(NormalizeMaxAbs(std::vector<double>{0.0, 0.0}, &scale),
            (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(scale, 0.0);
}

TEST(HeatmapTest, ActivationHeatmapOfEdgeDetector) {
  const ModelGraph m = EdgeNet();
  Example ex;
  ex.pixels = Tensor(Shape{1, 16, 16});
  for (int y = 0; y < 16; ++y) {
    for (int x = 8; x < 16; ++x) ex.pixels.at(0, y, x) = 1.0;
  }
  const ActivationTrace t = Forward(m, ex);
  const HeatMap h = ActivationHeatmap(m, t, m.IndexOrThrow("edge.relu"), 0);
  EXPECT_EQ(h.height, 16);
  EXPECT_EQ(h.width, 16);
  EXPECT_EQ(h.max_abs, 4.0);
  for (int y = 1; y < 15; ++y) {
    EXPECT_EQ(h.at(y, 7), 1.0);
    EXPECT_EQ(h.at(y, 8), 1.0);
    EXPECT_EQ(h.at(y, 3), 0.0);
    EXPECT_EQ(h.at(y, 12), 0.0);
  }
  EXPECT_EQ(CodeOf([&] { (void)ActivationHeatmap(m, t, m.IndexOrThrow("edge.relu"), 1); }),
            ErrorCode::kOutOfRange);
  const std::string ppm = HeatMapPpm(h, 2);
  EXPECT_EQ(ppm.rfind("P3\n32 32\n", 0), 0u);
}

TEST(DiscrepancyTest, MatchesNaiveOcclusionOracle) {
  Random rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelGraph m = trial % 2 == 0 ? EdgeNet() : ProbeNet(trial, 4);
    const Example ex = RandomExample(m, rng);
    const int layer = m.IndexOrThrow(trial % 2 == 0 ? "edge.relu" : "probe.relu");
    NeuronTarget target;
    target.layer = layer;
    target.feature_map = rng.Index(m.node(layer).channel_count());
    target.y = rng.Index(m.node(layer).shape.height);
    target.x = rng.Index(m.node(layer).shape.width);
    const int patch = 1 + rng.Index(4);
    const double fill = rng.Uniform();
    const DiscrepancyMap map =
        ComputeDiscrepancyMap(m, ex, target, std::vector<double>{fill}, patch, 0.5, 1 + trial % 3);
    const auto expected =
        NaiveOcclusionDeltas(m, ex, layer, target.feature_map, *target.y, *target.x, patch, fill);
    ASSERT_EQ(map.deltas.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_NEAR(map.deltas[i], expected[i], 1e-14);
    }
    EXPECT_EQ(map.rows, (ex.pixels.shape().height + patch - 1) / patch);
  }
}

TEST(DiscrepancyTest, ThresholdSemantics) {
  const ModelGraph m = EdgeNet();
  Random rng(2);
  const Example ex = RandomExample(m, rng);
  NeuronTarget target;
  target.layer = m.IndexOrThrow("edge.conv");
  target.y = 8;
  target.x = 8;
  const std::vector<double> fill = {0.5};
  const DiscrepancyMap map = ComputeDiscrepancyMap(m, ex, target, fill, 2, 0.5);
  ASSERT_FALSE(map.degenerate);
  int important = 0;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const double d = map.deltas[r * map.cols + c];
      EXPECT_EQ(map.is_important(r, c), d > 0.0 && d >= 0.5 * map.max_delta);
      important += map.is_important(r, c) ? 1 : 0;
      for (int y = r * 2; y < r * 2 + 2; ++y) {
        for (int x = c * 2; x < c * 2 + 2; ++x) {
          EXPECT_EQ(map.keep[y * map.width + x], map.is_important(r, c) ? 1 : 0);
        }
      }
    }
  }
  EXPECT_GE(important, 1);
  const DiscrepancyMap all = Rethreshold(map, 0.0);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      EXPECT_EQ(all.is_important(r, c), map.deltas[r * map.cols + c] > 0.0);
    }
  }
  EXPECT_EQ(CodeOf([&] { (void)Rethreshold(map, 1.5); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { (void)ComputeDiscrepancyMap(m, ex, target, fill, 0); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] {
              (void)ComputeDiscrepancyMap(m, ex, target, std::vector<double>{0.1, 0.2}, 2);
            }),
            ErrorCode::kShapeMismatch);
}

TEST(DiscrepancyTest, FlatImageIsDegenerate) {
  const ModelGraph m = EdgeNet();
  Example ex;
  ex.pixels = Tensor(Shape{1, 16, 16}, 0.3);
  NeuronTarget target;
  target.layer = m.IndexOrThrow("edge.relu");
  target.y = 5;
  target.x = 5;
  const DiscrepancyMap map = ComputeDiscrepancyMap(m, ex, target, std::vector<double>{0.3}, 2);
  EXPECT_TRUE(map.degenerate);
  EXPECT_EQ(map.max_delta, 0.0);
  EXPECT_TRUE(std::all_of(map.important.begin(), map.important.end(),
                          [](std::uint8_t v) { return v == 0; }));
}

TEST(DiscrepancyTest, FeatureMapTargetIsSpatialMean) {
  const ModelGraph m = ProbeNet(3, 3);
  Random rng(3);
  const Example ex = RandomExample(m, rng);
  const auto acts = RunForward(m, ex.pixels);
  const int layer = m.IndexOrThrow("probe.relu");
  NeuronTarget target;
  target.layer = layer;
  target.feature_map = 2;
  double mean = 0.0;
  for (double v : acts[layer].channel(2)) mean += v;
  mean /= static_cast<double>(acts[layer].shape().spatial());
  EXPECT_NEAR(TargetActivation(m, acts, target), mean, 1e-15);
  target.y = 1;
  target.x = 2;
  EXPECT_EQ(TargetActivation(m, acts, target), acts[layer].at(2, 1, 2));
}

TEST(DiscrepancyTest, DefaultsAndDatasetMean) {
  EXPECT_EQ(DefaultPatchSize(224, 224), 8);
  EXPECT_EQ(DefaultPatchSize(16, 16), 2);
  EXPECT_EQ(DefaultPatchSize(32, 300), 8);
  ExampleSet set;
  for (double v : {0.2, 0.4, 0.9}) {
    Example ex;
    ex.pixels = Tensor(Shape{2, 2, 2}, v);
    for (double& p : ex.pixels.channel(1)) p = 1.0 - v;
    set.examples.push_back(ex);
  }
  const auto mean = DatasetMean(set);
  ASSERT_EQ(mean.size(), 2u);
  EXPECT_NEAR(mean[0], 0.5, 1e-15);
  EXPECT_NEAR(mean[1], 0.5, 1e-15);
}

TEST(DiscrepancyTest, NetpbmDumps) {
  const ModelGraph m = EdgeNet();
  Random rng(4);
  const Example ex = RandomExample(m, rng);
  NeuronTarget target;
  target.layer = m.IndexOrThrow("edge.conv");
  target.y = 3;
  target.x = 3;
  const DiscrepancyMap map = ComputeDiscrepancyMap(m, ex, target, std::vector<double>{0.5}, 4);
  EXPECT_EQ(DiscrepancyMaskPgm(map).rfind("P2\n16 16\n", 0), 0u);
  EXPECT_EQ(DimmedPreviewPpm(ex, map).rfind("P3\n16 16\n", 0), 0u);
  const auto doc = ToJson(map);
  EXPECT_EQ(doc["rows"], 4);
  EXPECT_EQ(doc["deltas"].size(), 16u);
}

}  // namespace
}  // namespace pathlens::testing
