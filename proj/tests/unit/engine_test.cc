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

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "error_code.h"
#include "nets.h"
#include "oracles.h"
#include "pathlens/engine.h"

namespace pathlens::testing {
namespace {

// Every net used by the property tests below, rebuilt per seed.
std::vector<ModelGraph> NetsForSeed(std::uint64_t seed) {
  return {TinyNet(seed), ResidualNet(seed), DenseHeadNet(seed), ProbeNet(seed, 5)};
}

TEST(EngineTest, ProbabilitiesSumToOne) {
  Random rng(1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& m : NetsForSeed(seed)) {
      const ActivationTrace t = Forward(m, RandomExample(m, rng));
      EXPECT_NEAR(std::accumulate(t.probabilities.begin(), t.probabilities.end(), 0.0), 1.0,
                  1e-12);
      EXPECT_EQ(t.p, t.probabilities[t.predicted_class]);
      EXPECT_EQ(t.target_class, t.predicted_class);
    }
  }
}

TEST(EngineTest, FeatureGradientsMatchFiniteDifferences) {
  Random rng(2);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (const auto& m : NetsForSeed(seed)) {
      const Example ex = RandomExample(m, rng);
      const int target = rng.Index(m.num_classes());
      const ActivationTrace t = TraceWithGradients(m, ex, target);
      for (int draw = 0; draw < 40; ++draw) {
        const int layer = 1 + rng.Index(static_cast<int>(m.size()) - 2);
        const std::size_t coord = rng.Index(static_cast<int>(t.activations[layer].size()));
        const FdResult fd = FdFeatureGradient(m, ex, target, layer, coord);
        if (fd.kink) continue;
        EXPECT_LT(RelativeError(t.gradients[layer].data()[coord], fd.value), 1e-4)
            << m.node(layer).id << "[" << coord << "]";
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(EngineTest, InputGradientMatchesFiniteDifferences) {
  Random rng(3);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (const auto& m : NetsForSeed(seed)) {
      const Example ex = RandomExample(m, rng, rng.Index(m.num_classes()));
      const Tensor g = InputGradient(m, ex, ex.label);
      ASSERT_EQ(g.shape(), ex.pixels.shape());
      for (int draw = 0; draw < 20; ++draw) {
        const std::size_t coord = rng.Index(static_cast<int>(ex.pixels.size()));
        const FdResult fd = FdInputGradient(m, ex, ex.label, coord);
        if (fd.kink) continue;
        EXPECT_LT(RelativeError(g.data()[coord], fd.value), 1e-4);
      }
    }
  }
}

TEST(EngineTest, SaturatedSoftmaxKeepsSmallGradients) {
  ModelGraph m = TinyNet(4);
  auto& dense = m.mutable_node(m.IndexOrThrow("dense"));
  for (double& w : dense.weights) w *= 40.0;
  Random rng(4);
  const Example ex = RandomExample(m, rng);
  const ActivationTrace t = TraceWithGradients(m, ex);
  ASSERT_GT(t.p, 1.0 - 1e-8);
  const int relu = m.IndexOrThrow("relu");
  for (std::size_t c = 0; c < t.activations[relu].size(); ++c) {
    const FdResult fd = FdFeatureGradient(m, ex, t.target_class, relu, c);
    if (fd.kink || t.activations[relu].data()[c] == 0.0) continue;
    EXPECT_LT(RelativeError(t.gradients[relu].data()[c], fd.value, 1e-30), 1e-5);
  }
}

TEST(EngineTest, MaskedForwardMatchesHandWrittenNet) {
  Random rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelGraph m = TinyNet(seed);
    const Example ex = RandomExample(m, rng);
    const std::vector<double> z = {rng.Uniform(), rng.Uniform()};
    for (int target = 0; target < 2; ++target) {
      EXPECT_NEAR(MaskedForward(m, ex, m.IndexOrThrow("relu"), z, target),
                  HandMaskedTinyNet(m, ex, z, target), 1e-14);
    }
  }
}

TEST(EngineTest, UnitMaskIsIdentity) {
  Random rng(6);
  for (const auto& m : NetsForSeed(6)) {
    const Example ex = RandomExample(m, rng);
    const ActivationTrace t = Forward(m, ex);
    for (int layer : m.DefaultCandidateLayers()) {
      const std::vector<double> ones(m.node(layer).channel_count(), 1.0);
      EXPECT_EQ(MaskedForward(m, ex, layer, ones, t.target_class), t.p);
    }
  }
}

TEST(EngineTest, ComplementProbabilityIsOneMinusP) {
  const std::vector<double> p = {0.25, 0.5, 0.125, 0.125};
  EXPECT_DOUBLE_EQ(ComplementProbability(p, 1), 0.5);
  EXPECT_DOUBLE_EQ(ComplementProbability(p, 0), 0.75);
}

TEST(EngineTest, RejectsInvalidMasksAndClasses) {
  const ModelGraph m = TinyNet(7);
  Random rng(7);
  const Example ex = RandomExample(m, rng);
  const int relu = m.IndexOrThrow("relu");
  EXPECT_EQ(CodeOf([&] { (void)MaskedForward(m, ex, relu, std::vector<double>{1.0}, 0); }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([&] { (void)MaskedForward(m, ex, relu, std::vector<double>{1.5, 0.0}, 0); }),
            ErrorCode::kOutOfRange);
  EXPECT_EQ(CodeOf([&] { (void)Forward(m, ex, 2); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(CodeOf([&] { (void)CrossEntropyLoss(m, ex, -1); }), ErrorCode::kOutOfRange);
}

TEST(EngineTest, CrossEntropyAgreesWithProbabilities) {
  Random rng(8);
  for (const auto& m : NetsForSeed(8)) {
    const Example ex = RandomExample(m, rng);
    const ActivationTrace t = Forward(m, ex);
    for (int c = 0; c < m.num_classes(); ++c) {
      EXPECT_NEAR(CrossEntropyLoss(m, ex, c), -std::log(t.probabilities[c]), 1e-12);
    }
  }
}

}  // namespace
}  // namespace pathlens::testing
