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
#include "pathlens/attacks.h"
#include "pathlens/engine.h"

namespace pathlens::testing {
namespace {

TEST(FgsmTest, StaysInBudgetAndPixelRange) {
  Random rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelGraph m = trial % 2 == 0 ? ResidualNet(trial) : DenseHeadNet(trial);
    Example ex = RandomExample(m, rng, rng.Index(m.num_classes()));
    for (double& v : ex.pixels.data()) {
      if (rng.Index(4) == 0) v = rng.Index(2);  // pixels on the [0,1] boundary
    }
    const double eps = rng.Uniform(0.0, 0.3);
    const Example adv = Fgsm(m, ex, AttackConfig{eps, std::nullopt});
    EXPECT_EQ(adv.group_tag, kAdversarialTag);
    EXPECT_EQ(adv.label, ex.label);
    for (std::size_t i = 0; i < ex.pixels.size(); ++i) {
      const double after = adv.pixels.data()[i];
      EXPECT_LE(std::abs(after - ex.pixels.data()[i]), eps);
      EXPECT_GE(after, 0.0);
      EXPECT_LE(after, 1.0);
    }
  }
}

TEST(FgsmTest, StepFollowsGradientSign) {
  Random rng(2);
  const ModelGraph m = ResidualNet(2);
  const Example ex = RandomExample(m, rng, 1);
  const double eps = 0.01;
  const Tensor g = InputGradient(m, ex, 1);
  const Example up = Fgsm(m, ex, AttackConfig{eps, std::nullopt});
  const Example toward = Fgsm(m, ex, AttackConfig{eps, 2});
  const Tensor g2 = InputGradient(m, ex, 2);
  for (std::size_t i = 0; i < ex.pixels.size(); ++i) {
    const double x = ex.pixels.data()[i];
    const double s = g.data()[i] > 0 ? 1.0 : (g.data()[i] < 0 ? -1.0 : 0.0);
    const double s2 = g2.data()[i] > 0 ? 1.0 : (g2.data()[i] < 0 ? -1.0 : 0.0);
    EXPECT_NEAR(up.pixels.data()[i], std::clamp(x + eps * s, 0.0, 1.0), 1e-15);
    EXPECT_NEAR(toward.pixels.data()[i], std::clamp(x - eps * s2, 0.0, 1.0), 1e-15);
  }
}

TEST(FgsmTest, SmallStepMovesLossInIntendedDirection) {
  Random rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelGraph m = DenseHeadNet(100 + trial);
    const Example ex = RandomExample(m, rng, rng.Index(3));
    const AttackConfig untargeted{1e-4, std::nullopt};
    const int target = (ex.label + 1) % 3;
    const AttackConfig targeted{1e-4, target};
    const Tensor g = InputGradient(m, ex, ex.label);
    if (std::all_of(g.data().begin(), g.data().end(), [](double v) { return v == 0.0; })) {
      // Every hidden unit is inactive: the attack has nothing to follow.
      EXPECT_EQ(Fgsm(m, ex, untargeted).pixels.data()[0], ex.pixels.data()[0]);
      continue;
    }
    EXPECT_GT(CrossEntropyLoss(m, Fgsm(m, ex, untargeted), ex.label),
              CrossEntropyLoss(m, ex, ex.label));
    EXPECT_LT(CrossEntropyLoss(m, Fgsm(m, ex, targeted), target),
              CrossEntropyLoss(m, ex, target));
  }
}

TEST(FgsmTest, ZeroEpsilonIsIdentity) {
  Random rng(4);
  const ModelGraph m = TinyNet(4);
  const Example ex = RandomExample(m, rng);
  EXPECT_EQ(Fgsm(m, ex, AttackConfig{0.0, std::nullopt}).pixels, ex.pixels);
}

TEST(FgsmTest, ValidationAndSetAttack) {
  const ModelGraph m = TinyNet(5);
  const ExampleSet set = RandomExamples(m, 6, 5, 1);
  EXPECT_EQ(CodeOf([] { AttackConfig{-0.1, std::nullopt}.Validate(); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { AttackConfig{NAN, std::nullopt}.Validate(); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { (void)Fgsm(m, set.examples[0], AttackConfig{0.1, 7}); }),
            ErrorCode::kOutOfRange);
  const ExampleSet one = FgsmSet(m, set, AttackConfig{}, 1);
  const ExampleSet three = FgsmSet(m, set, AttackConfig{}, 3);
  ASSERT_EQ(one.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(one.examples[i].pixels, three.examples[i].pixels);
  }
}

}  // namespace
}  // namespace pathlens::testing
