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

#include <gtest/gtest.h>

#include "pathlens/engine.h"
#include "pathlens/fixture.h"
#include "pathlens/io.h"

namespace pathlens {
namespace {

TEST(MotifDatasetTest, DeterministicAlternatingLabelsInRange) {
  const ExampleSet a = MotifDataset(10, 3);
  const ExampleSet b = MotifDataset(10, 3);
  EXPECT_EQ(ExampleSetHash(a), ExampleSetHash(b));
  EXPECT_NE(ExampleSetHash(a), ExampleSetHash(MotifDataset(10, 4)));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.examples[i].label, static_cast<int>(i % 2));
    EXPECT_EQ(a.examples[i].pixels.shape(), (Shape{1, kFixtureImageSize, kFixtureImageSize}));
    for (double v : a.examples[i].pixels.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(FixtureTest, SmallBuildIsReproducibleAndLearns) {
  FixtureOptions options;
  options.train_count = 80;
  options.test_count = 20;
  options.train.epochs = 3;
  const Fixture a = BuildFixture(options);
  const Fixture b = BuildFixture(options);
  EXPECT_EQ(ModelHash(a.model), ModelHash(b.model));
  ASSERT_EQ(a.report.epoch_loss.size(), 3u);
  EXPECT_LT(a.report.epoch_loss.back(), a.report.epoch_loss.front());
  EXPECT_EQ(a.model.num_classes(), kFixtureClasses);
  // Weights are float32-exact so that saving and loading does not change them.
  for (const auto& node : a.model.nodes()) {
    for (double w : node.weights) EXPECT_EQ(w, static_cast<double>(static_cast<float>(w)));
  }
}

}  // namespace
}  // namespace pathlens
