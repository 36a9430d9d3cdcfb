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

#ifndef PATHLENS_TESTS_SUPPORT_NETS_H_
#define PATHLENS_TESTS_SUPPORT_NETS_H_

#include <cstdint>

#include "pathlens/model.h"
#include "random.h"

namespace pathlens::testing {

using internal::Random;

// Gaussian weights with std scale*sqrt(2/fan_in), biases uniform in +-bias.
void RandomizeWeights(ModelGraph& model, std::uint64_t seed, double scale = 1.0,
                      double bias = 0.1);

Example RandomExample(const ModelGraph& model, Random& rng, int label = 0);
ExampleSet RandomExamples(const ModelGraph& model, int count, std::uint64_t seed, int label = 0);

// conv, relu, residual add, max pool, avg pool, global average pool, dense.
ModelGraph ResidualNet(std::uint64_t seed);

// Strided conv feeding two dense layers (dense over a flattened C x H x W input).
ModelGraph DenseHeadNet(std::uint64_t seed);

// One analyzed relu layer of n feature maps ("probe.relu") under a small head.
ModelGraph ProbeNet(std::uint64_t seed, int n);

// input 1x4x4 -> conv 2x3x3 -> relu -> dense 2 -> softmax.
ModelGraph TinyNet(std::uint64_t seed);

// "feat.relu" holds a loud distractor map (index 0) with no path to the
// logits and a quieter map (index 1) that drives class 1.
ModelGraph DistractorNet(std::uint64_t seed);
ExampleSet DistractorExamples(std::uint64_t seed, int count);

// Single 3x3 vertical-edge conv ("edge.conv", "edge.relu") over 16x16.
ModelGraph EdgeNet();

}  // namespace pathlens::testing

#endif  // PATHLENS_TESTS_SUPPORT_NETS_H_
