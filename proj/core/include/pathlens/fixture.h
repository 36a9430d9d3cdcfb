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

#ifndef PATHLENS_FIXTURE_H_
#define PATHLENS_FIXTURE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pathlens/model.h"

namespace pathlens {

// The bundled desk-scale residual CNN and its synthetic two-class dataset:
// class 0 images hold a square outline, class 1 images a plus sign, both at
// random positions, sizes and contrasts over a noisy background.

inline constexpr int kFixtureImageSize = 16;
inline constexpr int kFixtureClasses = 2;

ExampleSet MotifDataset(int count, std::uint64_t seed, std::string name = "motifs");

// Untrained graph: stem, two residual blocks separated by max pooling, and a
// global-average-pooled dense head.
ModelGraph FixtureArchitecture();

void InitializeWeights(ModelGraph& model, std::uint64_t seed);

struct TrainOptions {
  int epochs = 8;
  int batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 1;  // shuffling
  int threads = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

TrainReport Train(ModelGraph& model, const ExampleSet& data, const TrainOptions& options);

double Accuracy(const ModelGraph& model, const ExampleSet& data);

// Rounds every parameter to float32 so the in-memory model equals what the
// weights file can hold.
void RoundWeightsToFloat32(ModelGraph& model);

struct FixtureOptions {
  std::uint64_t seed = 7;
  int train_count = 400;
  int test_count = 100;
  TrainOptions train;
};

struct Fixture {
  ModelGraph model;
  ExampleSet train;
  ExampleSet test;
  TrainReport report;
  double test_accuracy = 0.0;
};

Fixture BuildFixture(const FixtureOptions& options = {});

}  // namespace pathlens

#endif  // PATHLENS_FIXTURE_H_
