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

#include "pathlens/attacks.h"

#include <algorithm>
#include <cmath>

#include "parallel.h"
#include "pathlens/engine.h"
#include "pathlens/error.h"

namespace pathlens {

void AttackConfig::Validate() const {
  Require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorCode::kInvalidArgument,
          "epsilon must be a finite value >= 0");
}

Example Fgsm(const ModelGraph& model, const Example& example, const AttackConfig& config) {
  config.Validate();
  const int label = config.target.value_or(example.label);
  const double direction = config.target ? -1.0 : 1.0;
  const Tensor grad = InputGradient(model, example, label);

  Example out = example;
  out.group_tag = kAdversarialTag;
  auto pixels = out.pixels.data();
  const auto source = example.pixels.data();
  const auto g = grad.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double sign = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    double v = std::clamp(source[i] + direction * config.epsilon * sign, 0.0, 1.0);
    // Rounding in x + eps can overshoot the budget by an ulp.
    while (std::abs(v - source[i]) > config.epsilon) v = std::nextafter(v, source[i]);
    pixels[i] = v;
  }
  return out;
}

ExampleSet FgsmSet(const ModelGraph& model, const ExampleSet& examples,
                   const AttackConfig& config, int threads) {
  config.Validate();
  ExampleSet out;
  out.name = examples.name;
  out.examples.resize(examples.size());
  internal::ParallelFor(examples.size(), threads, [&](std::size_t i) {
    out.examples[i] = Fgsm(model, examples.examples[i], config);
  });
  return out;
}

}  // namespace pathlens
