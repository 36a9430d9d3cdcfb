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

#ifndef PATHLENS_ATTACKS_H_
#define PATHLENS_ATTACKS_H_

#include <optional>

#include "pathlens/model.h"

namespace pathlens {

inline constexpr char kAdversarialTag[] = "adversarial";

struct AttackConfig {
  double epsilon = 0.1;       // L-infinity budget
  std::optional<int> target;  // unset: non-targeted

  void Validate() const;
};

// One signed-gradient step, clipped to [0,1]. Non-targeted steps raise the
// loss of the true label; targeted steps lower the loss of `target`.
Example Fgsm(const ModelGraph& model, const Example& example, const AttackConfig& config);

ExampleSet FgsmSet(const ModelGraph& model, const ExampleSet& examples,
                   const AttackConfig& config, int threads = 1);

}  // namespace pathlens

#endif  // PATHLENS_ATTACKS_H_
