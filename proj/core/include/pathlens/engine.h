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

#ifndef PATHLENS_ENGINE_H_
#define PATHLENS_ENGINE_H_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pathlens/model.h"
#include "pathlens/tensor.h"

namespace pathlens {

// Activations of every node for one example, plus (once backward has run)
// the gradient of the target-class probability p with respect to each of them.
struct ActivationTrace {
  std::vector<Tensor> activations;  // indexed by node
  std::vector<Tensor> gradients;    // empty until backward; same shapes
  std::vector<double> probabilities;
  int predicted_class = -1;
  int target_class = -1;
  double p = 0.0;

  bool has_gradients() const { return !gradients.empty(); }
  const Tensor& activation(int node) const { return activations.at(node); }
  const Tensor& gradient(int node) const { return gradients.at(node); }
};

// Called after each node's output is computed; may modify it in place.
using ActivationHook = std::function<void(int node, Tensor& output)>;

// Raw forward pass returning all node outputs.
std::vector<Tensor> RunForward(const ModelGraph& model, const Tensor& input,
                               const ActivationHook& hook = {});

// p is the probability of `target_class`, or of the argmax class when unset.
ActivationTrace Forward(const ModelGraph& model, const Example& example,
                        std::optional<int> target_class = std::nullopt);

// Output probabilities with layer `layer`'s feature map j scaled by z[j].
std::vector<double> MaskedProbabilities(const ModelGraph& model, const Example& example,
                                        int layer, std::span<const double> z);

// p(x; z) with layer `layer`'s feature map j scaled by z[j].
double MaskedForward(const ModelGraph& model, const Example& example, int layer,
                     std::span<const double> z, int target_class);

// 1 - p summed over the other classes, accurate when p is close to 1.
double ComplementProbability(std::span<const double> probabilities, int target_class);

// Exact reverse-mode dp/da for every node, evaluated at the unmasked trace.
std::vector<Tensor> BackwardFeatureGradients(const ModelGraph& model,
                                             const ActivationTrace& trace);

// Forward followed by backward, gradients attached.
ActivationTrace TraceWithGradients(const ModelGraph& model, const Example& example,
                                   std::optional<int> target_class = std::nullopt);

// Gradient of -log softmax[label] with respect to the input pixels.
Tensor InputGradient(const ModelGraph& model, const Example& example, int label);

double CrossEntropyLoss(const ModelGraph& model, const Example& example, int label);

struct ParameterGradients {
  std::vector<std::vector<double>> weights;  // indexed by node
  std::vector<std::vector<double>> bias;

  static ParameterGradients ZerosLike(const ModelGraph& model);
  void Scale(double factor);
};

// Accumulates d(cross-entropy)/d(parameters) into `grads`; returns the loss.
double AccumulateParameterGradients(const ModelGraph& model, const Example& example,
                                    ParameterGradients& grads);

}  // namespace pathlens

#endif  // PATHLENS_ENGINE_H_
