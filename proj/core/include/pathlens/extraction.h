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

#ifndef PATHLENS_EXTRACTION_H_
#define PATHLENS_EXTRACTION_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathlens/engine.h"
#include "pathlens/model.h"

namespace pathlens {

struct ExtractionConfig {
  double threshold = 0.5;             // tau in (0,1)
  std::optional<double> lambda;       // default 0.1 / n^2 per layer
  int max_iterations = 200;
  double tolerance = 1e-6;            // projected-gradient norm
  std::vector<std::string> layers;    // empty selects every relu and add output
  std::optional<int> top_k;           // replaces thresholding when set
  std::optional<int> target_class;    // default: the group's shared class
  int threads = 1;

  void Validate() const;
};

nlohmann::json ToJson(const ExtractionConfig& config);
ExtractionConfig ExtractionConfigFromJson(const nlohmann::json& doc);

double DefaultLambda(int feature_maps);

// Per-feature-map first-order contributions q_j = a_j . dp/da_j at `layer`.
std::vector<double> FeatureContributions(const ActivationTrace& trace, int layer);

// Box-constrained quadratic relaxation of critical feature-map selection:
//
//   minimize  z (Q + lambda I) z^T - 2 * sum_k s_k (q_k . z),   z in [0,1]^n
//
// with Q = sum_k q_k^T q_k over the examples k and s_k = sum_j q_k[j]. Q is
// never formed; it is kept as its rank-K factors.
class QuadraticProgram {
 public:
  QuadraticProgram(std::vector<std::vector<double>> contributions, double lambda);

  int n() const { return n_; }
  double lambda() const { return lambda_; }
  const std::vector<std::vector<double>>& contributions() const { return contributions_; }
  const std::vector<double>& sums() const { return sums_; }

  double Objective(std::span<const double> z) const;
  void Gradient(std::span<const double> z, std::span<double> out) const;

  // Row-major n x n sum of outer products, for inspection and tests.
  std::vector<double> DenseQ() const;
  // sum_k s_k q_k.
  std::vector<double> LinearTerm() const;

 private:
  int n_ = 0;
  double lambda_ = 0.0;
  std::vector<std::vector<double>> contributions_;
  std::vector<double> sums_;
};

QuadraticProgram BuildQp(std::span<const ActivationTrace> traces, int layer, double lambda);

struct SolveResult {
  std::vector<double> z;
  double objective = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // after each accepted iteration
};

// Projected quasi-Newton: BFGS curvature restricted to the free variables,
// projection onto the box and Armijo backtracking. Starts from z = 1.
SolveResult SolveQp(const QuadraticProgram& qp, const ExtractionConfig& config);

struct TaylorGap {
  double exact = 0.0;   // p(x) - p(x; z)
  double linear = 0.0;  // sum_j (1 - z_j) q_j
};

TaylorGap ComputeTaylorGap(const ModelGraph& model, const Example& example,
                           const ActivationTrace& trace, int layer, std::span<const double> z);

// Critical feature maps: z_j >= threshold, or the top_k largest when set.
std::vector<int> SelectCritical(std::span<const double> z, const ExtractionConfig& config);

struct LayerDatapath {
  std::string layer;
  int node = -1;
  std::vector<double> importance;
  std::vector<int> critical;
  double lambda = 0.0;
  double threshold = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct DatapathEdge {
  std::string from_layer;
  int from_map = 0;
  std::string to_layer;
  int to_map = 0;

  friend bool operator==(const DatapathEdge&, const DatapathEdge&) = default;
};

struct GroupDescriptor {
  std::string name;
  std::string hash;
  std::size_t count = 0;
  int target_class = -1;
};

struct Datapath {
  std::string model_hash;
  GroupDescriptor group;
  ExtractionConfig config;
  std::vector<LayerDatapath> layers;
  std::vector<DatapathEdge> edges;

  const LayerDatapath* Find(std::string_view layer) const;
  const LayerDatapath& At(std::string_view layer) const;
};

// Pairs of analyzed layers joined by a path that crosses no other analyzed
// layer, in topological order.
std::vector<std::pair<int, int>> AdjacentLayers(const ModelGraph& model,
                                                std::span<const int> layers);

std::vector<int> ResolveCandidateLayers(const ModelGraph& model, const ExtractionConfig& config);

// Default target: an all-adversarial group targets its shared prediction,
// otherwise the shared label (or, failing that, the shared prediction).
int SharedTargetClass(const ModelGraph& model, const ExampleSet& examples);

std::vector<ActivationTrace> ComputeTraces(const ModelGraph& model, const ExampleSet& examples,
                                           int target_class, int threads = 1);

// Solves each analyzed layer independently and joins adjacent critical sets.
Datapath ExtractDatapath(const ModelGraph& model, const ExampleSet& examples,
                         const ExtractionConfig& config);
Datapath ExtractDatapathFromTraces(const ModelGraph& model,
                                   std::span<const ActivationTrace> traces,
                                   const ExtractionConfig& config, GroupDescriptor group);

nlohmann::json ToJson(const Datapath& datapath);
Datapath DatapathFromJson(const nlohmann::json& doc);
// Content hash of the serialized datapath (excluding the hash field itself).
std::string DatapathId(const Datapath& datapath);

}  // namespace pathlens

#endif  // PATHLENS_EXTRACTION_H_
