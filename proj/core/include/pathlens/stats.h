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

#ifndef PATHLENS_STATS_H_
#define PATHLENS_STATS_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathlens/engine.h"
#include "pathlens/extraction.h"
#include "pathlens/model.h"

namespace pathlens {

enum class StatisticKind {
  kActivationSimilarity,
  kTopologicalSimilarity,
  kMeanActivation,
  kActivationDifference,
};

std::string_view StatisticKindName(StatisticKind kind);
StatisticKind ParseStatisticKind(std::string_view name);

struct LayerStatistic {
  std::string layer;
  StatisticKind kind = StatisticKind::kActivationSimilarity;
  double value = 0.0;
  std::string group;      // set for per-group statistics (mean activation)
  bool fallback = false;  // similarity computed over all feature maps
};

struct SimilarityResult {
  double value = 0.0;
  bool fallback = false;
};

// Cosine similarity; 1 when both vectors are zero, 0 when exactly one is.
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// Mean over aligned pairs of the cosine similarity between the concatenated
// activations of `feature_maps` at `layer`. An empty selection falls back to
// every feature map of the layer and is flagged.
SimilarityResult ActivationSimilarity(std::span<const ActivationTrace> traces_a,
                                      std::span<const ActivationTrace> traces_n, int layer,
                                      std::span<const int> feature_maps);

// Restricts to the union of both datapaths' critical sets at `layer_id`.
SimilarityResult ActivationSimilarity(const ModelGraph& model,
                                      std::span<const ActivationTrace> traces_a,
                                      std::span<const ActivationTrace> traces_n,
                                      const Datapath& dp_a, const Datapath& dp_n,
                                      std::string_view layer_id);

// Jaccard similarity of the critical sets; 1 when both are empty.
double TopologicalSimilarity(const Datapath& dp_a, const Datapath& dp_n,
                             std::string_view layer_id);
double Jaccard(std::span<const int> a, std::span<const int> b);

// Mean (over traces) total activation of feature map j, normal minus adversarial.
double ActivationDifference(std::span<const ActivationTrace> traces_n,
                            std::span<const ActivationTrace> traces_a, int layer,
                            int feature_map);

// Mean activation over all neurons of the selected feature maps and traces.
double MeanActivation(std::span<const ActivationTrace> traces, int layer,
                      std::span<const int> feature_maps);

// Normalized softmax entropy in [0,1].
double UncertaintyScore(const ActivationTrace& trace);

std::vector<int> CriticalUnion(const Datapath& dp_a, const Datapath& dp_n,
                               std::string_view layer_id);

// Rows for every layer covered by both datapaths. Group `n` is the reference
// (normal) group, `a` the compared (adversarial) one; traces are paired.
std::vector<LayerStatistic> ComputeLayerStatistics(const ModelGraph& model,
                                                   std::span<const ActivationTrace> traces_n,
                                                   std::span<const ActivationTrace> traces_a,
                                                   const Datapath& dp_n, const Datapath& dp_a);

nlohmann::json ToJson(const LayerStatistic& stat);
nlohmann::json ToJson(std::span<const LayerStatistic> stats);
std::vector<LayerStatistic> StatisticsFromJson(const nlohmann::json& doc);

}  // namespace pathlens

#endif  // PATHLENS_STATS_H_
