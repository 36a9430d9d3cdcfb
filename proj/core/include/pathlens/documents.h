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

#ifndef PATHLENS_DOCUMENTS_H_
#define PATHLENS_DOCUMENTS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathlens/engine.h"
#include "pathlens/extraction.h"
#include "pathlens/layout.h"
#include "pathlens/model.h"
#include "pathlens/stats.h"

namespace pathlens {

// Layout documents: the JSON the UI renders verbatim.

inline constexpr char kLayerLayoutFormat[] = "pathlens-layer-layout";
inline constexpr char kFeatureMapLayoutFormat[] = "pathlens-featuremap-layout";

inline constexpr int kDefaultTreecutBudget = 50;
inline constexpr double kDefaultLineWidth = 12.0;
inline constexpr double kDefaultSegmentLambda = 5.0;

struct LayerLayoutOptions {
  StatisticKind statistic = StatisticKind::kActivationSimilarity;
  std::string group;  // selects per-group rows (mean activation)
  int budget = kDefaultTreecutBudget;
  double line_width = kDefaultLineWidth;
  double lambda = kDefaultSegmentLambda;
  double layer_width = 1.0;
  double group_width = 2.0;
};

struct LayerLayout {
  TreecutResult treecut;
  std::vector<int> order;  // visible nodes in topological order
  SegmentedLayout segments;
  nlohmann::json document;
};

// DOI comes from the activation-similarity rows; nodes without rows get 0.
std::vector<double> DoiFromStatistics(const ModelGraph& model,
                                      std::span<const LayerStatistic> stats);

LayerLayout BuildLayerLayout(const ModelGraph& model, std::span<const LayerStatistic> stats,
                             const LayerLayoutOptions& options);

// Re-lays out a caller-chosen visible set, e.g. after expand or collapse.
LayerLayout BuildLayerLayout(const ModelGraph& model, std::span<const LayerStatistic> stats,
                             const LayerLayoutOptions& options, std::vector<int> visible);

enum class ColorEncoding { kImportance, kActivation, kActivationDifference };

std::string_view ColorEncodingName(ColorEncoding encoding);
ColorEncoding ParseColorEncoding(std::string_view name);

struct FeatureMapLayoutOptions {
  int k = kDefaultClusterCount;
  std::uint64_t seed = kKMeansSeed;
  Rect canvas{0.0, 0.0, 100.0, 100.0};
  ColorEncoding color = ColorEncoding::kImportance;
};

struct FeatureMapGroup {
  std::string name;
  const Datapath* datapath = nullptr;
  std::span<const ActivationTrace> traces;
};

struct FeatureMapLayout {
  EulerLayout layout;
  bool clamped = false;
  nlohmann::json document;
};

// Groups 0 and 1, when present, are read as normal and adversarial for the
// activation-difference encoding.
FeatureMapLayout BuildFeatureMapLayout(const ModelGraph& model,
                                       std::span<const FeatureMapGroup> groups,
                                       std::string_view layer,
                                       const FeatureMapLayoutOptions& options);

std::string LayerLayoutSvg(const nlohmann::json& document);
std::string FeatureMapLayoutSvg(const nlohmann::json& document);

}  // namespace pathlens

#endif  // PATHLENS_DOCUMENTS_H_
