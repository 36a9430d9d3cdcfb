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

#include "pathlens/stats.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "pathlens/error.h"

namespace pathlens {

using nlohmann::json;

std::string_view StatisticKindName(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::kActivationSimilarity: return "activation_similarity";
    case StatisticKind::kTopologicalSimilarity: return "topological_similarity";
    case StatisticKind::kMeanActivation: return "mean_activation";
    case StatisticKind::kActivationDifference: return "activation_difference";
  }
  return "unknown";
}

StatisticKind ParseStatisticKind(std::string_view name) {
  for (auto kind : {StatisticKind::kActivationSimilarity, StatisticKind::kTopologicalSimilarity,
                    StatisticKind::kMeanActivation, StatisticKind::kActivationDifference}) {
    if (StatisticKindName(kind) == name) return kind;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown statistic '" + std::string(name) + "'");
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  const double aa = Dot(a, a);
  const double bb = Dot(b, b);
  if (aa == 0.0 && bb == 0.0) return 1.0;
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(Dot(a, b) / std::sqrt(aa * bb), -1.0, 1.0);
}

namespace {

std::vector<double> Concatenate(const ActivationTrace& trace, int layer,
                                std::span<const int> feature_maps) {
  const Tensor& act = trace.activation(layer);
  std::vector<double> out;
  out.reserve(feature_maps.size() * act.shape().spatial());
  for (int j : feature_maps) {
    Require(j >= 0 && j < act.shape().channels, ErrorCode::kOutOfRange,
            "feature map " + std::to_string(j) + " out of range");
    const auto channel = act.channel(j);
    out.insert(out.end(), channel.begin(), channel.end());
  }
  return out;
}

void CheckLayer(std::span<const ActivationTrace> traces, int layer) {
  for (const auto& t : traces) {
    Require(layer >= 0 && static_cast<std::size_t>(layer) < t.activations.size(),
            ErrorCode::kNotFound, "layer index out of range for trace");
  }
}

}  // namespace

SimilarityResult ActivationSimilarity(std::span<const ActivationTrace> traces_a,
                                      std::span<const ActivationTrace> traces_n, int layer,
                                      std::span<const int> feature_maps) {
  Require(traces_a.size() == traces_n.size(), ErrorCode::kInvalidArgument,
          "activation similarity needs paired traces (" + std::to_string(traces_a.size()) +
              " vs " + std::to_string(traces_n.size()) + ")");
  Require(!traces_a.empty(), ErrorCode::kInvalidArgument, "no trace pairs supplied");
  CheckLayer(traces_a, layer);
  CheckLayer(traces_n, layer);
  SimilarityResult result;
  std::vector<int> all;
  if (feature_maps.empty()) {
    all.resize(traces_a.front().activation(layer).shape().channels);
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
    feature_maps = all;
    result.fallback = true;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < traces_a.size(); ++k) {
    total += CosineSimilarity(Concatenate(traces_a[k], layer, feature_maps),
                              Concatenate(traces_n[k], layer, feature_maps));
  }
  result.value = total / static_cast<double>(traces_a.size());
  return result;
}

std::vector<int> CriticalUnion(const Datapath& dp_a, const Datapath& dp_n,
                               std::string_view layer_id) {
  std::set<int> merged;
  for (int j : dp_a.At(layer_id).critical) merged.insert(j);
  for (int j : dp_n.At(layer_id).critical) merged.insert(j);
  return {merged.begin(), merged.end()};
}

SimilarityResult ActivationSimilarity(const ModelGraph& model,
                                      std::span<const ActivationTrace> traces_a,
                                      std::span<const ActivationTrace> traces_n,
                                      const Datapath& dp_a, const Datapath& dp_n,
                                      std::string_view layer_id) {
  const auto maps = CriticalUnion(dp_a, dp_n, layer_id);
  return ActivationSimilarity(traces_a, traces_n, model.IndexOrThrow(layer_id), maps);
}

double Jaccard(std::span<const int> a, std::span<const int> b) {
  const std::set<int> sa(a.begin(), a.end());
  const std::set<int> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t shared = 0;
  for (int v : sa) shared += sb.count(v);
  return static_cast<double>(shared) / static_cast<double>(sa.size() + sb.size() - shared);
}

double TopologicalSimilarity(const Datapath& dp_a, const Datapath& dp_n,
                             std::string_view layer_id) {
  return Jaccard(dp_a.At(layer_id).critical, dp_n.At(layer_id).critical);
}

double ActivationDifference(std::span<const ActivationTrace> traces_n,
                            std::span<const ActivationTrace> traces_a, int layer,
                            int feature_map) {
  Require(!traces_n.empty() && !traces_a.empty(), ErrorCode::kInvalidArgument,
          "activation difference needs non-empty trace lists");
  CheckLayer(traces_n, layer);
  CheckLayer(traces_a, layer);
  const auto mean_total = [&](std::span<const ActivationTrace> traces) {
    double total = 0.0;
    for (const auto& t : traces) {
      const Tensor& act = t.activation(layer);
      Require(feature_map >= 0 && feature_map < act.shape().channels, ErrorCode::kOutOfRange,
              "feature map " + std::to_string(feature_map) + " out of range");
      total += Sum(act.channel(feature_map));
    }
    return total / static_cast<double>(traces.size());
  };
  return mean_total(traces_n) - mean_total(traces_a);
}

double MeanActivation(std::span<const ActivationTrace> traces, int layer,
                      std::span<const int> feature_maps) {
  Require(!traces.empty(), ErrorCode::kInvalidArgument, "no traces supplied");
  CheckLayer(traces, layer);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : traces) {
    const auto values = Concatenate(t, layer, feature_maps);
    total += Sum(values);
    count += values.size();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double UncertaintyScore(const ActivationTrace& trace) {
  const auto& probs = trace.probabilities;
  if (probs.size() <= 1) return 0.0;
  double entropy = 0.0;
  for (double p : probs) {
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::clamp(entropy / std::log(static_cast<double>(probs.size())), 0.0, 1.0);
}

std::vector<LayerStatistic> ComputeLayerStatistics(const ModelGraph& model,
                                                   std::span<const ActivationTrace> traces_n,
                                                   std::span<const ActivationTrace> traces_a,
                                                   const Datapath& dp_n, const Datapath& dp_a) {
  std::vector<LayerStatistic> rows;
  for (const auto& layer : dp_n.layers) {
    if (!dp_a.Find(layer.layer)) continue;
    const int node = model.IndexOrThrow(layer.layer);
    const auto maps = CriticalUnion(dp_a, dp_n, layer.layer);
    const auto sim = ActivationSimilarity(traces_a, traces_n, node, maps);
    rows.push_back({layer.layer, StatisticKind::kActivationSimilarity, sim.value, "",
                    sim.fallback});
    rows.push_back({layer.layer, StatisticKind::kTopologicalSimilarity,
                    TopologicalSimilarity(dp_a, dp_n, layer.layer), "", false});
    std::vector<int> all(model.node(node).channel_count());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
    const auto& own_n = layer.critical;
    const auto& own_a = dp_a.At(layer.layer).critical;
    rows.push_back({layer.layer, StatisticKind::kMeanActivation,
                    MeanActivation(traces_n, node, own_n.empty() ? all : own_n), dp_n.group.name,
                    own_n.empty()});
    rows.push_back({layer.layer, StatisticKind::kMeanActivation,
                    MeanActivation(traces_a, node, own_a.empty() ? all : own_a), dp_a.group.name,
                    own_a.empty()});
    const auto& diff_maps = maps.empty() ? all : maps;
    double diff = 0.0;
    for (int j : diff_maps) diff += ActivationDifference(traces_n, traces_a, node, j);
    rows.push_back({layer.layer, StatisticKind::kActivationDifference,
                    diff / static_cast<double>(diff_maps.size()), "", maps.empty()});
  }
  return rows;
}

json ToJson(const LayerStatistic& stat) {
  json row{{"layer", stat.layer}, {"kind", StatisticKindName(stat.kind)}, {"value", stat.value}};
  if (!stat.group.empty()) row["group"] = stat.group;
  if (stat.fallback) row["fallback"] = true;
  return row;
}

json ToJson(std::span<const LayerStatistic> stats) {
  json rows = json::array();
  for (const auto& s : stats) rows.push_back(ToJson(s));
  return json{{"format", "pathlens-stats"}, {"version", 1}, {"rows", std::move(rows)}};
}

std::vector<LayerStatistic> StatisticsFromJson(const json& doc) {
  std::vector<LayerStatistic> stats;
  try {
    for (const auto& row : doc.at("rows")) {
      stats.push_back({row.at("layer").get<std::string>(),
                       ParseStatisticKind(row.at("kind").get<std::string>()),
                       row.at("value").get<double>(), row.value("group", std::string()),
                       row.value("fallback", false)});
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed statistics document: ") + e.what());
  }
  return stats;
}

}  // namespace pathlens
