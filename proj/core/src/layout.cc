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

#include "pathlens/layout.h"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <set>

#include "pathlens/error.h"

namespace pathlens {

// ---------------------------------------------------------------------------
// Treecut

std::vector<double> ComputeDoi(const ModelGraph& model,
                               const std::map<std::string, double>& layer_similarity) {
  const Hierarchy& h = model.hierarchy();
  std::vector<double> doi(h.size(), 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (int layer : h.LayersUnder(static_cast<int>(i))) {
      const auto it = layer_similarity.find(model.node(layer).id);
      if (it != layer_similarity.end()) doi[i] = std::max(doi[i], 1.0 - it->second);
    }
  }
  return doi;
}

TreecutResult Treecut(const Hierarchy& hierarchy, std::span<const double> doi, int budget) {
  Require(doi.size() == hierarchy.size(), ErrorCode::kShapeMismatch,
          "DOI vector length differs from hierarchy size");
  const auto& root_children = hierarchy.node(Hierarchy::kRoot).children;
  Require(budget >= static_cast<int>(root_children.size()), ErrorCode::kInvalidArgument,
          "treecut budget " + std::to_string(budget) + " is smaller than the root fan-out " +
              std::to_string(root_children.size()));
  TreecutResult result;
  result.budget = budget;
  result.doi.assign(doi.begin(), doi.end());
  result.visible = root_children;
  while (true) {
    int best = -1;
    for (std::size_t pos = 0; pos < result.visible.size(); ++pos) {
      const int node = result.visible[pos];
      const auto& children = hierarchy.node(node).children;
      if (children.empty()) continue;
      const auto grown = result.visible.size() - 1 + children.size();
      if (grown > static_cast<std::size_t>(budget)) continue;
      if (best < 0 || doi[node] > doi[result.visible[best]]) best = static_cast<int>(pos);
    }
    if (best < 0) break;
    result.visible = ExpandNode(hierarchy, result.visible, result.visible[best]);
  }
  return result;
}

std::vector<int> ExpandNode(const Hierarchy& hierarchy, std::span<const int> visible, int node) {
  std::vector<int> out(visible.begin(), visible.end());
  const auto it = std::find(out.begin(), out.end(), node);
  if (it == out.end() || hierarchy.node(node).children.empty()) return out;
  const auto& children = hierarchy.node(node).children;
  const auto pos = it - out.begin();
  out.erase(it);
  out.insert(out.begin() + pos, children.begin(), children.end());
  return out;
}

std::vector<int> CollapseNode(const Hierarchy& hierarchy, std::span<const int> visible,
                              int node) {
  std::vector<int> out;
  bool inserted = false;
  for (int v : visible) {
    if (v != node && hierarchy.IsAncestorOrSelf(node, v)) {
      if (!inserted) {
        out.push_back(node);
        inserted = true;
      }
      continue;
    }
    out.push_back(v);
  }
  return out;
}

std::vector<int> TopologicalVisibleOrder(const Hierarchy& hierarchy,
                                         std::span<const int> visible) {
  const auto preorder = hierarchy.Preorder();
  std::vector<int> rank(hierarchy.size());
  for (std::size_t i = 0; i < preorder.size(); ++i) rank[preorder[i]] = static_cast<int>(i);
  std::vector<std::pair<std::pair<int, int>, int>> keyed;
  for (int v : visible) {
    const auto layers = hierarchy.LayersUnder(v);
    const int first = layers.empty() ? INT_MAX : *std::min_element(layers.begin(), layers.end());
    keyed.push_back({{first, rank[v]}, v});
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  for (const auto& k : keyed) out.push_back(k.second);
  return out;
}

bool BreakCutsBlock(const Hierarchy& hierarchy, int left, int right) {
  return hierarchy.LowestCommonAncestor(left, right) != Hierarchy::kRoot;
}

// ---------------------------------------------------------------------------
// Segmentation

Segmentation SegmentSequence(std::span<const double> widths, std::span<const bool> cuts,
                             double line_width, double lambda) {
  const std::size_t m = widths.size();
  Segmentation result;
  if (m == 0) return result;
  Require(cuts.size() == m - 1, ErrorCode::kShapeMismatch,
          "need one cut flag per gap between consecutive nodes");
  for (std::size_t i = 0; i < m; ++i) {
    Require(widths[i] >= 0.0 && widths[i] <= line_width, ErrorCode::kInvalidArgument,
            "node " + std::to_string(i) + " is wider than the line width");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[i]: cheapest layout of the first i nodes ending in a break after node i-1.
  std::vector<double> best(m + 1, kInf);
  std::vector<std::size_t> from(m + 1, 0);
  best[0] = 0.0;
  for (std::size_t i = 1; i < m; ++i) {
    double width = 0.0;
    for (std::size_t j = i; j-- > 0;) {
      width += widths[j];
      if (width > line_width) break;
      const double cost = best[j] + (line_width - width) + (cuts[i - 1] ? lambda : 0.0);
      if (cost < best[i]) {
        best[i] = cost;
        from[i] = j;
      }
    }
  }
  double total = kInf;
  std::size_t last_start = 0;
  double width = 0.0;
  for (std::size_t j = m; j-- > 0;) {
    width += widths[j];
    if (width > line_width) break;
    if (best[j] < total) {
      total = best[j];
      last_start = j;
    }
  }
  for (std::size_t cur = last_start; cur > 0; cur = from[cur]) {
    result.breaks.push_back(static_cast<int>(cur - 1));
  }
  std::reverse(result.breaks.begin(), result.breaks.end());
  result.cost = total;
  return result;
}

double SegmentationCost(std::span<const double> widths, std::span<const bool> cuts,
                        double line_width, double lambda, std::span<const int> breaks) {
  double cost = 0.0;
  std::size_t start = 0;
  for (std::size_t b = 0; b <= breaks.size(); ++b) {
    const std::size_t end =
        b < breaks.size() ? static_cast<std::size_t>(breaks[b]) + 1 : widths.size();
    double width = 0.0;
    for (std::size_t i = start; i < end; ++i) width += widths[i];
    if (width > line_width) return std::numeric_limits<double>::infinity();
    if (b < breaks.size()) cost += (line_width - width) + (cuts[breaks[b]] ? lambda : 0.0);
    start = end;
  }
  return cost;
}

SegmentedLayout SegmentDag(const Hierarchy& hierarchy, std::span<const SegmentItem> items,
                           double line_width, double lambda) {
  std::vector<double> widths;
  std::vector<bool> cut_flags;
  for (std::size_t i = 0; i < items.size(); ++i) {
    widths.push_back(items[i].width);
    if (i + 1 < items.size()) {
      cut_flags.push_back(BreakCutsBlock(hierarchy, items[i].node, items[i + 1].node));
    }
  }
  // std::vector<bool> has no contiguous storage.
  std::unique_ptr<bool[]> cuts(new bool[cut_flags.size() + 1]);
  for (std::size_t i = 0; i < cut_flags.size(); ++i) cuts[i] = cut_flags[i];
  const std::span<const bool> cut_span(cuts.get(), cut_flags.size());

  const Segmentation seg = SegmentSequence(widths, cut_span, line_width, lambda);
  SegmentedLayout layout;
  layout.lambda = lambda;
  layout.line_width = line_width;
  layout.cost = seg.cost;
  std::size_t start = 0;
  for (std::size_t b = 0; b <= seg.breaks.size(); ++b) {
    const std::size_t end =
        b < seg.breaks.size() ? static_cast<std::size_t>(seg.breaks[b]) + 1 : items.size();
    std::vector<PlacedNode> row;
    double x = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      row.push_back({items[i].node, x, items[i].width});
      x += items[i].width;
    }
    if (b < seg.breaks.size()) {
      layout.empty_space.push_back(line_width - x);
      layout.cuts.push_back(cut_span[seg.breaks[b]] ? 1 : 0);
    }
    if (!row.empty()) layout.rows.push_back(std::move(row));
    start = end;
  }
  return layout;
}

// ---------------------------------------------------------------------------
// Dot plots

double DotPosition(StatisticKind kind, double value, double scale) {
  switch (kind) {
    case StatisticKind::kActivationSimilarity:
      return std::clamp((value + 1.0) / 2.0, 0.0, 1.0);
    case StatisticKind::kTopologicalSimilarity:
      return std::clamp(value, 0.0, 1.0);
    case StatisticKind::kMeanActivation:
      return scale > 0.0 ? std::clamp(value / scale, 0.0, 1.0) : 0.0;
    case StatisticKind::kActivationDifference:
      return scale > 0.0 ? std::clamp((value / scale + 1.0) / 2.0, 0.0, 1.0) : 0.5;
  }
  return 0.0;
}

double StatisticScale(StatisticKind kind, std::span<const LayerStatistic> stats) {
  double scale = 0.0;
  for (const auto& s : stats) {
    if (s.kind == kind) scale = std::max(scale, std::abs(s.value));
  }
  return scale;
}

std::vector<DotMark> DotPlotData(const ModelGraph& model, int node, StatisticKind kind,
                             std::span<const LayerStatistic> stats, std::string_view group) {
  const Hierarchy& h = model.hierarchy();
  Require(node >= 0 && static_cast<std::size_t>(node) < h.size(), ErrorCode::kNotFound,
          "unknown hierarchy node");
  auto layers = h.LayersUnder(node);
  std::sort(layers.begin(), layers.end());
  const double scale = StatisticScale(kind, stats);
  std::vector<DotMark> dots;
  for (int layer : layers) {
    const std::string& id = model.node(layer).id;
    bool analyzed = false;
    const LayerStatistic* match = nullptr;
    for (const auto& s : stats) {
      if (s.layer != id) continue;
      analyzed = true;
      if (s.kind == kind && (group.empty() || s.group.empty() || s.group == group) && !match) {
        match = &s;
      }
    }
    if (!analyzed) continue;
    Require(match != nullptr, ErrorCode::kNotFound,
            "missing statistic " + std::string(StatisticKindName(kind)), id);
    dots.push_back({id, match->value, DotPosition(kind, match->value, scale)});
  }
  return dots;
}

// ---------------------------------------------------------------------------
// Euler cells and clustering

std::vector<EulerCell> EulerCells(std::span<const Datapath> datapaths, std::string_view layer) {
  Require(!datapaths.empty() && datapaths.size() <= 4, ErrorCode::kInvalidArgument,
          "Euler cells compare between one and four datapaths");
  std::map<int, std::uint32_t> membership;
  for (std::size_t d = 0; d < datapaths.size(); ++d) {
    for (int j : datapaths[d].At(layer).critical) membership[j] |= (1u << d);
  }
  std::map<std::uint32_t, std::vector<int>> grouped;
  for (const auto& [fm, signature] : membership) grouped[signature].push_back(fm);
  std::vector<EulerCell> cells;
  for (auto& [signature, maps] : grouped) cells.push_back({signature, std::move(maps)});
  return cells;
}

namespace {

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum;
}

}  // namespace

Clustering KMeans(std::span<const std::vector<double>> points, std::span<const int> members,
                  int k, std::uint64_t seed, int iterations) {
  Require(points.size() == members.size(), ErrorCode::kShapeMismatch,
          "one profile per member is required");
  Require(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  Clustering result;
  result.k_requested = k;
  const std::size_t n = points.size();
  if (n == 0) return result;
  for (const auto& p : points) {
    Require(p.size() == points.front().size(), ErrorCode::kShapeMismatch,
            "profiles differ in dimension");
  }
  if (static_cast<std::size_t>(k) > n) {
    k = static_cast<int>(n);
    result.clamped = true;
  }
  result.k_used = k;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> seeds{static_cast<std::size_t>(rng() % n)};
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = SquaredDistance(points[i], points[seeds[0]]);
  while (seeds.size() < static_cast<std::size_t>(k)) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (nearest[i] > nearest[far]) far = i;
    }
    seeds.push_back(far);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], SquaredDistance(points[i], points[far]));
    }
  }
  std::vector<std::vector<double>> centers;
  for (std::size_t s : seeds) centers.push_back(points[s]);

  std::vector<int> assignment(n, -1);
  for (int iter = 0; iter < std::max(1, iterations); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = SquaredDistance(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = SquaredDistance(points[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      std::vector<double> sum(points.front().size(), 0.0);
      int count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != c) continue;
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += points[i][d];
        ++count;
      }
      if (count == 0) continue;
      for (double& v : sum) v /= count;
      centers[c] = std::move(sum);
    }
  }

  std::vector<Cluster> clusters(k);
  for (std::size_t i = 0; i < n; ++i) clusters[assignment[i]].members.push_back(members[i]);
  for (int c = 0; c < k; ++c) {
    clusters[c].centroid = centers[c];
    std::sort(clusters[c].members.begin(), clusters[c].members.end());
  }
  std::erase_if(clusters, [](const Cluster& c) { return c.members.empty(); });
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    return a.members.front() < b.members.front();
  });
  result.clusters = std::move(clusters);
  return result;
}

std::vector<std::vector<double>> FeatureMapProfiles(
    std::span<const std::span<const ActivationTrace>> groups, int layer,
    std::span<const int> members) {
  std::vector<std::vector<double>> profiles;
  for (int j : members) {
    std::vector<double> profile;
    for (const auto& traces : groups) {
      for (const auto& t : traces) {
        const Tensor& act = t.activation(layer);
        Require(j >= 0 && j < act.shape().channels, ErrorCode::kOutOfRange,
                "feature map " + std::to_string(j) + " out of range");
        profile.push_back(Sum(act.channel(j)) / static_cast<double>(act.shape().spatial()));
      }
    }
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

// ---------------------------------------------------------------------------
// Treemap

int GlyphCount(int cluster_size) {
  Require(cluster_size >= 1, ErrorCode::kInvalidArgument, "cluster size must be >= 1");
  int digits = 0;
  for (int v = cluster_size; v > 0; v /= 10) ++digits;
  return digits;
}

EulerLayout TreemapLayout(std::span<const TreemapCell> cells, const Rect& canvas) {
  Require(canvas.w > 0.0 && canvas.h > 0.0, ErrorCode::kInvalidArgument,
          "treemap canvas has zero area");
  Require(!cells.empty(), ErrorCode::kInvalidArgument, "treemap needs at least one cell");
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto& cell : cells) {
    std::size_t count = 0;
    for (const auto& cluster : cell.clusters) {
      Require(!cluster.empty(), ErrorCode::kInvalidArgument, "treemap cluster is empty");
      count += cluster.size();
    }
    Require(count > 0, ErrorCode::kInvalidArgument, "treemap cell is empty");
    sizes.push_back(count);
    total += count;
  }

  EulerLayout layout;
  layout.canvas = canvas;
  double x = canvas.x;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellBox box;
    box.signature = cells[c].signature;
    const double w = c + 1 == cells.size()
                         ? canvas.x + canvas.w - x
                         : canvas.w * static_cast<double>(sizes[c]) / static_cast<double>(total);
    box.rect = Rect{x, canvas.y, w, canvas.h};
    x += w;
    double y = box.rect.y;
    for (std::size_t k = 0; k < cells[c].clusters.size(); ++k) {
      const auto& members = cells[c].clusters[k];
      ClusterBox cluster;
      cluster.members = members;
      std::sort(cluster.members.begin(), cluster.members.end());
      cluster.glyphs = GlyphCount(static_cast<int>(members.size()));
      const double h = k + 1 == cells[c].clusters.size()
                           ? box.rect.y + box.rect.h - y
                           : box.rect.h * static_cast<double>(members.size()) /
                                 static_cast<double>(sizes[c]);
      cluster.rect = Rect{box.rect.x, y, box.rect.w, h};
      y += h;
      box.members.insert(box.members.end(), members.begin(), members.end());
      box.clusters.push_back(std::move(cluster));
    }
    std::sort(box.members.begin(), box.members.end());
    layout.cells.push_back(std::move(box));
  }
  return layout;
}

}  // namespace pathlens
