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

#ifndef PATHLENS_LAYOUT_H_
#define PATHLENS_LAYOUT_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathlens/extraction.h"
#include "pathlens/model.h"
#include "pathlens/stats.h"

namespace pathlens {

// ---------------------------------------------------------------------------
// Layer level

struct TreecutResult {
  std::vector<int> visible;  // hierarchy node indices, in preorder
  std::vector<double> doi;   // per hierarchy node
  int budget = 0;
};

// DOI(node) = max over analyzed layers under it of (1 - similarity); nodes
// without analyzed layers get 0.
std::vector<double> ComputeDoi(const ModelGraph& model,
                               const std::map<std::string, double>& layer_similarity);

// Greedy refinement from the root's children: repeatedly expand the
// expandable visible node of highest DOI whose expansion keeps the visible
// count within budget. Ties go to the earlier node in preorder.
TreecutResult Treecut(const Hierarchy& hierarchy, std::span<const double> doi, int budget);

// Replace `node` with its children (no-op for leaves or invisible nodes).
std::vector<int> ExpandNode(const Hierarchy& hierarchy, std::span<const int> visible, int node);
// Replace every visible descendant of `node` with `node`.
std::vector<int> CollapseNode(const Hierarchy& hierarchy, std::span<const int> visible,
                              int node);

// Visible nodes ordered by their earliest layer (topological), ties by preorder.
std::vector<int> TopologicalVisibleOrder(const Hierarchy& hierarchy,
                                         std::span<const int> visible);

// A break between two consecutive nodes cuts a building block when their
// lowest common ancestor is not the root.
bool BreakCutsBlock(const Hierarchy& hierarchy, int left, int right);

struct Segmentation {
  std::vector<int> breaks;  // break after item i (0-based), ascending
  double cost = 0.0;
};

// Printing-neatly dynamic program: minimize the sum over all segments but the
// last of (trailing empty space + lambda * cut). cuts[i] says whether a break
// after item i splits a block. Throws when an item is wider than the line.
Segmentation SegmentSequence(std::span<const double> widths, std::span<const bool> cuts,
                             double line_width, double lambda);
double SegmentationCost(std::span<const double> widths, std::span<const bool> cuts,
                        double line_width, double lambda, std::span<const int> breaks);

struct PlacedNode {
  int node = -1;  // hierarchy index
  double x = 0.0;
  double width = 0.0;
};

struct SegmentedLayout {
  std::vector<std::vector<PlacedNode>> rows;
  std::vector<double> empty_space;  // e_i per break
  std::vector<int> cuts;            // c_i per break
  double lambda = 0.0;
  double line_width = 0.0;
  double cost = 0.0;
};

struct SegmentItem {
  int node = -1;
  double width = 0.0;
};

SegmentedLayout SegmentDag(const Hierarchy& hierarchy, std::span<const SegmentItem> items,
                           double line_width, double lambda);

struct DotMark {
  std::string layer;
  double value = 0.0;
  double x = 0.0;  // value mapped to [0,1]
};

// Natural-range mapping: cosine [-1,1] affine, Jaccard identity, mean
// activation scaled by `scale` (the largest magnitude observed), activation
// difference mapped from [-scale, scale].
double DotPosition(StatisticKind kind, double value, double scale);
double StatisticScale(StatisticKind kind, std::span<const LayerStatistic> stats);

// One dot per analyzed layer under `node`. A layer counts as analyzed when it
// has any row in `stats`; an analyzed layer without a `kind` row is an error.
std::vector<DotMark> DotPlotData(const ModelGraph& model, int node, StatisticKind kind,
                             std::span<const LayerStatistic> stats, std::string_view group = {});

// ---------------------------------------------------------------------------
// Feature-map level

struct EulerCell {
  std::uint32_t signature = 0;  // bit d set: member of datapath d's critical set
  std::vector<int> feature_maps;
};

std::vector<EulerCell> EulerCells(std::span<const Datapath> datapaths, std::string_view layer);

struct Cluster {
  std::vector<int> members;  // feature-map ids
  std::vector<double> centroid;
};

struct Clustering {
  std::vector<Cluster> clusters;  // nonempty, ordered by smallest member
  int k_requested = 0;
  int k_used = 0;
  bool clamped = false;
};

inline constexpr int kDefaultClusterCount = 5;
inline constexpr int kKMeansIterations = 50;
inline constexpr std::uint64_t kKMeansSeed = 0x5eed;

// Lloyd's k-means with farthest-point seeding; the first center comes from a
// fixed-seed generator. points[i] is the profile of members[i].
Clustering KMeans(std::span<const std::vector<double>> points, std::span<const int> members,
                  int k, std::uint64_t seed = kKMeansSeed, int iterations = kKMeansIterations);

// Per member: the per-example mean activation of that feature map,
// concatenated across the groups.
std::vector<std::vector<double>> FeatureMapProfiles(
    std::span<const std::span<const ActivationTrace>> groups, int layer,
    std::span<const int> members);

struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
};

// N_R = floor(log10(N_C)) + 1, i.e. the decimal digit count of N_C.
int GlyphCount(int cluster_size);

struct ClusterBox {
  std::vector<int> members;
  int glyphs = 0;
  Rect rect;
  double mean_importance = 0.0;
  double mean_activation = 0.0;
  double activation_difference = 0.0;
};

struct CellBox {
  std::uint32_t signature = 0;
  std::vector<int> members;
  Rect rect;
  std::vector<ClusterBox> clusters;
};

struct EulerLayout {
  std::string layer;
  Rect canvas;
  std::vector<CellBox> cells;
};

struct TreemapCell {
  std::uint32_t signature = 0;
  std::vector<std::vector<int>> clusters;  // member ids per cluster
};

// Slice-and-dice: cells split the canvas along x in proportion to their
// member counts; clusters split each cell along y likewise.
EulerLayout TreemapLayout(std::span<const TreemapCell> cells, const Rect& canvas);

}  // namespace pathlens

#endif  // PATHLENS_LAYOUT_H_
