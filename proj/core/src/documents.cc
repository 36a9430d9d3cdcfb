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

#include "pathlens/documents.h"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include "pathlens/error.h"

namespace pathlens {

std::vector<double> DoiFromStatistics(const ModelGraph& model,
                                      std::span<const LayerStatistic> stats) {
  std::map<std::string, double> similarity;
  for (const auto& s : stats) {
    if (s.kind == StatisticKind::kActivationSimilarity) similarity.emplace(s.layer, s.value);
  }
  return ComputeDoi(model, similarity);
}

LayerLayout BuildLayerLayout(const ModelGraph& model, std::span<const LayerStatistic> stats,
                             const LayerLayoutOptions& options) {
  const auto doi = DoiFromStatistics(model, stats);
  const auto cut = Treecut(model.hierarchy(), doi, options.budget);
  return BuildLayerLayout(model, stats, options, cut.visible);
}

LayerLayout BuildLayerLayout(const ModelGraph& model, std::span<const LayerStatistic> stats,
                             const LayerLayoutOptions& options, std::vector<int> visible) {
  Require(options.layer_width > 0.0 && options.group_width > 0.0, ErrorCode::kInvalidArgument,
          "node widths must be positive");
  Require(options.lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda_seg must be >= 0");
  const Hierarchy& h = model.hierarchy();
  LayerLayout out;
  out.treecut.budget = options.budget;
  out.treecut.doi = DoiFromStatistics(model, stats);
  out.treecut.visible = std::move(visible);
  out.order = TopologicalVisibleOrder(h, out.treecut.visible);

  std::vector<SegmentItem> items;
  for (int node : out.order) {
    items.push_back({node, h.IsLeaf(node) ? options.layer_width : options.group_width});
  }
  out.segments = SegmentDag(h, items, options.line_width, options.lambda);

  auto& doc = out.document;
  doc["format"] = kLayerLayoutFormat;
  doc["statistic"] = StatisticKindName(options.statistic);
  if (!options.group.empty()) doc["group"] = options.group;
  doc["budget"] = options.budget;
  doc["line_width"] = options.line_width;
  doc["lambda_seg"] = options.lambda;
  doc["cost"] = out.segments.cost;
  auto describe = [&](int node) {
    nlohmann::json entry = {{"node", h.Path(node)}, {"doi", out.treecut.doi[node]}};
    if (h.IsLeaf(node)) {
      const LayerNode& layer = model.node(h.node(node).layer);
      entry["type"] = "layer";
      entry["layer"] = layer.id;
      entry["kind"] = LayerKindName(layer.kind);
    } else {
      entry["type"] = "group";
      std::vector<std::string> layers;
      for (int l : h.LayersUnder(node)) layers.push_back(model.node(l).id);
      entry["layers"] = layers;
      entry["expandable"] = !h.node(node).children.empty();
    }
    return entry;
  };
  doc["visible"] = nlohmann::json::array();
  for (int node : out.treecut.visible) doc["visible"].push_back(describe(node));
  doc["rows"] = nlohmann::json::array();
  for (const auto& row : out.segments.rows) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& placed : row) {
      nlohmann::json box = describe(placed.node);
      box["x"] = placed.x;
      box["width"] = placed.width;
      box["dots"] = nlohmann::json::array();
      for (const auto& dot : DotPlotData(model, placed.node, options.statistic, stats,
                                         options.group)) {
        box["dots"].push_back({{"layer", dot.layer}, {"value", dot.value}, {"x", dot.x}});
      }
      boxes.push_back(std::move(box));
    }
    doc["rows"].push_back(std::move(boxes));
  }
  doc["breaks"] = nlohmann::json::array();
  for (std::size_t b = 0; b < out.segments.empty_space.size(); ++b) {
    doc["breaks"].push_back({{"after", h.Path(out.segments.rows[b].back().node)},
                             {"empty_space", out.segments.empty_space[b]},
                             {"cuts_block", out.segments.cuts[b] != 0}});
  }
  return out;
}

std::string_view ColorEncodingName(ColorEncoding encoding) {
  switch (encoding) {
    case ColorEncoding::kImportance:
      return "importance";
    case ColorEncoding::kActivation:
      return "activation";
    case ColorEncoding::kActivationDifference:
      return "activation_difference";
  }
  return "importance";
}

ColorEncoding ParseColorEncoding(std::string_view name) {
  for (auto e : {ColorEncoding::kImportance, ColorEncoding::kActivation,
                 ColorEncoding::kActivationDifference}) {
    if (ColorEncodingName(e) == name) return e;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown color encoding '" + std::string(name) + "'");
}

FeatureMapLayout BuildFeatureMapLayout(const ModelGraph& model,
                                       std::span<const FeatureMapGroup> groups,
                                       std::string_view layer,
                                       const FeatureMapLayoutOptions& options) {
  Require(!groups.empty() && groups.size() <= 4, ErrorCode::kInvalidArgument,
          "feature-map layouts compare between one and four groups");
  const int layer_index = model.IndexOrThrow(layer);
  std::vector<Datapath> datapaths;
  std::vector<std::span<const ActivationTrace>> trace_groups;
  for (const auto& g : groups) {
    Require(g.datapath != nullptr, ErrorCode::kInvalidArgument, "group without a datapath",
            g.name);
    datapaths.push_back(*g.datapath);
    trace_groups.push_back(g.traces);
  }
  const auto cells = EulerCells(datapaths, layer);

  FeatureMapLayout out;
  std::vector<TreemapCell> treemap_cells;
  for (const auto& cell : cells) {
    const auto profiles = FeatureMapProfiles(trace_groups, layer_index, cell.feature_maps);
    const Clustering clustering = KMeans(profiles, cell.feature_maps, options.k, options.seed);
    out.clamped = out.clamped || clustering.clamped;
    TreemapCell tc{cell.signature, {}};
    for (const auto& c : clustering.clusters) tc.clusters.push_back(c.members);
    treemap_cells.push_back(std::move(tc));
  }
  if (treemap_cells.empty()) {
    out.layout.layer = std::string(layer);
    out.layout.canvas = options.canvas;
  } else {
    out.layout = TreemapLayout(treemap_cells, options.canvas);
    out.layout.layer = std::string(layer);
  }

  for (auto& cell : out.layout.cells) {
    for (auto& cluster : cell.clusters) {
      double importance = 0.0;
      for (const auto& dp : datapaths) {
        const auto& z = dp.At(layer).importance;
        for (int j : cluster.members) importance += z.at(j);
      }
      cluster.mean_importance =
          importance / static_cast<double>(datapaths.size() * cluster.members.size());
      std::size_t count = 0;
      double activation = 0.0;
      for (const auto& traces : trace_groups) {
        if (traces.empty()) continue;
        activation += MeanActivation(traces, layer_index, cluster.members) *
                      static_cast<double>(traces.size());
        count += traces.size();
      }
      cluster.mean_activation = count > 0 ? activation / static_cast<double>(count) : 0.0;
      if (trace_groups.size() >= 2 && !trace_groups[0].empty() && !trace_groups[1].empty()) {
        double diff = 0.0;
        for (int j : cluster.members) {
          diff += ActivationDifference(trace_groups[0], trace_groups[1], layer_index, j);
        }
        cluster.activation_difference = diff / static_cast<double>(cluster.members.size());
      }
    }
  }

  auto rect_json = [](const Rect& r) {
    return nlohmann::json{{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
  };
  auto& doc = out.document;
  doc["format"] = kFeatureMapLayoutFormat;
  doc["layer"] = std::string(layer);
  doc["color"] = ColorEncodingName(options.color);
  doc["k"] = options.k;
  doc["k_clamped"] = out.clamped;
  doc["canvas"] = rect_json(options.canvas);
  doc["groups"] = nlohmann::json::array();
  for (const auto& g : groups) doc["groups"].push_back(g.name);
  doc["cells"] = nlohmann::json::array();
  for (const auto& cell : out.layout.cells) {
    std::vector<std::string> members;
    for (std::size_t d = 0; d < groups.size(); ++d) {
      if (cell.signature & (1u << d)) members.push_back(groups[d].name);
    }
    nlohmann::json cj = {{"signature", members},
                         {"mask", cell.signature},
                         {"feature_maps", cell.members},
                         {"rect", rect_json(cell.rect)},
                         {"clusters", nlohmann::json::array()}};
    for (const auto& cluster : cell.clusters) {
      double color = cluster.mean_importance;
      if (options.color == ColorEncoding::kActivation) color = cluster.mean_activation;
      if (options.color == ColorEncoding::kActivationDifference) {
        color = cluster.activation_difference;
      }
      cj["clusters"].push_back({{"members", cluster.members},
                                {"size", cluster.members.size()},
                                {"glyphs", cluster.glyphs},
                                {"rect", rect_json(cluster.rect)},
                                {"mean_importance", cluster.mean_importance},
                                {"mean_activation", cluster.mean_activation},
                                {"activation_difference", cluster.activation_difference},
                                {"color_value", color}});
    }
    doc["cells"].push_back(std::move(cj));
  }
  return out;
}

namespace {

std::string Num(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

std::string LayerLayoutSvg(const nlohmann::json& document) {
  constexpr double kUnit = 60.0;
  constexpr double kRow = 70.0;
  const double width = document.at("line_width").get<double>() * kUnit;
  const std::size_t rows = document.at("rows").size();
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(width) << "\" height=\""
      << Num(rows * kRow + 10) << "\">\n";
  for (std::size_t r = 0; r < rows; ++r) {
    const double top = 5 + r * kRow;
    for (const auto& box : document["rows"][r]) {
      const double x = box.at("x").get<double>() * kUnit;
      const double w = box.at("width").get<double>() * kUnit;
      const bool group = box.at("type") == "group";
      svg << "  <rect x=\"" << Num(x + 2) << "\" y=\"" << Num(top) << "\" width=\""
          << Num(w - 4) << "\" height=\"50\" fill=\"" << (group ? "#e8eef7" : "#f4f4f4")
          << "\" stroke=\"#555\"/>\n";
      svg << "  <text x=\"" << Num(x + 6) << "\" y=\"" << Num(top + 14)
          << "\" font-size=\"9\">" << box.at("node").get<std::string>() << "</text>\n";
      for (const auto& dot : box.at("dots")) {
        svg << "  <circle cx=\"" << Num(x + 6 + dot.at("x").get<double>() * (w - 12))
            << "\" cy=\"" << Num(top + 35) << "\" r=\"3\" fill=\"#c33\"/>\n";
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string FeatureMapLayoutSvg(const nlohmann::json& document) {
  const auto& canvas = document.at("canvas");
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\""
      << Num(canvas.at("x").get<double>()) << ' ' << Num(canvas.at("y").get<double>()) << ' '
      << Num(canvas.at("w").get<double>()) << ' ' << Num(canvas.at("h").get<double>())
      << "\">\n";
  for (const auto& cell : document.at("cells")) {
    for (const auto& cluster : cell.at("clusters")) {
      const auto& r = cluster.at("rect");
      const int glyphs = cluster.at("glyphs").get<int>();
      const double h = r.at("h").get<double>() / glyphs;
      for (int g = 0; g < glyphs; ++g) {
        svg << "  <rect x=\"" << Num(r.at("x").get<double>()) << "\" y=\""
            << Num(r.at("y").get<double>() + g * h) << "\" width=\""
            << Num(r.at("w").get<double>()) << "\" height=\"" << Num(h)
            << "\" fill=\"#9cb\" stroke=\"#fff\" stroke-width=\"0.3\"/>\n";
      }
    }
    const auto& r = cell.at("rect");
    svg << "  <rect x=\"" << Num(r.at("x").get<double>()) << "\" y=\""
        << Num(r.at("y").get<double>()) << "\" width=\"" << Num(r.at("w").get<double>())
        << "\" height=\"" << Num(r.at("h").get<double>())
        << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"0.5\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pathlens
