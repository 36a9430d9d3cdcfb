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

#include "pathlens/neuronview.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parallel.h"
#include "pathlens/error.h"

namespace pathlens {

std::vector<double> NormalizeMaxAbs(std::span<const double> values, double* max_abs) {
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  if (max_abs != nullptr) *max_abs = scale;
  std::vector<double> out(values.size(), 0.0);
  if (scale == 0.0) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::clamp(values[i] / scale, -1.0, 1.0);
  }
  return out;
}

HeatMap ActivationHeatmap(const ModelGraph& model, const ActivationTrace& trace, int layer,
                          int feature_map) {
  Require(layer >= 0 && static_cast<std::size_t>(layer) < trace.activations.size(),
          ErrorCode::kOutOfRange, "layer index out of range");
  const Tensor& act = trace.activation(layer);
  Require(feature_map >= 0 && feature_map < act.shape().channels, ErrorCode::kOutOfRange,
          "feature map " + std::to_string(feature_map) + " out of range",
          model.node(layer).id);
  HeatMap map;
  map.layer = model.node(layer).id;
  map.feature_map = feature_map;
  map.height = act.shape().height;
  map.width = act.shape().width;
  map.grid = NormalizeMaxAbs(act.channel(feature_map), &map.max_abs);
  return map;
}

double TargetActivation(const ModelGraph& model, std::span<const Tensor> activations,
                        const NeuronTarget& target) {
  Require(target.layer >= 0 && static_cast<std::size_t>(target.layer) < model.size(),
          ErrorCode::kOutOfRange, "target layer out of range");
  const Tensor& act = activations[target.layer];
  const Shape& s = act.shape();
  Require(target.feature_map >= 0 && target.feature_map < s.channels, ErrorCode::kOutOfRange,
          "target feature map out of range", model.node(target.layer).id);
  Require(target.y.has_value() == target.x.has_value(), ErrorCode::kInvalidArgument,
          "a neuron target needs both y and x");
  if (target.is_neuron()) {
    Require(*target.y >= 0 && *target.y < s.height && *target.x >= 0 && *target.x < s.width,
            ErrorCode::kOutOfRange, "target neuron position out of range",
            model.node(target.layer).id);
    return act.at(target.feature_map, *target.y, *target.x);
  }
  return Sum(act.channel(target.feature_map)) / static_cast<double>(s.spatial());
}

int DefaultPatchSize(int height, int width) {
  return std::max(height, width) >= 224 ? 8 : 2;
}

std::vector<double> DatasetMean(const ExampleSet& examples) {
  Require(!examples.empty(), ErrorCode::kInvalidArgument, "dataset mean of an empty set");
  const Shape& shape = examples.examples.front().pixels.shape();
  std::vector<double> mean(shape.channels, 0.0);
  for (const auto& ex : examples.examples) {
    Require(ex.pixels.shape() == shape, ErrorCode::kShapeMismatch,
            "examples differ in shape");
    for (int c = 0; c < shape.channels; ++c) mean[c] += Sum(ex.pixels.channel(c));
  }
  const double n = static_cast<double>(examples.size()) * static_cast<double>(shape.spatial());
  for (double& m : mean) m /= n;
  return mean;
}

namespace {

void ApplyThreshold(DiscrepancyMap& map) {
  map.important.assign(map.deltas.size(), 0);
  map.keep.assign(static_cast<std::size_t>(map.height) * map.width, 0);
  map.degenerate = map.max_delta == 0.0;
  if (map.degenerate) return;
  const double cutoff = map.threshold * map.max_delta;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * map.cols + c;
      if (map.deltas[cell] < cutoff || map.deltas[cell] == 0.0) continue;
      map.important[cell] = 1;
      for (int y = r * map.patch_size; y < std::min(map.height, (r + 1) * map.patch_size); ++y) {
        for (int x = c * map.patch_size; x < std::min(map.width, (c + 1) * map.patch_size);
             ++x) {
          map.keep[static_cast<std::size_t>(y) * map.width + x] = 1;
        }
      }
    }
  }
}

void CheckThreshold(double threshold) {
  Require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::kInvalidArgument,
          "discrepancy threshold must lie in [0,1]");
}

}  // namespace

DiscrepancyMap ComputeDiscrepancyMap(const ModelGraph& model, const Example& example,
                                     const NeuronTarget& target,
                                     std::span<const double> fill, int patch_size,
                                     double threshold, int threads) {
  CheckExample(model, example);
  CheckThreshold(threshold);
  const Shape& shape = example.pixels.shape();
  Require(patch_size >= 1, ErrorCode::kInvalidArgument, "patch size must be >= 1");
  Require(fill.size() == static_cast<std::size_t>(shape.channels), ErrorCode::kShapeMismatch,
          "occlusion fill needs one value per input channel");

  DiscrepancyMap map;
  map.layer = model.node(target.layer).id;
  map.feature_map = target.feature_map;
  map.y = target.y;
  map.x = target.x;
  map.patch_size = patch_size;
  map.threshold = threshold;
  map.height = shape.height;
  map.width = shape.width;
  map.rows = (shape.height + patch_size - 1) / patch_size;
  map.cols = (shape.width + patch_size - 1) / patch_size;

  const double base = TargetActivation(model, RunForward(model, example.pixels), target);
  map.deltas.assign(static_cast<std::size_t>(map.rows) * map.cols, 0.0);
  internal::ParallelFor(map.deltas.size(), threads, [&](std::size_t cell) {
    const int r = static_cast<int>(cell) / map.cols;
    const int c = static_cast<int>(cell) % map.cols;
    Tensor occluded = example.pixels;
    for (int ch = 0; ch < shape.channels; ++ch) {
      for (int y = r * patch_size; y < std::min(shape.height, (r + 1) * patch_size); ++y) {
        for (int x = c * patch_size; x < std::min(shape.width, (c + 1) * patch_size); ++x) {
          occluded.at(ch, y, x) = fill[ch];
        }
      }
    }
    map.deltas[cell] = std::abs(TargetActivation(model, RunForward(model, occluded), target) -
                                base);
  });
  for (double d : map.deltas) map.max_delta = std::max(map.max_delta, d);
  ApplyThreshold(map);
  return map;
}

DiscrepancyMap Rethreshold(const DiscrepancyMap& map, double threshold) {
  CheckThreshold(threshold);
  DiscrepancyMap out = map;
  out.threshold = threshold;
  ApplyThreshold(out);
  return out;
}

nlohmann::json ToJson(const HeatMap& heatmap) {
  return {{"layer", heatmap.layer},   {"feature_map", heatmap.feature_map},
          {"height", heatmap.height}, {"width", heatmap.width},
          {"max_abs", heatmap.max_abs}, {"grid", heatmap.grid}};
}

nlohmann::json ToJson(const DiscrepancyMap& map) {
  nlohmann::json target = {{"layer", map.layer}, {"feature_map", map.feature_map}};
  if (map.y) {
    target["y"] = *map.y;
    target["x"] = *map.x;
    target["scalar"] = "neuron";
  } else {
    target["scalar"] = "feature_map_mean";
  }
  return {{"image", map.image_id},
          {"target", target},
          {"patch_size", map.patch_size},
          {"threshold", map.threshold},
          {"height", map.height},
          {"width", map.width},
          {"rows", map.rows},
          {"cols", map.cols},
          {"deltas", map.deltas},
          {"important", map.important},
          {"keep", map.keep},
          {"max_delta", map.max_delta},
          {"degenerate", map.degenerate}};
}

namespace {

int Byte(double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

std::string HeatMapPpm(const HeatMap& heatmap, int scale) {
  Require(scale >= 1, ErrorCode::kInvalidArgument, "scale must be >= 1");
  std::ostringstream out;
  out << "P3\n" << heatmap.width * scale << ' ' << heatmap.height * scale << "\n255\n";
  for (int y = 0; y < heatmap.height * scale; ++y) {
    for (int x = 0; x < heatmap.width * scale; ++x) {
      const double v = heatmap.at(y / scale, x / scale);
      const int red = v < 0 ? Byte(-v) : 0;
      const int green = v > 0 ? Byte(v) : 0;
      out << red << ' ' << green << " 0" << (x + 1 == heatmap.width * scale ? '\n' : ' ');
    }
  }
  return out.str();
}

std::string DiscrepancyMaskPgm(const DiscrepancyMap& map) {
  std::ostringstream out;
  out << "P2\n" << map.width << ' ' << map.height << "\n255\n";
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      out << (map.keep[static_cast<std::size_t>(y) * map.width + x] ? 255 : 0)
          << (x + 1 == map.width ? '\n' : ' ');
    }
  }
  return out.str();
}

std::string DimmedPreviewPpm(const Example& example, const DiscrepancyMap& map, double dim) {
  const Shape& s = example.pixels.shape();
  Require(s.height == map.height && s.width == map.width, ErrorCode::kShapeMismatch,
          "preview image does not match the discrepancy map");
  std::ostringstream out;
  out << "P3\n" << s.width << ' ' << s.height << "\n255\n";
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double factor = map.keep[static_cast<std::size_t>(y) * s.width + x] ? 1.0 : dim;
      for (int ch = 0; ch < 3; ++ch) {
        const int source = s.channels == 1 ? 0 : std::min(ch, s.channels - 1);
        out << Byte(example.pixels.at(source, y, x) * factor)
            << (ch == 2 && x + 1 == s.width ? '\n' : ' ');
      }
    }
  }
  return out.str();
}

}  // namespace pathlens
