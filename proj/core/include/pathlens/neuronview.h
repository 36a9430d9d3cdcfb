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

#ifndef PATHLENS_NEURONVIEW_H_
#define PATHLENS_NEURONVIEW_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathlens/engine.h"
#include "pathlens/model.h"

namespace pathlens {

// Activation grid of one feature map scaled into [-1, 1] by its max |value|.
// Negative cells render red, positive cells green.
struct HeatMap {
  std::string layer;
  int feature_map = 0;
  int height = 0;
  int width = 0;
  double max_abs = 0.0;       // scale used; 0 for an all-zero map
  std::vector<double> grid;   // row-major

  double at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }
};

// Max-abs normalization; all-zero input stays all-zero.
std::vector<double> NormalizeMaxAbs(std::span<const double> values, double* max_abs = nullptr);

HeatMap ActivationHeatmap(const ModelGraph& model, const ActivationTrace& trace, int layer,
                          int feature_map);

struct NeuronTarget {
  int layer = -1;
  int feature_map = 0;
  // A single neuron; without it the target is the feature map's spatial mean.
  std::optional<int> y;
  std::optional<int> x;

  bool is_neuron() const { return y.has_value(); }
};

double TargetActivation(const ModelGraph& model, std::span<const Tensor> activations,
                        const NeuronTarget& target);

inline constexpr double kDefaultDiscrepancyThreshold = 0.5;

// 8 for inputs of 224 pixels or more, else 2.
int DefaultPatchSize(int height, int width);

// Per-channel mean pixel value over a dataset, used as occlusion fill.
std::vector<double> DatasetMean(const ExampleSet& examples);

struct DiscrepancyMap {
  std::string image_id;
  std::string layer;
  int feature_map = 0;
  std::optional<int> y;
  std::optional<int> x;
  int patch_size = 0;
  double threshold = 0.0;
  int height = 0;  // image pixels
  int width = 0;
  int rows = 0;    // ceil(height / patch_size)
  int cols = 0;
  std::vector<double> deltas;        // |change in target|, rows x cols
  std::vector<std::uint8_t> important;
  std::vector<std::uint8_t> keep;    // per pixel, height x width
  double max_delta = 0.0;
  bool degenerate = false;           // no patch moves the target

  bool is_important(int r, int c) const {
    return important[static_cast<std::size_t>(r) * cols + c] != 0;
  }
};

DiscrepancyMap ComputeDiscrepancyMap(const ModelGraph& model, const Example& example,
                                     const NeuronTarget& target,
                                     std::span<const double> fill, int patch_size,
                                     double threshold = kDefaultDiscrepancyThreshold,
                                     int threads = 1);

// Recomputes the important mask and preview for another threshold.
DiscrepancyMap Rethreshold(const DiscrepancyMap& map, double threshold);

nlohmann::json ToJson(const HeatMap& heatmap);
nlohmann::json ToJson(const DiscrepancyMap& map);

// Plain-text netpbm dumps. `scale` repeats each cell as a scale x scale block.
std::string HeatMapPpm(const HeatMap& heatmap, int scale = 1);
std::string DiscrepancyMaskPgm(const DiscrepancyMap& map);
std::string DimmedPreviewPpm(const Example& example, const DiscrepancyMap& map,
                             double dim = 0.25);

}  // namespace pathlens

#endif  // PATHLENS_NEURONVIEW_H_
