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

#include "pathlens/extraction.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "parallel.h"
#include "pathlens/error.h"
#include "pathlens/io.h"

namespace pathlens {

using nlohmann::json;

void ExtractionConfig::Validate() const {
  Require(threshold > 0.0 && threshold < 1.0, ErrorCode::kInvalidArgument,
          "threshold must lie in (0,1)");
  Require(max_iterations >= 1, ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  Require(tolerance > 0.0 && std::isfinite(tolerance), ErrorCode::kInvalidArgument,
          "tolerance must be positive");
  if (lambda) {
    Require(*lambda >= 0.0 && std::isfinite(*lambda), ErrorCode::kInvalidArgument,
            "lambda must be finite and non-negative");
  }
  if (top_k) Require(*top_k >= 0, ErrorCode::kInvalidArgument, "top_k must be non-negative");
  Require(threads >= 1, ErrorCode::kInvalidArgument, "threads must be >= 1");
}

json ToJson(const ExtractionConfig& config) {
  json out{{"threshold", config.threshold},
           {"max_iterations", config.max_iterations},
           {"tolerance", config.tolerance},
           {"layers", config.layers},
           {"lambda", nullptr},
           {"top_k", nullptr},
           {"target_class", nullptr}};
  if (config.lambda) out["lambda"] = *config.lambda;
  if (config.top_k) out["top_k"] = *config.top_k;
  if (config.target_class) out["target_class"] = *config.target_class;
  return out;
}

ExtractionConfig ExtractionConfigFromJson(const json& doc) {
  ExtractionConfig config;
  try {
    config.threshold = doc.value("threshold", config.threshold);
    config.max_iterations = doc.value("max_iterations", config.max_iterations);
    config.tolerance = doc.value("tolerance", config.tolerance);
    if (doc.contains("layers")) config.layers = doc.at("layers").get<std::vector<std::string>>();
    if (doc.contains("lambda") && !doc.at("lambda").is_null())
      config.lambda = doc.at("lambda").get<double>();
    if (doc.contains("top_k") && !doc.at("top_k").is_null())
      config.top_k = doc.at("top_k").get<int>();
    if (doc.contains("target_class") && !doc.at("target_class").is_null())
      config.target_class = doc.at("target_class").get<int>();
    config.threads = doc.value("threads", config.threads);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed extraction config: ") + e.what());
  }
  config.Validate();
  return config;
}

double DefaultLambda(int feature_maps) {
  return 0.1 / (static_cast<double>(feature_maps) * feature_maps);
}

std::vector<double> FeatureContributions(const ActivationTrace& trace, int layer) {
  Require(trace.has_gradients(), ErrorCode::kInvalidArgument,
          "trace carries no gradients; run backward first");
  Require(layer >= 0 && static_cast<std::size_t>(layer) < trace.activations.size(),
          ErrorCode::kNotFound, "layer index out of range for trace");
  const Tensor& a = trace.activation(layer);
  const Tensor& g = trace.gradient(layer);
  Require(a.shape() == g.shape(), ErrorCode::kShapeMismatch,
          "gradient shape differs from activation shape");
  std::vector<double> q(a.shape().channels);
  for (int j = 0; j < a.shape().channels; ++j) q[j] = Dot(a.channel(j), g.channel(j));
  return q;
}

// ---------------------------------------------------------------------------
// QuadraticProgram

QuadraticProgram::QuadraticProgram(std::vector<std::vector<double>> contributions,
                                   double lambda)
    : lambda_(lambda), contributions_(std::move(contributions)) {
  Require(!contributions_.empty(), ErrorCode::kInvalidArgument,
          "quadratic program needs at least one example");
  n_ = static_cast<int>(contributions_.front().size());
  Require(n_ > 0, ErrorCode::kInvalidArgument, "layer has no feature maps");
  Require(std::isfinite(lambda_), ErrorCode::kNumeric, "lambda is not finite");
  for (const auto& q : contributions_) {
    Require(static_cast<int>(q.size()) == n_, ErrorCode::kShapeMismatch,
            "examples disagree on feature-map count");
    for (double v : q) Require(std::isfinite(v), ErrorCode::kNumeric, "contribution is NaN/Inf");
    sums_.push_back(std::accumulate(q.begin(), q.end(), 0.0));
  }
}

double QuadraticProgram::Objective(std::span<const double> z) const {
  double value = lambda_ * Dot(z, z);
  for (std::size_t k = 0; k < contributions_.size(); ++k) {
    const double proj = Dot(contributions_[k], z);
    value += proj * proj - 2.0 * sums_[k] * proj;
  }
  return value;
}

void QuadraticProgram::Gradient(std::span<const double> z, std::span<double> out) const {
  for (int j = 0; j < n_; ++j) out[j] = 2.0 * lambda_ * z[j];
  for (std::size_t k = 0; k < contributions_.size(); ++k) {
    const auto& q = contributions_[k];
    const double residual = 2.0 * (Dot(q, z) - sums_[k]);
    for (int j = 0; j < n_; ++j) out[j] += residual * q[j];
  }
}

std::vector<double> QuadraticProgram::DenseQ() const {
  std::vector<double> dense(static_cast<std::size_t>(n_) * n_, 0.0);
  for (const auto& q : contributions_)
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) dense[r * n_ + c] += q[r] * q[c];
  return dense;
}

std::vector<double> QuadraticProgram::LinearTerm() const {
  std::vector<double> b(n_, 0.0);
  for (std::size_t k = 0; k < contributions_.size(); ++k)
    for (int j = 0; j < n_; ++j) b[j] += sums_[k] * contributions_[k][j];
  return b;
}

QuadraticProgram BuildQp(std::span<const ActivationTrace> traces, int layer, double lambda) {
  Require(!traces.empty(), ErrorCode::kInvalidArgument, "no traces supplied");
  std::vector<std::vector<double>> contributions;
  contributions.reserve(traces.size());
  for (const auto& trace : traces) contributions.push_back(FeatureContributions(trace, layer));
  return QuadraticProgram(std::move(contributions), lambda);
}

// ---------------------------------------------------------------------------
// Solver

namespace {

double ProjectedGradientNorm(std::span<const double> z, std::span<const double> g) {
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double step = z[i] - std::clamp(z[i] - g[i], 0.0, 1.0);
    sum += step * step;
  }
  return std::sqrt(sum);
}

// Solves the SPD system A x = b in place (A is m x m row-major). Returns
// false when A is not numerically positive definite.
bool CholeskySolve(std::vector<double>& a, std::vector<double>& b, int m) {
  for (int j = 0; j < m; ++j) {
    double diag = a[j * m + j];
    for (int k = 0; k < j; ++k) diag -= a[j * m + k] * a[j * m + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    diag = std::sqrt(diag);
    a[j * m + j] = diag;
    for (int i = j + 1; i < m; ++i) {
      double v = a[i * m + j];
      for (int k = 0; k < j; ++k) v -= a[i * m + k] * a[j * m + k];
      a[i * m + j] = v / diag;
    }
  }
  for (int i = 0; i < m; ++i) {
    double v = b[i];
    for (int k = 0; k < i; ++k) v -= a[i * m + k] * b[k];
    b[i] = v / a[i * m + i];
  }
  for (int i = m - 1; i >= 0; --i) {
    double v = b[i];
    for (int k = i + 1; k < m; ++k) v -= a[k * m + i] * b[k];
    b[i] = v / a[i * m + i];
  }
  return true;
}

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

struct LineSearchResult {
  bool accepted = false;
  std::vector<double> z;
  double f = 0.0;
};

LineSearchResult ProjectedBacktrack(const QuadraticProgram& qp, std::span<const double> z,
                                    double f, std::span<const double> g,
                                    std::span<const double> direction) {
  const int n = qp.n();
  LineSearchResult result;
  result.z.resize(n);
  double alpha = 1.0;
  for (int attempt = 0; attempt < kMaxBacktracks; ++attempt, alpha *= 0.5) {
    double decrease = 0.0;
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      result.z[i] = std::clamp(z[i] + alpha * direction[i], 0.0, 1.0);
      decrease += g[i] * (result.z[i] - z[i]);
      moved = moved || result.z[i] != z[i];
    }
    if (!moved) break;
    if (decrease >= 0.0) continue;
    result.f = qp.Objective(result.z);
    if (result.f <= f + kArmijo * decrease) {
      result.accepted = true;
      return result;
    }
  }
  return result;
}

}  // namespace

SolveResult SolveQp(const QuadraticProgram& qp, const ExtractionConfig& config) {
  config.Validate();
  Require(std::isfinite(qp.lambda()), ErrorCode::kNumeric, "lambda is not finite");
  const int n = qp.n();
  SolveResult result;
  std::vector<double> z(n, 1.0);
  std::vector<double> g(n);
  std::vector<double> g_next(n);
  double f = qp.Objective(z);
  qp.Gradient(z, g);

  // Hessian approximation, row-major; scaled identity until the first
  // curvature pair is available.
  std::vector<double> hessian(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) hessian[i * n + i] = 1.0;
  bool have_curvature = false;

  std::vector<double> direction(n);
  std::vector<int> free_vars;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    result.projected_gradient_norm = ProjectedGradientNorm(z, g);
    if (result.projected_gradient_norm <= config.tolerance) {
      result.converged = true;
      break;
    }

    // Variables pinned at a bound by an outward-pointing gradient stay fixed.
    free_vars.clear();
    for (int i = 0; i < n; ++i) {
      const bool pinned = (z[i] <= 0.0 && g[i] > 0.0) || (z[i] >= 1.0 && g[i] < 0.0);
      if (!pinned) free_vars.push_back(i);
    }
    const int m = static_cast<int>(free_vars.size());
    std::fill(direction.begin(), direction.end(), 0.0);
    bool newton_ok = m > 0;
    if (newton_ok) {
      std::vector<double> reduced(static_cast<std::size_t>(m) * m);
      std::vector<double> rhs(m);
      for (int r = 0; r < m; ++r) {
        rhs[r] = -g[free_vars[r]];
        for (int c = 0; c < m; ++c) reduced[r * m + c] = hessian[free_vars[r] * n + free_vars[c]];
      }
      newton_ok = CholeskySolve(reduced, rhs, m);
      if (newton_ok) {
        for (int r = 0; r < m; ++r) direction[free_vars[r]] = rhs[r];
      }
    }

    LineSearchResult step;
    if (newton_ok) step = ProjectedBacktrack(qp, z, f, g, direction);
    if (!step.accepted) {
      for (int i = 0; i < n; ++i) direction[i] = -g[i];
      step = ProjectedBacktrack(qp, z, f, g, direction);
    }
    if (!step.accepted) break;  // no further decrease representable

    qp.Gradient(step.z, g_next);
    std::vector<double> s(n);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = step.z[i] - z[i];
      y[i] = g_next[i] - g[i];
    }
    const double sy = Dot(s, y);
    if (sy > 1e-14 * std::sqrt(Dot(s, s) * Dot(y, y))) {
      if (!have_curvature) {
        const double scale = Dot(y, y) / sy;
        std::fill(hessian.begin(), hessian.end(), 0.0);
        for (int i = 0; i < n; ++i) hessian[i * n + i] = scale;
        have_curvature = true;
      }
      std::vector<double> bs(n, 0.0);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) bs[r] += hessian[r * n + c] * s[c];
      const double sbs = Dot(s, bs);
      if (sbs > 0.0) {
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c)
            hessian[r * n + c] += y[r] * y[c] / sy - bs[r] * bs[c] / sbs;
      }
    }

    z = std::move(step.z);
    f = step.f;
    std::swap(g, g_next);
    ++result.iterations;
    result.objective_history.push_back(f);
  }
  result.projected_gradient_norm = ProjectedGradientNorm(z, g);
  result.converged = result.converged || result.projected_gradient_norm <= config.tolerance;
  result.objective = f;
  result.z = std::move(z);
  return result;
}

TaylorGap ComputeTaylorGap(const ModelGraph& model, const Example& example,
                           const ActivationTrace& trace, int layer, std::span<const double> z) {
  const auto q = FeatureContributions(trace, layer);
  Require(z.size() == q.size(), ErrorCode::kShapeMismatch,
          "mask length differs from channel count", model.node(layer).id);
  TaylorGap gap;
  const auto masked = MaskedProbabilities(model, example, layer, z);
  if (trace.p > 0.5) {
    gap.exact = ComplementProbability(masked, trace.target_class) -
                ComplementProbability(trace.probabilities, trace.target_class);
  } else {
    gap.exact = trace.p - masked[trace.target_class];
  }
  for (std::size_t j = 0; j < q.size(); ++j) gap.linear += (1.0 - z[j]) * q[j];
  return gap;
}

std::vector<int> SelectCritical(std::span<const double> z, const ExtractionConfig& config) {
  std::vector<int> critical;
  if (config.top_k) {
    std::vector<int> order(z.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return z[a] > z[b]; });
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(*config.top_k), z.size());
    critical.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(critical.begin(), critical.end());
    return critical;
  }
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] >= config.threshold) critical.push_back(static_cast<int>(j));
  }
  return critical;
}

// ---------------------------------------------------------------------------
// Datapath

const LayerDatapath* Datapath::Find(std::string_view layer) const {
  for (const auto& l : layers) {
    if (l.layer == layer) return &l;
  }
  return nullptr;
}

const LayerDatapath& Datapath::At(std::string_view layer) const {
  const LayerDatapath* found = Find(layer);
  if (!found) Fail(ErrorCode::kNotFound, "layer not covered by datapath", std::string(layer));
  return *found;
}

std::vector<std::pair<int, int>> AdjacentLayers(const ModelGraph& model,
                                                std::span<const int> layers) {
  const std::set<int> analyzed(layers.begin(), layers.end());
  std::set<std::pair<int, int>> pairs;
  for (int from : analyzed) {
    std::vector<int> stack(model.consumers(from).begin(), model.consumers(from).end());
    std::set<int> seen;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (!seen.insert(node).second) continue;
      if (analyzed.count(node)) {
        pairs.emplace(from, node);
        continue;
      }
      for (int next : model.consumers(node)) stack.push_back(next);
    }
  }
  return {pairs.begin(), pairs.end()};
}

std::vector<int> ResolveCandidateLayers(const ModelGraph& model, const ExtractionConfig& config) {
  std::vector<int> layers;
  if (config.layers.empty()) {
    layers = model.DefaultCandidateLayers();
  } else {
    for (const auto& id : config.layers) layers.push_back(model.IndexOrThrow(id));
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  }
  Require(!layers.empty(), ErrorCode::kInvalidArgument, "no candidate layers to analyze");
  return layers;
}

int SharedTargetClass(const ModelGraph& model, const ExampleSet& examples) {
  Require(!examples.empty(), ErrorCode::kInvalidArgument, "example set is empty", examples.name);
  std::set<int> predicted;
  std::set<int> labels;
  bool all_adversarial = true;
  for (const auto& ex : examples.examples) {
    predicted.insert(Forward(model, ex).predicted_class);
    labels.insert(ex.label);
    all_adversarial = all_adversarial && ex.group_tag == "adversarial";
  }
  if (all_adversarial) {
    Require(predicted.size() == 1, ErrorCode::kInvalidArgument,
            "adversarial examples do not share one predicted class; set target_class",
            examples.name);
    return *predicted.begin();
  }
  if (labels.size() == 1) return *labels.begin();
  Require(predicted.size() == 1, ErrorCode::kInvalidArgument,
          "examples share neither a label nor a prediction; set target_class", examples.name);
  return *predicted.begin();
}

std::vector<ActivationTrace> ComputeTraces(const ModelGraph& model, const ExampleSet& examples,
                                           int target_class, int threads) {
  std::vector<ActivationTrace> traces(examples.size());
  internal::ParallelFor(examples.size(), threads, [&](std::size_t k) {
    traces[k] = TraceWithGradients(model, examples.examples[k], target_class);
  });
  return traces;
}

Datapath ExtractDatapathFromTraces(const ModelGraph& model,
                                   std::span<const ActivationTrace> traces,
                                   const ExtractionConfig& config, GroupDescriptor group) {
  config.Validate();
  Require(!traces.empty(), ErrorCode::kInvalidArgument, "example set is empty", group.name);
  const std::vector<int> layers = ResolveCandidateLayers(model, config);

  Datapath datapath;
  datapath.group = std::move(group);
  datapath.group.count = traces.size();
  datapath.group.target_class = traces.front().target_class;
  datapath.config = config;
  datapath.layers.resize(layers.size());
  internal::ParallelFor(layers.size(), config.threads, [&](std::size_t idx) {
    const int node = layers[idx];
    const int n = model.node(node).channel_count();
    const double lambda = config.lambda.value_or(DefaultLambda(n));
    const QuadraticProgram qp = BuildQp(traces, node, lambda);
    SolveResult solved = SolveQp(qp, config);
    LayerDatapath& out = datapath.layers[idx];
    out.layer = model.node(node).id;
    out.node = node;
    out.critical = SelectCritical(solved.z, config);
    out.importance = std::move(solved.z);
    out.lambda = lambda;
    out.threshold = config.threshold;
    out.iterations = solved.iterations;
    out.converged = solved.converged;
  });

  std::map<int, const LayerDatapath*> by_node;
  for (const auto& l : datapath.layers) by_node[l.node] = &l;
  for (const auto& [from, to] : AdjacentLayers(model, layers)) {
    for (int a : by_node[from]->critical) {
      for (int b : by_node[to]->critical) {
        datapath.edges.push_back({by_node[from]->layer, a, by_node[to]->layer, b});
      }
    }
  }
  return datapath;
}

Datapath ExtractDatapath(const ModelGraph& model, const ExampleSet& examples,
                         const ExtractionConfig& config) {
  config.Validate();
  Require(!examples.empty(), ErrorCode::kInvalidArgument, "example set is empty", examples.name);
  for (const auto& ex : examples.examples) CheckExample(model, ex);
  const int target = config.target_class ? *config.target_class
                                         : SharedTargetClass(model, examples);
  const auto traces = ComputeTraces(model, examples, target, config.threads);
  GroupDescriptor group{examples.name, ExampleSetHash(examples), examples.size(), target};
  Datapath datapath = ExtractDatapathFromTraces(model, traces, config, std::move(group));
  datapath.model_hash = ModelHash(model);
  return datapath;
}

namespace {

json DatapathBody(const Datapath& datapath) {
  json layers = json::array();
  for (const auto& l : datapath.layers) {
    layers.push_back({{"layer", l.layer},
                      {"z", l.importance},
                      {"critical", l.critical},
                      {"tau", l.threshold},
                      {"lambda", l.lambda},
                      {"iterations", l.iterations},
                      {"converged", l.converged}});
  }
  json edges = json::array();
  for (const auto& e : datapath.edges) {
    edges.push_back({e.from_layer, e.from_map, e.to_layer, e.to_map});
  }
  json config = ToJson(datapath.config);
  return json{{"format", "pathlens-datapath"},
              {"version", 1},
              {"model_hash", datapath.model_hash},
              {"group",
               {{"name", datapath.group.name},
                {"hash", datapath.group.hash},
                {"count", datapath.group.count},
                {"target_class", datapath.group.target_class}}},
              {"config", std::move(config)},
              {"layers", std::move(layers)},
              {"edges", std::move(edges)}};
}

}  // namespace

std::string DatapathId(const Datapath& datapath) { return JsonHash(DatapathBody(datapath)); }

json ToJson(const Datapath& datapath) {
  json doc = DatapathBody(datapath);
  doc["hash"] = JsonHash(doc);
  return doc;
}

Datapath DatapathFromJson(const json& doc) {
  try {
    Require(doc.value("format", "") == "pathlens-datapath", ErrorCode::kFormat,
            "not a pathlens datapath document");
    Datapath dp;
    dp.model_hash = doc.at("model_hash").get<std::string>();
    const auto& group = doc.at("group");
    dp.group.name = group.at("name").get<std::string>();
    dp.group.hash = group.at("hash").get<std::string>();
    dp.group.count = group.at("count").get<std::size_t>();
    dp.group.target_class = group.at("target_class").get<int>();
    dp.config = ExtractionConfigFromJson(doc.at("config"));
    for (const auto& l : doc.at("layers")) {
      LayerDatapath layer;
      layer.layer = l.at("layer").get<std::string>();
      layer.importance = l.at("z").get<std::vector<double>>();
      layer.critical = l.at("critical").get<std::vector<int>>();
      layer.threshold = l.at("tau").get<double>();
      layer.lambda = l.at("lambda").get<double>();
      layer.iterations = l.value("iterations", 0);
      layer.converged = l.value("converged", false);
      for (double z : layer.importance) {
        Require(z >= 0.0 && z <= 1.0, ErrorCode::kInvariantViolation,
                "importance outside [0,1]", layer.layer);
      }
      for (int c : layer.critical) {
        Require(c >= 0 && c < static_cast<int>(layer.importance.size()),
                ErrorCode::kInvariantViolation, "critical id out of range", layer.layer);
      }
      dp.layers.push_back(std::move(layer));
    }
    for (const auto& e : doc.at("edges")) {
      dp.edges.push_back({e.at(0).get<std::string>(), e.at(1).get<int>(),
                          e.at(2).get<std::string>(), e.at(3).get<int>()});
    }
    if (doc.contains("hash")) {
      Require(doc.at("hash").get<std::string>() == DatapathId(dp), ErrorCode::kFormat,
              "datapath content hash mismatch");
    }
    return dp;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed datapath: ") + e.what());
  }
}

}  // namespace pathlens
