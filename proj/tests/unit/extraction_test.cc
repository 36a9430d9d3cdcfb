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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "error_code.h"
#include "nets.h"
#include "oracles.h"
#include "pathlens/engine.h"
#include "pathlens/extraction.h"
#include "pathlens/io.h"

namespace pathlens::testing {
namespace {

std::vector<std::vector<double>> RandomContributions(Random& rng, int k, int n, double scale) {
  std::vector<std::vector<double>> q(k, std::vector<double>(n));
  for (auto& row : q) {
    for (double& v : row) v = scale * rng.Normal();
  }
  return q;
}

TEST(QuadraticProgramTest, FactoredObjectiveMatchesNaive) {
  Random rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + rng.Index(12);
    const auto q = RandomContributions(rng, 1 + rng.Index(4), n, 1.0);
    const double lambda = rng.Uniform(0.0, 0.5);
    const QuadraticProgram qp(q, lambda);
    std::vector<double> z(n);
    for (double& v : z) v = rng.Uniform();
    EXPECT_NEAR(qp.Objective(z), NaiveObjective(q, lambda, z), 1e-10);
  }
}

TEST(QuadraticProgramTest, GradientMatchesFiniteDifferences) {
  Random rng(2);
  const auto q = RandomContributions(rng, 3, 7, 1.0);
  const QuadraticProgram qp(q, 0.05);
  std::vector<double> z(7);
  for (double& v : z) v = rng.Uniform();
  std::vector<double> g(7);
  qp.Gradient(z, g);
  for (int j = 0; j < 7; ++j) {
    auto up = z;
    auto down = z;
    up[j] += 1e-5;
    down[j] -= 1e-5;
    EXPECT_NEAR(g[j], (qp.Objective(up) - qp.Objective(down)) / 2e-5, 1e-6);
  }
}

TEST(QuadraticProgramTest, DenseQIsSymmetricPositiveSemidefinite) {
  Random rng(3);
  const auto q = RandomContributions(rng, 2, 6, 1.0);
  const QuadraticProgram qp(q, 0.0);
  const auto dense = qp.DenseQ();
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) EXPECT_DOUBLE_EQ(dense[a * 6 + b], dense[b * 6 + a]);
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = rng.Normal();
    double quad = 0.0;
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) quad += v[a] * dense[a * 6 + b] * v[b];
    }
    EXPECT_GE(quad, -1e-12);
  }
}

TEST(QuadraticProgramTest, RejectsDegenerateInput) {
  EXPECT_EQ(CodeOf([] { QuadraticProgram qp({}, 0.1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { QuadraticProgram qp({{1.0, 2.0}, {1.0}}, 0.1); }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([] { QuadraticProgram qp({{1.0, NAN}}, 0.1); }), ErrorCode::kNumeric);
}

TEST(SolveQpTest, RankOneMatchesExhaustiveOracle) {
  Random rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + rng.Index(12);
    const auto q = RandomContributions(rng, 1, n, std::pow(10.0, rng.Uniform(-2.0, 0.5)));
    const double lambda = DefaultLambda(n);
    const SolveResult r = SolveQp(QuadraticProgram(q, lambda), ExtractionConfig{});
    EXPECT_LE(NaiveObjective(q, lambda, r.z) - BruteForceBoxQp(q, lambda).objective, 1e-6);
  }
}

TEST(SolveQpTest, IteratesStayInBoxAndObjectiveNeverIncreases) {
  Random rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + rng.Index(12);
    const auto q = RandomContributions(rng, 1 + rng.Index(4), n, 1.0);
    const SolveResult r = SolveQp(QuadraticProgram(q, DefaultLambda(n)), ExtractionConfig{});
    for (double z : r.z) {
      EXPECT_GE(z, 0.0);
      EXPECT_LE(z, 1.0);
    }
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      EXPECT_LE(r.objective_history[i], r.objective_history[i - 1] + 1e-15);
    }
    EXPECT_TRUE(r.converged);
  }
}

TEST(SolveQpTest, RankOneImportanceShrinksAsLambdaGrows) {
  Random rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + rng.Index(10);
    const auto q = RandomContributions(rng, 1, n, 1.0);
    double previous = INFINITY;
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0}) {
      const auto z = SolveQp(QuadraticProgram(q, lambda), ExtractionConfig{}).z;
      const double norm = std::sqrt(std::inner_product(z.begin(), z.end(), z.begin(), 0.0));
      EXPECT_LE(norm, previous + 1e-6);
      previous = norm;
    }
  }
}

TEST(SolveQpTest, ScalingContributionsAndLambdaTogetherKeepsSolution) {
  Random rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + rng.Index(10);
    auto q = RandomContributions(rng, 1 + rng.Index(3), n, 1.0);
    const double lambda = 0.05;
    const auto z1 = SolveQp(QuadraticProgram(q, lambda), ExtractionConfig{}).z;
    const double c = 3.0;
    for (auto& row : q) {
      for (double& v : row) v *= c;
    }
    const auto z2 = SolveQp(QuadraticProgram(q, c * c * lambda), ExtractionConfig{}).z;
    for (int j = 0; j < n; ++j) EXPECT_NEAR(z1[j], z2[j], 1e-5);
  }
}

TEST(SolveQpTest, DuplicatedExamplesWithDoubledLambdaKeepSolution) {
  Random rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + rng.Index(10);
    const auto q = RandomContributions(rng, 1 + rng.Index(2), n, 1.0);
    auto twice = q;
    twice.insert(twice.end(), q.begin(), q.end());
    const auto z1 = SolveQp(QuadraticProgram(q, 0.02), ExtractionConfig{}).z;
    const auto z2 = SolveQp(QuadraticProgram(twice, 0.04), ExtractionConfig{}).z;
    for (int j = 0; j < n; ++j) EXPECT_NEAR(z1[j], z2[j], 1e-5);
  }
}

TEST(SelectCriticalTest, ThresholdIsInclusive) {
  const std::vector<double> z = {0.5, 0.49, 1.0, 0.0, 0.75};
  EXPECT_EQ(SelectCritical(z, ExtractionConfig{}), (std::vector<int>{0, 2, 4}));
  ExtractionConfig high;
  high.threshold = 0.9;
  EXPECT_EQ(SelectCritical(z, high), (std::vector<int>{2}));
}

TEST(SelectCriticalTest, TopKOverridesThreshold) {
  const std::vector<double> z = {0.1, 0.3, 0.2, 0.3};
  ExtractionConfig config;
  config.top_k = 2;
  EXPECT_EQ(SelectCritical(z, config), (std::vector<int>{1, 3}));
  config.top_k = 0;
  EXPECT_TRUE(SelectCritical(z, config).empty());
  config.top_k = 10;
  EXPECT_EQ(SelectCritical(z, config).size(), 4u);
}

TEST(ExtractionConfigTest, ValidationAndJsonRoundTrip) {
  ExtractionConfig bad;
  bad.threshold = 1.0;
  EXPECT_EQ(CodeOf([&] { bad.Validate(); }), ErrorCode::kInvalidArgument);
  bad = {};
  bad.lambda = -1.0;
  EXPECT_EQ(CodeOf([&] { bad.Validate(); }), ErrorCode::kInvalidArgument);
  bad = {};
  bad.max_iterations = 0;
  EXPECT_EQ(CodeOf([&] { bad.Validate(); }), ErrorCode::kInvalidArgument);

  ExtractionConfig config;
  config.threshold = 0.4;
  config.lambda = 0.02;
  config.layers = {"a", "b"};
  config.top_k = 3;
  config.target_class = 1;
  const ExtractionConfig back = ExtractionConfigFromJson(ToJson(config));
  EXPECT_EQ(back.threshold, 0.4);
  EXPECT_EQ(back.lambda, 0.02);
  EXPECT_EQ(back.layers, config.layers);
  EXPECT_EQ(back.top_k, 3);
  EXPECT_EQ(back.target_class, 1);
  EXPECT_DOUBLE_EQ(DefaultLambda(10), 0.001);
}

TEST(TaylorGapTest, VanishesAtUnitMaskAndIsSecondOrder) {
  const ModelGraph m = ResidualNet(9);
  Random rng(9);
  const Example ex = RandomExample(m, rng);
  const ActivationTrace t = TraceWithGradients(m, ex);
  const int layer = m.IndexOrThrow("block.relu1");
  const int n = m.node(layer).channel_count();
  const TaylorGap zero = ComputeTaylorGap(m, ex, t, layer, std::vector<double>(n, 1.0));
  EXPECT_EQ(zero.exact, 0.0);
  EXPECT_EQ(zero.linear, 0.0);
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(0.1, 1.0);
  auto residual = [&](double eps) {
    std::vector<double> z(n);
    for (int j = 0; j < n; ++j) z[j] = 1.0 - eps * v[j];
    const TaylorGap g = ComputeTaylorGap(m, ex, t, layer, z);
    return std::abs(g.exact - g.linear);
  };
  EXPECT_LT(residual(1e-3), residual(1e-2) / 50.0);
}

TEST(ExtractDatapathTest, EdgesJoinCriticalSetsOfAdjacentLayers) {
  const ModelGraph m = ResidualNet(10);
  const ExampleSet set = RandomExamples(m, 3, 10);
  ExtractionConfig config;
  config.target_class = 0;
  config.top_k = 2;
  const Datapath dp = ExtractDatapath(m, set, config);
  ASSERT_EQ(dp.layers.size(), m.DefaultCandidateLayers().size());
  std::set<std::pair<std::string, std::string>> adjacent;
  std::vector<int> layers;
  for (const auto& l : dp.layers) layers.push_back(l.node);
  for (const auto& [a, b] : AdjacentLayers(m, layers)) {
    adjacent.insert({m.node(a).id, m.node(b).id});
  }
  EXPECT_FALSE(adjacent.empty());
  for (const auto& e : dp.edges) {
    EXPECT_TRUE(adjacent.count({e.from_layer, e.to_layer})) << e.from_layer << "->" << e.to_layer;
    const auto& from = dp.At(e.from_layer).critical;
    const auto& to = dp.At(e.to_layer).critical;
    EXPECT_NE(std::find(from.begin(), from.end(), e.from_map), from.end());
    EXPECT_NE(std::find(to.begin(), to.end(), e.to_map), to.end());
  }
  std::size_t expected = 0;
  for (const auto& [a, b] : adjacent) expected += dp.At(a).critical.size() * dp.At(b).critical.size();
  EXPECT_EQ(dp.edges.size(), expected);
  EXPECT_EQ(dp.group.count, 3u);
  EXPECT_EQ(dp.model_hash, ModelHash(m));
}

TEST(ExtractDatapathTest, JsonRoundTripPreservesId) {
  const ModelGraph m = ResidualNet(11);
  const ExampleSet set = RandomExamples(m, 2, 11);
  ExtractionConfig config;
  config.target_class = 1;
  const Datapath dp = ExtractDatapath(m, set, config);
  const Datapath back = DatapathFromJson(ToJson(dp));
  EXPECT_EQ(DatapathId(back), DatapathId(dp));
  EXPECT_EQ(back.layers.size(), dp.layers.size());
  EXPECT_EQ(back.edges.size(), dp.edges.size());
  ExtractionConfig other = config;
  other.threshold = 0.3;
  EXPECT_NE(DatapathId(ExtractDatapath(m, set, other)), DatapathId(dp));
  EXPECT_EQ(CodeOf([] { (void)DatapathFromJson(nlohmann::json{{"format", "x"}}); }),
            ErrorCode::kFormat);
}

TEST(ExtractDatapathTest, ThreadCountDoesNotChangeResult) {
  const ModelGraph m = ResidualNet(12);
  const ExampleSet set = RandomExamples(m, 4, 12);
  ExtractionConfig config;
  config.target_class = 2;
  const Datapath one = ExtractDatapath(m, set, config);
  config.threads = 3;
  const Datapath three = ExtractDatapath(m, set, config);
  for (std::size_t i = 0; i < one.layers.size(); ++i) {
    EXPECT_EQ(one.layers[i].importance, three.layers[i].importance);
  }
}

TEST(ExtractDatapathTest, TargetClassResolution) {
  const ModelGraph m = DistractorNet(1);
  ExampleSet set = DistractorExamples(1, 4);
  EXPECT_EQ(SharedTargetClass(m, set), 1);
  set.examples[0].label = 0;
  const auto mixed = [&] { (void)SharedTargetClass(m, set); };
  bool predictions_agree = true;
  const int first = Forward(m, set.examples[0]).predicted_class;
  for (const auto& ex : set.examples) predictions_agree &= Forward(m, ex).predicted_class == first;
  if (predictions_agree) {
    EXPECT_EQ(SharedTargetClass(m, set), first);
  } else {
    EXPECT_EQ(CodeOf(mixed), ErrorCode::kInvalidArgument);
  }
  ExtractionConfig config;
  config.layers = {"missing"};
  EXPECT_EQ(CodeOf([&] { (void)ExtractDatapath(m, set, config); }), ErrorCode::kNotFound);
  EXPECT_EQ(CodeOf([&] { (void)ExtractDatapath(m, ExampleSet{}, ExtractionConfig{}); }),
            ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace pathlens::testing
