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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pathlens/attacks.h"
#include "pathlens/documents.h"
#include "pathlens/error.h"
#include "pathlens/extraction.h"
#include "pathlens/fixture.h"
#include "pathlens/io.h"
#include "pathlens/neuronview.h"
#include "pathlens/stats.h"
#include "service/service.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace pathlens {
namespace {

void PrintResult(const json& summary) { std::cout << summary.dump() << '\n'; }

// ------------------------------------------------------------------ fixture

struct FixtureArgs {
  fs::path out_dir;
  FixtureOptions options;
};

void RunFixture(const FixtureArgs& args) {
  const Fixture fixture = BuildFixture(args.options);
  const fs::path manifest = args.out_dir / "model.json";
  SaveModel(fixture.model, manifest);
  SaveExamples(fixture.train, args.out_dir / "train.examples");
  SaveExamples(fixture.test, args.out_dir / "test.examples");
  PrintResult({{"model", manifest.string()},
               {"model_hash", ModelHash(fixture.model)},
               {"train_accuracy", fixture.report.train_accuracy},
               {"test_accuracy", fixture.test_accuracy},
               {"epoch_loss", fixture.report.epoch_loss}});
}

// ------------------------------------------------------------------- attack

struct AttackArgs {
  fs::path model;
  fs::path examples;
  fs::path out;
  fs::path normal_out;
  AttackConfig config;
  std::optional<int> label;
  bool correct_only = false;
  bool fooled_only = false;
  int threads = 1;
};

void RunAttack(const AttackArgs& args) {
  const ModelGraph model = LoadModel(args.model);
  const ExampleSet input = LoadExamples(args.examples);
  ExampleSet source;
  source.name = input.name;
  for (const auto& ex : input.examples) {
    if (args.label && ex.label != *args.label) continue;
    if (args.correct_only && Forward(model, ex).predicted_class != ex.label) continue;
    source.examples.push_back(ex);
  }
  ExampleSet attacked = FgsmSet(model, source, args.config, args.threads);
  ExampleSet normal;
  ExampleSet adversarial;
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const bool success =
        Forward(model, attacked.examples[i]).predicted_class != source.examples[i].label;
    fooled += success ? 1 : 0;
    if (args.fooled_only && !success) continue;
    normal.examples.push_back(source.examples[i]);
    adversarial.examples.push_back(attacked.examples[i]);
  }
  SaveExamples(adversarial, args.out);
  if (!args.normal_out.empty()) SaveExamples(normal, args.normal_out);
  PrintResult({{"attacked", source.size()},
               {"fooled", fooled},
               {"written", adversarial.size()},
               {"epsilon", args.config.epsilon}});
}

// ------------------------------------------------------------------ extract

struct ExtractArgs {
  fs::path model;
  fs::path examples;
  fs::path out;
  std::string name;
  ExtractionConfig config;
  std::optional<double> lambda;
  std::optional<int> top_k;
  std::optional<int> target_class;
};

void RunExtract(ExtractArgs args) {
  const ModelGraph model = LoadModel(args.model);
  ExampleSet examples = LoadExamples(args.examples);
  if (!args.name.empty()) examples.name = args.name;
  args.config.lambda = args.lambda;
  args.config.top_k = args.top_k;
  args.config.target_class = args.target_class;
  args.config.Validate();
  const Datapath datapath = ExtractDatapath(model, examples, args.config);
  WriteJson(args.out, ToJson(datapath));
  std::size_t critical = 0;
  for (const auto& l : datapath.layers) critical += l.critical.size();
  PrintResult({{"datapath", DatapathId(datapath)},
               {"layers", datapath.layers.size()},
               {"critical_feature_maps", critical},
               {"target_class", datapath.group.target_class}});
}

// -------------------------------------------------------------------- stats

Datapath LoadDatapath(const fs::path& path, const std::string& model_hash) {
  Datapath dp = DatapathFromJson(ReadJson(path));
  Require(dp.model_hash == model_hash, ErrorCode::kInvariantViolation,
          "datapath was extracted from a different model", path.string());
  return dp;
}

struct StatsArgs {
  fs::path model;
  fs::path normal;
  fs::path adversarial;
  fs::path normal_datapath;
  fs::path adversarial_datapath;
  fs::path out;
  int threads = 1;
};

void RunStats(const StatsArgs& args) {
  const ModelGraph model = LoadModel(args.model);
  const std::string hash = ModelHash(model);
  const Datapath dp_n = LoadDatapath(args.normal_datapath, hash);
  const Datapath dp_a = LoadDatapath(args.adversarial_datapath, hash);
  const ExampleSet normal = LoadExamples(args.normal);
  const ExampleSet adversarial = LoadExamples(args.adversarial);
  Require(ExampleSetHash(normal) == dp_n.group.hash, ErrorCode::kInvariantViolation,
          "normal examples do not match the normal datapath", args.normal.string());
  Require(ExampleSetHash(adversarial) == dp_a.group.hash, ErrorCode::kInvariantViolation,
          "adversarial examples do not match the adversarial datapath",
          args.adversarial.string());
  const auto traces_n = ComputeTraces(model, normal, dp_n.group.target_class, args.threads);
  const auto traces_a = ComputeTraces(model, adversarial, dp_a.group.target_class, args.threads);
  const auto rows = ComputeLayerStatistics(model, traces_n, traces_a, dp_n, dp_a);
  WriteJson(args.out, ToJson(std::span<const LayerStatistic>(rows)));
  json similarity = json::object();
  for (const auto& r : rows) {
    if (r.kind == StatisticKind::kActivationSimilarity) similarity[r.layer] = r.value;
  }
  PrintResult({{"rows", rows.size()}, {"activation_similarity", similarity}});
}

// ------------------------------------------------------------------- layout

struct LayerLayoutArgs {
  fs::path model;
  fs::path stats;
  fs::path out;
  fs::path svg;
  std::string statistic = "activation_similarity";
  std::vector<std::string> expand;
  LayerLayoutOptions options;
};

void RunLayerLayout(LayerLayoutArgs args) {
  const ModelGraph model = LoadModel(args.model);
  const auto rows = StatisticsFromJson(ReadJson(args.stats));
  args.options.statistic = ParseStatisticKind(args.statistic);
  LayerLayout layout = BuildLayerLayout(model, rows, args.options);
  if (!args.expand.empty()) {
    std::vector<int> visible = layout.treecut.visible;
    for (const auto& path : args.expand) {
      const int node = model.hierarchy().Find(path);
      Require(node >= 0, ErrorCode::kNotFound, "unknown hierarchy node", path);
      visible = ExpandNode(model.hierarchy(), visible, node);
    }
    layout = BuildLayerLayout(model, rows, args.options, visible);
  }
  WriteJson(args.out, layout.document);
  if (!args.svg.empty()) WriteFile(args.svg, LayerLayoutSvg(layout.document));
  PrintResult({{"rows", layout.segments.rows.size()},
               {"visible", layout.treecut.visible.size()},
               {"cost", layout.segments.cost}});
}

struct FeatureMapLayoutArgs {
  fs::path model;
  std::vector<std::string> groups;  // name=datapath,examples
  std::string layer;
  fs::path out;
  fs::path svg;
  std::string color = "importance";
  FeatureMapLayoutOptions options;
  int threads = 1;
};

void RunFeatureMapLayout(FeatureMapLayoutArgs args) {
  const ModelGraph model = LoadModel(args.model);
  const std::string hash = ModelHash(model);
  args.options.color = ParseColorEncoding(args.color);
  std::vector<std::string> names;
  std::vector<Datapath> datapaths;
  std::vector<std::vector<ActivationTrace>> traces;
  for (const auto& arg : args.groups) {
    const auto eq = arg.find('=');
    const auto comma = arg.find(',', eq == std::string::npos ? 0 : eq);
    Require(eq != std::string::npos && comma != std::string::npos, ErrorCode::kInvalidArgument,
            "--group expects NAME=DATAPATH,EXAMPLES", arg);
    names.push_back(arg.substr(0, eq));
    datapaths.push_back(LoadDatapath(arg.substr(eq + 1, comma - eq - 1), hash));
    const ExampleSet examples = LoadExamples(arg.substr(comma + 1));
    Require(ExampleSetHash(examples) == datapaths.back().group.hash,
            ErrorCode::kInvariantViolation, "examples do not match the datapath", arg);
    traces.push_back(
        ComputeTraces(model, examples, datapaths.back().group.target_class, args.threads));
  }
  std::vector<FeatureMapGroup> groups;
  for (std::size_t i = 0; i < names.size(); ++i) {
    groups.push_back({names[i], &datapaths[i], traces[i]});
  }
  const FeatureMapLayout layout = BuildFeatureMapLayout(model, groups, args.layer, args.options);
  WriteJson(args.out, layout.document);
  if (!args.svg.empty()) WriteFile(args.svg, FeatureMapLayoutSvg(layout.document));
  PrintResult({{"cells", layout.layout.cells.size()}, {"k_clamped", layout.clamped}});
}

// --------------------------------------------------------- neuron evidence

struct NeuronArgs {
  fs::path model;
  fs::path examples;
  fs::path mean_from;
  std::size_t index = 0;
  std::string layer;
  int feature_map = 0;
  std::optional<int> y;
  std::optional<int> x;
  std::optional<int> patch_size;
  double threshold = kDefaultDiscrepancyThreshold;
  fs::path out;
  fs::path mask_pgm;
  fs::path preview_ppm;
  fs::path heatmap_ppm;
  int scale = 8;
  int threads = 1;
};

const Example& PickExample(const ExampleSet& set, std::size_t index) {
  Require(index < set.size(), ErrorCode::kOutOfRange,
          "example index " + std::to_string(index) + " out of range");
  return set.examples[index];
}

void RunHeatmap(const NeuronArgs& args) {
  const ModelGraph model = LoadModel(args.model);
  const ExampleSet set = LoadExamples(args.examples);
  const auto trace = Forward(model, PickExample(set, args.index));
  const HeatMap map =
      ActivationHeatmap(model, trace, model.IndexOrThrow(args.layer), args.feature_map);
  WriteJson(args.out, ToJson(map));
  if (!args.heatmap_ppm.empty()) WriteFile(args.heatmap_ppm, HeatMapPpm(map, args.scale));
  PrintResult({{"max_abs", map.max_abs}, {"height", map.height}, {"width", map.width}});
}

void RunDiscrepancy(const NeuronArgs& args) {
  const ModelGraph model = LoadModel(args.model);
  const ExampleSet set = LoadExamples(args.examples);
  const Example& example = PickExample(set, args.index);
  const auto fill =
      DatasetMean(args.mean_from.empty() ? set : LoadExamples(args.mean_from));
  NeuronTarget target;
  target.layer = model.IndexOrThrow(args.layer);
  target.feature_map = args.feature_map;
  target.y = args.y;
  target.x = args.x;
  const int patch = args.patch_size.value_or(
      DefaultPatchSize(example.pixels.shape().height, example.pixels.shape().width));
  DiscrepancyMap map =
      ComputeDiscrepancyMap(model, example, target, fill, patch, args.threshold, args.threads);
  map.image_id = set.name + ":" + std::to_string(args.index);
  WriteJson(args.out, ToJson(map));
  if (!args.mask_pgm.empty()) WriteFile(args.mask_pgm, DiscrepancyMaskPgm(map));
  if (!args.preview_ppm.empty()) WriteFile(args.preview_ppm, DimmedPreviewPpm(example, map));
  std::size_t important = 0;
  for (auto v : map.important) important += v;
  PrintResult({{"patches", map.deltas.size()},
               {"important", important},
               {"degenerate", map.degenerate},
               {"max_delta", map.max_delta}});
}

void ReportError(std::string_view code, std::string_view message, std::string_view context) {
  json err = {{"code", code}, {"message", message}};
  if (!context.empty()) err["context"] = context;
  std::cerr << json{{"error", err}}.dump() << '\n';
}

std::optional<int> OptionalInt(CLI::Option* option, int value) {
  return option->count() > 0 ? std::optional<int>(value) : std::nullopt;
}

int Main(int argc, char** argv) {
  CLI::App app{"pathlens: critical datapath extraction and comparison for CNNs"};
  app.require_subcommand(1);

  FixtureArgs fixture;
  auto* fx = app.add_subcommand("fixture", "Train the bundled residual CNN on synthetic motifs");
  fx->add_option("--out-dir", fixture.out_dir, "Output directory")->required();
  fx->add_option("--seed", fixture.options.seed, "Seed for data, initialization and shuffling");
  fx->add_option("--epochs", fixture.options.train.epochs);
  fx->add_option("--train-count", fixture.options.train_count);
  fx->add_option("--test-count", fixture.options.test_count);
  fx->add_option("--learning-rate", fixture.options.train.learning_rate);
  fx->add_option("--threads", fixture.options.train.threads);

  AttackArgs attack;
  int attack_target = 0;
  int attack_label = 0;
  auto* at = app.add_subcommand("attack", "Apply FGSM to an example file");
  at->add_option("--model", attack.model)->required();
  at->add_option("--examples", attack.examples)->required();
  at->add_option("--out", attack.out, "Adversarial example file")->required();
  at->add_option("--normal-out", attack.normal_out, "Clean counterparts of written examples");
  at->add_option("--epsilon", attack.config.epsilon);
  auto* target_opt = at->add_option("--target", attack_target, "Targeted attack class");
  auto* label_opt = at->add_option("--label", attack_label, "Only attack this true label");
  at->add_flag("--correct-only", attack.correct_only, "Skip examples misclassified when clean");
  at->add_flag("--fooled-only", attack.fooled_only, "Write only successful attacks");
  at->add_option("--threads", attack.threads);

  ExtractArgs extract;
  double lambda = 0.0;
  int top_k = 0;
  int target_class = 0;
  auto* ex = app.add_subcommand("extract", "Extract the critical datapath of an example group");
  ex->add_option("--model", extract.model)->required();
  ex->add_option("--examples", extract.examples)->required();
  ex->add_option("--out", extract.out)->required();
  ex->add_option("--name", extract.name, "Group name (default: file stem)");
  ex->add_option("--tau", extract.config.threshold);
  auto* lambda_opt = ex->add_option("--lambda", lambda, "Regularizer (default 0.1/n^2)");
  ex->add_option("--max-iterations", extract.config.max_iterations);
  ex->add_option("--tolerance", extract.config.tolerance);
  ex->add_option("--layers", extract.config.layers)->delimiter(',');
  auto* top_k_opt = ex->add_option("--top-k", top_k);
  auto* target_class_opt = ex->add_option("--target-class", target_class);
  ex->add_option("--threads", extract.config.threads);

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Compare a normal and an adversarial datapath");
  st->add_option("--model", stats.model)->required();
  st->add_option("--normal", stats.normal)->required();
  st->add_option("--adversarial", stats.adversarial)->required();
  st->add_option("--normal-datapath", stats.normal_datapath)->required();
  st->add_option("--adversarial-datapath", stats.adversarial_datapath)->required();
  st->add_option("--out", stats.out)->required();
  st->add_option("--threads", stats.threads);

  auto* lay = app.add_subcommand("layout", "Write layout documents");
  lay->require_subcommand(1);
  LayerLayoutArgs layers;
  auto* ll = lay->add_subcommand("layers", "Treecut and segmented DAG with dot plots");
  ll->add_option("--model", layers.model)->required();
  ll->add_option("--stats", layers.stats)->required();
  ll->add_option("--out", layers.out)->required();
  ll->add_option("--svg", layers.svg);
  ll->add_option("--stat", layers.statistic);
  ll->add_option("--group", layers.options.group);
  ll->add_option("--budget", layers.options.budget);
  ll->add_option("--line-width", layers.options.line_width);
  ll->add_option("--lambda-seg", layers.options.lambda);
  ll->add_option("--expand", layers.expand, "Hierarchy paths to expand after the treecut");

  FeatureMapLayoutArgs fmaps;
  auto* fl = lay->add_subcommand("featuremaps", "Euler cells, clusters and treemap of one layer");
  fl->add_option("--model", fmaps.model)->required();
  fl->add_option("--group", fmaps.groups, "NAME=DATAPATH,EXAMPLES (1 to 4)")->required();
  fl->add_option("--layer", fmaps.layer)->required();
  fl->add_option("--out", fmaps.out)->required();
  fl->add_option("--svg", fmaps.svg);
  fl->add_option("--color", fmaps.color);
  fl->add_option("--k", fmaps.options.k);
  fl->add_option("--seed", fmaps.options.seed, "k-means seed");
  fl->add_option("--threads", fmaps.threads);

  NeuronArgs neuron;
  int y = 0;
  int x = 0;
  int patch_size = 0;
  auto add_neuron_options = [&](CLI::App* cmd) {
    cmd->add_option("--model", neuron.model)->required();
    cmd->add_option("--examples", neuron.examples)->required();
    cmd->add_option("--index", neuron.index);
    cmd->add_option("--layer", neuron.layer)->required();
    cmd->add_option("--feature-map", neuron.feature_map)->required();
    cmd->add_option("--out", neuron.out)->required();
  };
  auto* hm = app.add_subcommand("heatmap", "Activation heat map of one feature map");
  add_neuron_options(hm);
  hm->add_option("--ppm", neuron.heatmap_ppm);
  hm->add_option("--scale", neuron.scale);
  auto* dc = app.add_subcommand("discrepancy", "Occlusion discrepancy map");
  add_neuron_options(dc);
  auto* y_opt = dc->add_option("--y", y, "Neuron row (default: feature-map mean)");
  auto* x_opt = dc->add_option("--x", x, "Neuron column");
  auto* patch_opt = dc->add_option("--patch-size", patch_size);
  dc->add_option("--threshold", neuron.threshold);
  dc->add_option("--mean-from", neuron.mean_from, "Examples defining the occlusion fill");
  dc->add_option("--mask-pgm", neuron.mask_pgm);
  dc->add_option("--preview-ppm", neuron.preview_ppm);
  dc->add_option("--threads", neuron.threads);

  ServiceOptions serve;
  std::string listen = "127.0.0.1:8080";
  auto* sv = app.add_subcommand("serve", "Run the HTTP service");
  sv->add_option("--listen", listen, "host:port")->envname("PATHLENS_LISTEN");
  sv->add_option("--cache-dir", serve.cache_dir)->envname("PATHLENS_CACHE_DIR");
  sv->add_option("--workers", serve.workers)->envname("PATHLENS_WORKERS");
  sv->add_option("--extraction-threads", serve.extraction_threads)
      ->envname("PATHLENS_EXTRACTION_THREADS");
  sv->add_option("--tau", serve.default_tau)->envname("PATHLENS_TAU");
  sv->add_option("--lambda-seg", serve.default_lambda_seg)->envname("PATHLENS_LAMBDA_SEG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ReportError("usage", e.what(), "");
    return 2;
  }

  try {
    if (fx->parsed()) RunFixture(fixture);
    if (at->parsed()) {
      attack.config.target = OptionalInt(target_opt, attack_target);
      attack.label = OptionalInt(label_opt, attack_label);
      RunAttack(attack);
    }
    if (ex->parsed()) {
      if (lambda_opt->count() > 0) extract.lambda = lambda;
      extract.top_k = OptionalInt(top_k_opt, top_k);
      extract.target_class = OptionalInt(target_class_opt, target_class);
      RunExtract(extract);
    }
    if (st->parsed()) RunStats(stats);
    if (ll->parsed()) RunLayerLayout(layers);
    if (fl->parsed()) RunFeatureMapLayout(fmaps);
    if (hm->parsed()) RunHeatmap(neuron);
    if (dc->parsed()) {
      neuron.y = OptionalInt(y_opt, y);
      neuron.x = OptionalInt(x_opt, x);
      neuron.patch_size = OptionalInt(patch_opt, patch_size);
      RunDiscrepancy(neuron);
    }
    if (sv->parsed()) {
      const auto colon = listen.rfind(':');
      Require(colon != std::string::npos, ErrorCode::kInvalidArgument,
              "--listen expects host:port", listen);
      serve.host = listen.substr(0, colon);
      try {
        serve.port = std::stoi(listen.substr(colon + 1));
      } catch (const std::logic_error&) {
        Fail(ErrorCode::kInvalidArgument, "--listen expects host:port", listen);
      }
      Service service(serve);
      std::cerr << json{{"listening", listen}}.dump() << '\n';
      service.Run();
    }
  } catch (const Error& e) {
    ReportError(ErrorCodeName(e.code()), e.message(), e.context());
    return 1;
  } catch (const std::exception& e) {
    ReportError("internal", e.what(), "");
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace pathlens

int main(int argc, char** argv) { return pathlens::Main(argc, argv); }
