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

#include "service.h"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pathlens/documents.h"
#include "pathlens/error.h"
#include "pathlens/extraction.h"
#include "pathlens/io.h"
#include "pathlens/neuronview.h"
#include "pathlens/stats.h"

namespace pathlens {

using json = nlohmann::json;

namespace {

int HttpStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kIo:
      return 500;
    default:
      return 422;
  }
}

json ErrorBody(std::string_view code, std::string_view message, std::string_view context) {
  json err = {{"code", code}, {"message", message}};
  if (!context.empty()) err["context"] = context;
  return {{"error", err}};
}

json ErrorBody(const Error& e) { return ErrorBody(ErrorCodeName(e.code()), e.message(), e.context()); }

void Reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

class WorkerPool {
 public:
  WorkerPool(int workers, std::size_t capacity) : capacity_(capacity) {
    for (int i = 0; i < std::max(1, workers); ++i) {
      threads_.emplace_back([this](std::stop_token stop) { Loop(stop); });
    }
  }

  ~WorkerPool() {
    for (auto& t : threads_) t.request_stop();
    cv_.notify_all();
  }

  bool Submit(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      if (queue_.size() >= capacity_) return false;
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
    return true;
  }

 private:
  void Loop(std::stop_token stop) {
    while (true) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, stop, [this] { return !queue_.empty(); });
        if (queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable_any cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::jthread> threads_;
};

struct Group {
  std::string name;
  std::shared_ptr<const ExampleSet> examples;
  std::string hash;
};

struct Job {
  std::string id;
  std::string kind;
  std::string status = "queued";
  json result;
  json error;
};

using Traces = std::vector<ActivationTrace>;

}  // namespace

class Service::Impl {
 public:
  explicit Impl(ServiceOptions options)
      : options_(std::move(options)), pool_(options_.workers, options_.queue_capacity) {
    Require(options_.workers >= 1, ErrorCode::kInvalidArgument, "worker count must be >= 1");
    std::filesystem::create_directories(options_.cache_dir / "datapaths");
    server_.set_payload_max_length(256u << 20);
    Routes();
  }

  ~Impl() { Stop(); }

  int Start() {
    const int port = options_.port == 0 ? server_.bind_to_any_port(options_.host)
                                        : (server_.bind_to_port(options_.host, options_.port)
                                               ? options_.port
                                               : -1);
    Require(port > 0, ErrorCode::kIo,
            "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    listener_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  void Run() {
    Require(server_.listen(options_.host, options_.port), ErrorCode::kIo,
            "cannot listen on " + options_.host + ":" + std::to_string(options_.port));
  }

  void Stop() {
    server_.stop();
    if (listener_.joinable()) listener_.join();
  }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static httplib::Server::Handler Guard(Handler handler) {
    return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        Reply(res, ErrorBody(e), HttpStatus(e.code()));
      } catch (const json::exception& e) {
        Reply(res, ErrorBody("format", e.what(), ""), 400);
      } catch (const std::exception& e) {
        Reply(res, ErrorBody("internal", e.what(), ""), 500);
      }
    };
  }

  void Routes() {
    server_.Put("/model", Guard([this](const auto& req, auto& res) { PutModel(req, res); }));
    server_.Put(R"(/groups/([^/]+))",
                Guard([this](const auto& req, auto& res) { PutGroup(req, res); }));
    server_.Get("/groups", Guard([this](const auto&, auto& res) { ListGroups(res); }));
    server_.Put("/comparison",
                Guard([this](const auto& req, auto& res) { PutComparison(req, res); }));
    server_.Post("/extract", Guard([this](const auto& req, auto& res) { Extract(req, res); }));
    server_.Get(R"(/jobs/([^/]+))",
                Guard([this](const auto& req, auto& res) { GetJob(req, res); }));
    server_.Get(R"(/datapaths/([^/]+))",
                Guard([this](const auto& req, auto& res) { GetDatapath(req, res); }));
    server_.Get("/stats", Guard([this](const auto&, auto& res) { GetStats(res); }));
    server_.Get("/layout/layers",
                Guard([this](const auto& req, auto& res) { GetLayerLayout(req, res); }));
    server_.Post("/layout/layers/expand",
                 Guard([this](const auto& req, auto& res) { ExpandLayout(req, res); }));
    server_.Get(R"(/layout/featuremaps/([^/]+))",
                Guard([this](const auto& req, auto& res) { GetFeatureMapLayout(req, res); }));
    server_.Get(R"(/neurons/([^/]+)/(\d+))",
                Guard([this](const auto& req, auto& res) { GetNeuron(req, res); }));
    server_.Post("/discrepancy",
                 Guard([this](const auto& req, auto& res) { Discrepancy(req, res); }));
    server_.Get("/status", Guard([this](const auto&, auto& res) { GetStatus(res); }));
  }

  // ---------------------------------------------------------------- state

  std::shared_ptr<const ModelGraph> RequireModel(std::string* hash = nullptr) const {
    Require(model_ != nullptr, ErrorCode::kNotFound, "no model has been uploaded");
    if (hash != nullptr) *hash = model_hash_;
    return model_;
  }

  Group RequireGroup(const std::string& name) const {
    const auto it = groups_.find(name);
    Require(it != groups_.end(), ErrorCode::kNotFound, "unknown group", name);
    return it->second;
  }

  std::shared_ptr<const Datapath> LatestDatapath(const std::string& group) const {
    const auto it = latest_.find({model_hash_, group});
    Require(it != latest_.end(), ErrorCode::kNotFound,
            "no datapath extracted for this group under the current model", group);
    return datapaths_.at(it->second);
  }

  std::shared_ptr<const Traces> TracesFor(const ModelGraph& model, const std::string& model_hash,
                                          const Group& group, int target_class) {
    const std::string key = model_hash + "/" + group.hash + "/" + std::to_string(target_class);
    {
      std::lock_guard lock(traces_mutex_);
      if (auto it = traces_.find(key); it != traces_.end()) return it->second;
    }
    auto traces = std::make_shared<const Traces>(
        ComputeTraces(model, *group.examples, target_class, options_.extraction_threads));
    std::lock_guard lock(traces_mutex_);
    return traces_.emplace(key, std::move(traces)).first->second;
  }

  struct Comparison {
    std::shared_ptr<const ModelGraph> model;
    std::string model_hash;
    std::vector<Group> groups;
    std::vector<std::shared_ptr<const Datapath>> datapaths;
    std::vector<std::shared_ptr<const Traces>> traces;
    std::optional<std::vector<int>> visible;
  };

  Comparison SnapshotComparison() {
    Comparison c;
    {
      std::shared_lock lock(state_mutex_);
      c.model = RequireModel(&c.model_hash);
      Require(!comparison_.empty(), ErrorCode::kNotFound, "no comparison groups selected");
      for (const auto& name : comparison_) {
        c.groups.push_back(RequireGroup(name));
        c.datapaths.push_back(LatestDatapath(name));
      }
      c.visible = visible_;
    }
    for (std::size_t i = 0; i < c.groups.size(); ++i) {
      c.traces.push_back(
          TracesFor(*c.model, c.model_hash, c.groups[i], c.datapaths[i]->group.target_class));
    }
    return c;
  }

  static std::vector<LayerStatistic> ComparisonStats(const Comparison& c) {
    std::vector<LayerStatistic> rows;
    std::size_t first_extra = 1;
    if (c.groups.size() >= 2) {
      Require(c.traces[0]->size() == c.traces[1]->size(), ErrorCode::kInvariantViolation,
              "the first two comparison groups must be paired (equal image counts)");
      rows = ComputeLayerStatistics(*c.model, *c.traces[0], *c.traces[1], *c.datapaths[0],
                                    *c.datapaths[1]);
      first_extra = 2;
    }
    for (std::size_t g = c.groups.size() >= 2 ? first_extra : 0; g < c.groups.size(); ++g) {
      for (const auto& layer : c.datapaths[g]->layers) {
        const int node = c.model->IndexOrThrow(layer.layer);
        std::vector<int> maps = layer.critical;
        if (maps.empty()) {
          maps.resize(c.model->node(node).channel_count());
          for (std::size_t j = 0; j < maps.size(); ++j) maps[j] = static_cast<int>(j);
        }
        rows.push_back({layer.layer, StatisticKind::kMeanActivation,
                        MeanActivation(*c.traces[g], node, maps), c.groups[g].name,
                        layer.critical.empty()});
      }
    }
    return rows;
  }

  // ---------------------------------------------------------------- routes

  void PutModel(const httplib::Request& req, httplib::Response& res) {
    Require(req.has_file("manifest") && req.has_file("weights"), ErrorCode::kInvalidArgument,
            "multipart fields 'manifest' and 'weights' are required");
    json manifest;
    try {
      manifest = json::parse(req.get_file_value("manifest").content);
    } catch (const json::exception& e) {
      Fail(ErrorCode::kFormat, std::string("manifest is not valid JSON: ") + e.what());
    }
    const auto weights = DecodeFloat32LE(req.get_file_value("weights").content);
    auto model = std::make_shared<const ModelGraph>(ModelFromManifest(manifest, weights));
    const std::string hash = ModelHash(*model);
    {
      std::unique_lock lock(state_mutex_);
      if (hash != model_hash_) visible_.reset();
      model_ = model;
      model_hash_ = hash;
    }
    std::vector<std::string> candidates;
    for (int l : model->DefaultCandidateLayers()) candidates.push_back(model->node(l).id);
    Reply(res, {{"model_hash", hash},
                {"layers", model->size()},
                {"parameters", model->ParameterCount()},
                {"classes", model->num_classes()},
                {"candidate_layers", candidates}});
  }

  void PutGroup(const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    std::string model_hash;
    const auto model = [&] {
      std::shared_lock lock(state_mutex_);
      return RequireModel(&model_hash);
    }();
    auto examples = std::make_shared<ExampleSet>(DecodeExamples(req.body, name));
    Require(!examples->empty(), ErrorCode::kInvalidArgument, "example group is empty", name);
    for (const auto& ex : examples->examples) CheckExample(*model, ex);
    const std::string hash = ExampleSetHash(*examples);

    json images = json::array();
    std::vector<std::pair<double, std::size_t>> ranked;
    std::vector<ActivationTrace> traces(examples->size());
    for (std::size_t i = 0; i < examples->size(); ++i) {
      traces[i] = Forward(*model, examples->examples[i]);
      ranked.push_back({-UncertaintyScore(traces[i]), i});
    }
    std::stable_sort(ranked.begin(), ranked.end());
    for (const auto& [neg, i] : ranked) {
      const auto& ex = examples->examples[i];
      images.push_back({{"index", i},
                        {"label", ex.label},
                        {"group_tag", ex.group_tag},
                        {"predicted_class", traces[i].predicted_class},
                        {"uncertainty", -neg}});
    }
    {
      std::unique_lock lock(state_mutex_);
      groups_[name] = Group{name, examples, hash};
    }
    Reply(res, {{"name", name}, {"hash", hash}, {"count", examples->size()}, {"images", images}});
  }

  void ListGroups(httplib::Response& res) {
    std::shared_lock lock(state_mutex_);
    json out = json::array();
    for (const auto& [name, g] : groups_) {
      out.push_back({{"name", name}, {"hash", g.hash}, {"count", g.examples->size()}});
    }
    Reply(res, {{"groups", out}, {"comparison", comparison_}});
  }

  void PutComparison(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    const auto names = body.at("groups").get<std::vector<std::string>>();
    Require(!names.empty() && names.size() <= 4, ErrorCode::kInvalidArgument,
            "a comparison holds between one and four groups");
    std::unique_lock lock(state_mutex_);
    for (const auto& n : names) RequireGroup(n);
    if (names != comparison_) visible_.reset();
    comparison_ = names;
    Reply(res, {{"comparison", comparison_}});
  }

  std::shared_ptr<Job> NewJob(std::string kind) {
    auto job = std::make_shared<Job>();
    job->kind = std::move(kind);
    std::lock_guard lock(jobs_mutex_);
    job->id = "job-" + std::to_string(++job_counter_);
    jobs_[job->id] = job;
    return job;
  }

  void Enqueue(const std::shared_ptr<Job>& job, std::function<json()> work) {
    const bool accepted = pool_.Submit([this, job, work = std::move(work)] {
      SetJob(job, "running", {}, {});
      try {
        SetJob(job, "done", work(), {});
      } catch (const Error& e) {
        SetJob(job, "failed", {}, ErrorBody(e)["error"]);
      } catch (const std::exception& e) {
        SetJob(job, "failed", {}, ErrorBody("internal", e.what(), "")["error"]);
      }
    });
    if (!accepted) {
      SetJob(job, "failed", {}, ErrorBody("unavailable", "job queue is full", "")["error"]);
    }
  }

  void SetJob(const std::shared_ptr<Job>& job, std::string status, json result, json error) {
    std::lock_guard lock(jobs_mutex_);
    job->status = std::move(status);
    job->result = std::move(result);
    job->error = std::move(error);
  }

  void Extract(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    json config_doc = body.value("config", json::object());
    if (!config_doc.contains("threshold")) config_doc["threshold"] = options_.default_tau;
    ExtractionConfig config = ExtractionConfigFromJson(config_doc);
    config.threads = options_.extraction_threads;

    std::string model_hash;
    std::shared_ptr<const ModelGraph> model;
    std::vector<Group> groups;
    {
      std::shared_lock lock(state_mutex_);
      model = RequireModel(&model_hash);
      const auto names = body.contains("groups") ? body.at("groups").get<std::vector<std::string>>()
                                                 : comparison_;
      Require(!names.empty(), ErrorCode::kInvalidArgument, "no groups named for extraction");
      for (const auto& n : names) groups.push_back(RequireGroup(n));
    }
    ResolveCandidateLayers(*model, config);

    auto job = NewJob("extract");
    Enqueue(job, [this, model, model_hash, groups, config] {
      json ids = json::object();
      json hits = json::object();
      for (const auto& g : groups) {
        bool hit = false;
        const std::string id = ExtractCached(*model, model_hash, g, config, &hit);
        ids[g.name] = id;
        hits[g.name] = hit;
      }
      return json{{"datapaths", ids}, {"cache_hits", hits}};
    });
    Reply(res, {{"job", job->id}, {"status", "queued"}}, 202);
  }

  std::string ExtractCached(const ModelGraph& model, const std::string& model_hash,
                            const Group& group, const ExtractionConfig& config, bool* hit) {
    const std::string key = Sha256Hex(model_hash + "\n" + group.hash + "\n" +
                                      JsonHash(ToJson(config)));
    const auto path = options_.cache_dir / "datapaths" / (key + ".json");
    std::shared_ptr<const Datapath> datapath;
    {
      std::shared_lock lock(state_mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) datapath = datapaths_.at(it->second);
    }
    *hit = datapath != nullptr;
    if (!datapath && std::filesystem::exists(path)) {
      datapath = std::make_shared<const Datapath>(DatapathFromJson(ReadJson(path)));
      *hit = true;
    }
    if (!datapath) {
      Datapath fresh = ExtractDatapath(model, *group.examples, config);
      fresh.group.name = group.name;
      datapath = std::make_shared<const Datapath>(std::move(fresh));
      WriteJson(path, ToJson(*datapath));
      ++extractions_computed_;
    }
    const std::string id = DatapathId(*datapath);
    std::unique_lock lock(state_mutex_);
    cache_[key] = id;
    datapaths_.emplace(id, datapath);
    latest_[{model_hash, group.name}] = id;
    return id;
  }

  void GetJob(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(req.matches[1]);
    Require(it != jobs_.end(), ErrorCode::kNotFound, "unknown job", std::string(req.matches[1]));
    const Job& job = *it->second;
    json out = {{"id", job.id}, {"kind", job.kind}, {"status", job.status}};
    if (job.status == "done") out["result"] = job.result;
    if (job.status == "failed") out["error"] = job.error;
    Reply(res, out);
  }

  void GetDatapath(const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(state_mutex_);
    const auto it = datapaths_.find(req.matches[1]);
    Require(it != datapaths_.end(), ErrorCode::kNotFound, "unknown datapath",
            std::string(req.matches[1]));
    Reply(res, ToJson(*it->second));
  }

  void GetStats(httplib::Response& res) {
    const Comparison c = SnapshotComparison();
    const auto rows = ComparisonStats(c);
    json doc = ToJson(std::span<const LayerStatistic>(rows));
    doc["groups"] = json::array();
    for (const auto& g : c.groups) doc["groups"].push_back(g.name);
    Reply(res, doc);
  }

  LayerLayoutOptions LayoutOptions(const httplib::Request& req) const {
    LayerLayoutOptions options;
    options.lambda = options_.default_lambda_seg;
    if (req.has_param("stat")) options.statistic = ParseStatisticKind(req.get_param_value("stat"));
    if (req.has_param("group")) options.group = req.get_param_value("group");
    try {
      if (req.has_param("budget")) options.budget = std::stoi(req.get_param_value("budget"));
      if (req.has_param("line_width")) {
        options.line_width = std::stod(req.get_param_value("line_width"));
      }
      if (req.has_param("lambda_seg")) {
        options.lambda = std::stod(req.get_param_value("lambda_seg"));
      }
    } catch (const std::logic_error&) {
      Fail(ErrorCode::kInvalidArgument, "malformed numeric query parameter");
    }
    return options;
  }

  void GetLayerLayout(const httplib::Request& req, httplib::Response& res) {
    const auto options = LayoutOptions(req);
    const Comparison c = SnapshotComparison();
    const auto rows = ComparisonStats(c);
    const LayerLayout layout = c.visible ? BuildLayerLayout(*c.model, rows, options, *c.visible)
                                         : BuildLayerLayout(*c.model, rows, options);
    Reply(res, layout.document);
  }

  void ExpandLayout(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    const std::string path = body.at("node").get<std::string>();
    const std::string action = body.value("action", "expand");
    Require(action == "expand" || action == "collapse", ErrorCode::kInvalidArgument,
            "action must be 'expand' or 'collapse'");
    const auto options = LayoutOptions(req);
    const Comparison c = SnapshotComparison();
    const auto rows = ComparisonStats(c);
    const Hierarchy& h = c.model->hierarchy();
    const int node = h.Find(path);
    Require(node >= 0, ErrorCode::kNotFound, "unknown hierarchy node", path);
    const std::vector<int> current =
        c.visible ? *c.visible : BuildLayerLayout(*c.model, rows, options).treecut.visible;
    std::vector<int> next = action == "expand" ? ExpandNode(h, current, node)
                                               : CollapseNode(h, current, node);
    const LayerLayout layout = BuildLayerLayout(*c.model, rows, options, next);
    {
      std::unique_lock lock(state_mutex_);
      if (model_hash_ == c.model_hash) visible_ = std::move(next);
    }
    Reply(res, layout.document);
  }

  void GetFeatureMapLayout(const httplib::Request& req, httplib::Response& res) {
    const std::string layer = req.matches[1];
    const Comparison c = SnapshotComparison();
    FeatureMapLayoutOptions options;
    if (req.has_param("color")) options.color = ParseColorEncoding(req.get_param_value("color"));
    if (req.has_param("k")) {
      try {
        options.k = std::stoi(req.get_param_value("k"));
      } catch (const std::logic_error&) {
        Fail(ErrorCode::kInvalidArgument, "malformed k");
      }
    }
    std::vector<FeatureMapGroup> groups;
    for (std::size_t g = 0; g < c.groups.size(); ++g) {
      groups.push_back({c.groups[g].name, c.datapaths[g].get(), *c.traces[g]});
    }
    Reply(res, BuildFeatureMapLayout(*c.model, groups, layer, options).document);
  }

  std::pair<Group, std::size_t> ResolveImage(const std::string& ref) const {
    const auto colon = ref.rfind(':');
    Require(colon != std::string::npos, ErrorCode::kInvalidArgument,
            "image reference must look like group:index", ref);
    const Group group = RequireGroup(ref.substr(0, colon));
    std::size_t index = 0;
    try {
      index = std::stoul(ref.substr(colon + 1));
    } catch (const std::logic_error&) {
      Fail(ErrorCode::kInvalidArgument, "malformed image index", ref);
    }
    Require(index < group.examples->size(), ErrorCode::kNotFound, "image index out of range",
            ref);
    return {group, index};
  }

  void GetNeuron(const httplib::Request& req, httplib::Response& res) {
    Require(req.has_param("image"), ErrorCode::kInvalidArgument, "missing ?image=group:index");
    const std::string ref = req.get_param_value("image");
    std::shared_ptr<const ModelGraph> model;
    Group group;
    std::size_t index = 0;
    {
      std::shared_lock lock(state_mutex_);
      model = RequireModel();
      std::tie(group, index) = ResolveImage(ref);
    }
    const int layer = model->IndexOrThrow(std::string(req.matches[1]));
    const int feature_map = std::stoi(req.matches[2]);
    const auto trace = Forward(*model, group.examples->examples[index]);
    json doc = ToJson(ActivationHeatmap(*model, trace, layer, feature_map));
    doc["image"] = ref;
    doc["predicted_class"] = trace.predicted_class;
    doc["label"] = group.examples->examples[index].label;
    Reply(res, doc);
  }

  void Discrepancy(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    const std::string ref = body.at("image").get<std::string>();
    std::shared_ptr<const ModelGraph> model;
    Group group;
    std::size_t index = 0;
    {
      std::shared_lock lock(state_mutex_);
      model = RequireModel();
      std::tie(group, index) = ResolveImage(ref);
    }
    NeuronTarget target;
    target.layer = model->IndexOrThrow(body.at("layer").get<std::string>());
    target.feature_map = body.at("feature_map").get<int>();
    if (body.contains("y")) target.y = body.at("y").get<int>();
    if (body.contains("x")) target.x = body.at("x").get<int>();
    const Example& ex = group.examples->examples[index];
    const int patch = body.value(
        "patch_size", DefaultPatchSize(ex.pixels.shape().height, ex.pixels.shape().width));
    const double threshold = body.value("threshold", kDefaultDiscrepancyThreshold);
    Require(patch >= 1, ErrorCode::kInvalidArgument, "patch size must be >= 1");
    Require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::kInvalidArgument,
            "threshold must lie in [0,1]");

    auto job = NewJob("discrepancy");
    const int threads = options_.extraction_threads;
    Enqueue(job, [model, group, index, target, patch, threshold, ref, threads] {
      const auto fill = DatasetMean(*group.examples);
      DiscrepancyMap map = ComputeDiscrepancyMap(*model, group.examples->examples[index], target,
                                                 fill, patch, threshold, threads);
      map.image_id = ref;
      return ToJson(map);
    });
    Reply(res, {{"job", job->id}, {"status", "queued"}}, 202);
  }

  void GetStatus(httplib::Response& res) {
    std::shared_lock lock(state_mutex_);
    Reply(res, {{"model_hash", model_hash_.empty() ? json(nullptr) : json(model_hash_)},
                {"groups", groups_.size()},
                {"comparison", comparison_},
                {"datapaths", datapaths_.size()},
                {"extractions_computed", extractions_computed_.load()},
                {"default_tau", options_.default_tau},
                {"default_lambda_seg", options_.default_lambda_seg}});
  }

  ServiceOptions options_;
  httplib::Server server_;
  std::jthread listener_;

  mutable std::shared_mutex state_mutex_;
  std::shared_ptr<const ModelGraph> model_;
  std::string model_hash_;
  std::map<std::string, Group> groups_;
  std::vector<std::string> comparison_;
  std::map<std::string, std::string> cache_;  // content key -> datapath id
  std::map<std::string, std::shared_ptr<const Datapath>> datapaths_;
  std::map<std::pair<std::string, std::string>, std::string> latest_;
  std::optional<std::vector<int>> visible_;
  std::atomic<int> extractions_computed_{0};

  std::mutex traces_mutex_;
  std::map<std::string, std::shared_ptr<const Traces>> traces_;

  std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  int job_counter_ = 0;

  WorkerPool pool_;
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() = default;

int Service::Start() { return impl_->Start(); }
void Service::Run() { impl_->Run(); }
void Service::Stop() { impl_->Stop(); }

}  // namespace pathlens
