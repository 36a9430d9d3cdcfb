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

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <string>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "nets.h"
#include "pathlens/attacks.h"
#include "pathlens/extraction.h"
#include "pathlens/io.h"
#include "service/service.h"

namespace pathlens::testing {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() /
                            ("pathlens-service-test-" + std::to_string(getpid())));
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    model_ = new ModelGraph(ResidualNet(77));
    SaveModel(*model_, *dir_ / "model.json");
    // A saved model is rounded to float32; work with what the server sees.
    *model_ = LoadModel(*dir_ / "model.json");
    // Uploaded pixels are float32 as well.
    normal_ = new ExampleSet(
        DecodeExamples(EncodeExamples(RandomExamples(*model_, 5, 78)), "normal"));
    adversarial_ = new ExampleSet(DecodeExamples(
        EncodeExamples(FgsmSet(*model_, *normal_, AttackConfig{0.05, std::nullopt})),
        "adversarial"));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
    delete model_;
    delete normal_;
    delete adversarial_;
  }

  void SetUp() override {
    ServiceOptions options;
    options.port = 0;
    options.cache_dir = *dir_ / "cache";
    service_ = std::make_unique<Service>(options);
    port_ = service_->Start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }
  void TearDown() override { service_->Stop(); }

  static json Body(const httplib::Result& r) { return json::parse(r->body); }

  void UploadModel() {
    httplib::MultipartFormDataItems items = {
        {"manifest", ReadFile(*dir_ / "model.json"), "model.json", "application/json"},
        {"weights", ReadFile(*dir_ / "model.bin"), "model.bin", "application/octet-stream"}};
    auto r = client_->Put("/model", items);
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(Body(r)["model_hash"], ModelHash(*model_));
  }

  void UploadGroups() {
    for (const ExampleSet* set : {normal_, adversarial_}) {
      auto r = client_->Put("/groups/" + set->name, EncodeExamples(*set),
                            "application/octet-stream");
      ASSERT_TRUE(r);
      ASSERT_EQ(r->status, 200) << r->body;
      const json body = Body(r);
      EXPECT_EQ(body["count"], set->size());
      EXPECT_EQ(body["images"].size(), set->size());
      for (std::size_t i = 1; i < body["images"].size(); ++i) {
        EXPECT_GE(body["images"][i - 1]["uncertainty"].get<double>(),
                  body["images"][i]["uncertainty"].get<double>());
      }
    }
    auto r = client_->Put("/comparison", R"({"groups": ["normal", "adversarial"]})",
                          "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
  }

  json WaitForJob(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      auto r = client_->Get("/jobs/" + id);
      EXPECT_TRUE(r);
      const json body = Body(r);
      if (body["status"] == "done" || body["status"] == "failed") return body;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    ADD_FAILURE() << "job " << id << " did not finish";
    return {};
  }

  json Extract() {
    auto r = client_->Post("/extract", R"({"config": {"target_class": 0}})", "application/json");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 202) << r->body;
    const json job = WaitForJob(Body(r)["job"]);
    EXPECT_EQ(job["status"], "done") << job.dump();
    return job["result"];
  }

  json Status() { return Body(client_->Get("/status")); }

  static fs::path* dir_;
  static ModelGraph* model_;
  static ExampleSet* normal_;
  static ExampleSet* adversarial_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

fs::path* ServiceTest::dir_ = nullptr;
ModelGraph* ServiceTest::model_ = nullptr;
ExampleSet* ServiceTest::normal_ = nullptr;
ExampleSet* ServiceTest::adversarial_ = nullptr;

TEST_F(ServiceTest, ScriptedAnalysisSession) {
  EXPECT_TRUE(Status()["model_hash"].is_null());
  EXPECT_EQ(client_->Get("/stats")->status, 404);
  UploadModel();
  UploadGroups();

  const json first = Extract();
  ExtractionConfig config;
  config.target_class = 0;
  const Datapath local = ExtractDatapath(*model_, *normal_, config);
  const std::string normal_id = first["datapaths"]["normal"];
  EXPECT_EQ(normal_id, DatapathId(local));
  auto dp = client_->Get("/datapaths/" + normal_id);
  ASSERT_EQ(dp->status, 200);
  EXPECT_EQ(DatapathId(DatapathFromJson(Body(dp))), normal_id);

  const int computed = Status()["extractions_computed"];
  const json again = Extract();
  EXPECT_EQ(again["datapaths"], first["datapaths"]);
  EXPECT_TRUE(again["cache_hits"]["normal"].get<bool>());
  EXPECT_TRUE(again["cache_hits"]["adversarial"].get<bool>());
  EXPECT_EQ(Status()["extractions_computed"], computed);

  auto stats = client_->Get("/stats");
  ASSERT_EQ(stats->status, 200) << stats->body;

  auto layers = client_->Get("/layout/layers?budget=4&line_width=3");
  ASSERT_EQ(layers->status, 200) << layers->body;
  const json layout = Body(layers);
  EXPECT_EQ(layout["format"], "pathlens-layer-layout");
  std::string group_path;
  std::string leaf_path;
  for (const auto& v : layout["visible"]) {
    if (v["type"] == "group" && group_path.empty()) group_path = v["node"];
    if (v["type"] == "layer" && leaf_path.empty()) leaf_path = v["node"];
  }
  ASSERT_FALSE(group_path.empty());
  auto expanded = client_->Post("/layout/layers/expand",
                                json{{"node", group_path}, {"action", "expand"}}.dump(),
                                "application/json");
  ASSERT_EQ(expanded->status, 200) << expanded->body;
  const json after = Body(expanded);
  for (const auto& v : after["visible"]) EXPECT_NE(v["node"], group_path);
  EXPECT_GT(after["visible"].size(), layout["visible"].size());
  // The expansion persists across requests.
  EXPECT_EQ(Body(client_->Get("/layout/layers"))["visible"], after["visible"]);
  if (!leaf_path.empty()) {
    auto noop = client_->Post("/layout/layers/expand", json{{"node", leaf_path}}.dump(),
                              "application/json");
    ASSERT_EQ(noop->status, 200);
    EXPECT_EQ(Body(noop)["visible"], after["visible"]);
  }

  auto fm = client_->Get("/layout/featuremaps/block.relu2?color=activation_difference&k=2");
  ASSERT_EQ(fm->status, 200) << fm->body;
  EXPECT_EQ(Body(fm)["format"], "pathlens-featuremap-layout");

  auto neuron = client_->Get("/neurons/block.relu2/1?image=normal:0");
  ASSERT_EQ(neuron->status, 200) << neuron->body;
  EXPECT_EQ(Body(neuron)["grid"].size(), 64u);

  auto disc = client_->Post(
      "/discrepancy",
      json{{"image", "adversarial:1"}, {"layer", "stem.relu"}, {"feature_map", 0}, {"y", 3},
           {"x", 3}}
          .dump(),
      "application/json");
  ASSERT_EQ(disc->status, 202) << disc->body;
  const json map = WaitForJob(Body(disc)["job"]);
  ASSERT_EQ(map["status"], "done") << map.dump();
  EXPECT_EQ(map["result"]["patch_size"], 2);
  EXPECT_EQ(map["result"]["deltas"].size(), 16u);
}

TEST_F(ServiceTest, ErrorsMapToStatusCodes) {
  UploadModel();
  EXPECT_EQ(client_->Get("/datapaths/unknown")->status, 404);
  EXPECT_EQ(client_->Get("/jobs/unknown")->status, 404);
  EXPECT_EQ(client_->Put("/comparison", R"({"groups": ["ghost"]})", "application/json")->status,
            404);
  EXPECT_EQ(client_->Post("/extract", "{not json", "application/json")->status, 400);
  UploadGroups();
  EXPECT_EQ(client_->Post("/extract", R"({"config": {"threshold": 2.0}})", "application/json")
                ->status,
            422);
  auto bad_map = client_->Get("/neurons/block.relu2/99?image=normal:0");
  EXPECT_EQ(bad_map->status, 422);
  const json err = Body(bad_map);
  EXPECT_EQ(err["error"]["code"], "out_of_range");
  EXPECT_EQ(client_->Get("/neurons/block.relu2/0?image=normal:99")->status, 404);
  EXPECT_EQ(client_->Get("/neurons/nope/0?image=normal:0")->status, 404);
  EXPECT_EQ(client_->Put("/groups/bad", "garbage", "application/octet-stream")->status, 422);
  EXPECT_EQ(client_->Get("/layout/layers?budget=abc")->status, 422);
}

TEST_F(ServiceTest, DiskCacheSurvivesRestart) {
  UploadModel();
  UploadGroups();
  const json first = Extract();
  service_->Stop();
  SetUp();
  UploadModel();
  UploadGroups();
  const json second = Extract();
  EXPECT_EQ(second["datapaths"], first["datapaths"]);
  EXPECT_TRUE(second["cache_hits"]["normal"].get<bool>());
  EXPECT_EQ(Status()["extractions_computed"], 0);
}

}  // namespace
}  // namespace pathlens::testing
