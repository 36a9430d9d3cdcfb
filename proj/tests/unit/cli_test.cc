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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "nets.h"
#include "pathlens/io.h"

namespace pathlens::testing {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliRun Cli(const std::string& args) {
  const fs::path dir = fs::temp_directory_path() / ("pathlens-cli-test-" + std::to_string(getpid()));
  fs::create_directories(dir);
  const std::string cmd = std::string("\"") + PATHLENS_CLI_PATH + "\" " + args + " > \"" +
                          (dir / "out").string() + "\" 2> \"" + (dir / "err").string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = ReadFile(dir / "out");
  r.err = ReadFile(dir / "err");
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pathlens-cli-data-" + std::to_string(getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(Cli("").exit_code, 2);
  EXPECT_EQ(Cli("frobnicate").exit_code, 2);
  EXPECT_EQ(Cli("extract --model").exit_code, 2);
  EXPECT_EQ(Cli("--help").exit_code, 0);
}

TEST_F(CliTest, RuntimeErrorsAreSingleLineJson) {
  const CliRun r = Cli("extract --model " + (dir_ / "absent.json").string() + " --examples " +
                    (dir_ / "absent.examples").string() + " --out " + (dir_ / "dp.json").string());
  EXPECT_EQ(r.exit_code, 1);
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1);
  const auto doc = nlohmann::json::parse(r.err);
  EXPECT_EQ(doc["error"]["code"], "io");
}

TEST_F(CliTest, ExtractWritesDatapathAndSummary) {
  const ModelGraph m = ResidualNet(3);
  SaveModel(m, dir_ / "model.json");
  ExampleSet set = RandomExamples(LoadModel(dir_ / "model.json"), 3, 4);
  SaveExamples(set, dir_ / "x.examples");
  const CliRun r = Cli("extract --model " + (dir_ / "model.json").string() + " --examples " +
                    (dir_ / "x.examples").string() + " --target-class 1 --top-k 2 --layers " +
                    "block.relu1,tail.relu --out " + (dir_ / "dp.json").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto summary = nlohmann::json::parse(r.out);
  const auto doc = ReadJson(dir_ / "dp.json");
  EXPECT_EQ(doc["format"], "pathlens-datapath");
  EXPECT_EQ(doc["layers"].size(), 2u);
  EXPECT_EQ(doc["group"]["target_class"], 1);
  EXPECT_FALSE(summary.empty());
  const CliRun bad = Cli("extract --model " + (dir_ / "model.json").string() + " --examples " +
                      (dir_ / "x.examples").string() + " --tau 1.5 --out " +
                      (dir_ / "dp2.json").string());
  EXPECT_NE(bad.exit_code, 0);
}

}  // namespace
}  // namespace pathlens::testing
