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

#ifndef PATHLENS_TOOLS_SERVICE_H_
#define PATHLENS_TOOLS_SERVICE_H_

#include <filesystem>
#include <memory>
#include <string>

namespace pathlens {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path cache_dir = "pathlens-cache";
  int workers = 2;
  int extraction_threads = 1;
  std::size_t queue_capacity = 64;
  double default_tau = 0.5;
  double default_lambda_seg = 5.0;
};

// HTTP front end over one analysis session. Routes:
//   PUT  /model                      multipart: manifest (JSON), weights (float32 LE)
//   PUT  /groups/{name}              body: example file
//   GET  /groups
//   PUT  /comparison                 {"groups": [...]} (1 to 4 names)
//   POST /extract                    {"groups": [...], "config": {...}} -> job
//   GET  /jobs/{id}
//   GET  /datapaths/{id}
//   GET  /stats
//   GET  /layout/layers              ?stat=&group=&budget=&line_width=&lambda_seg=
//   POST /layout/layers/expand       {"node": path, "action": "expand"|"collapse"}
//   GET  /layout/featuremaps/{layer} ?color=&k=
//   GET  /neurons/{layer}/{map}      ?image=group:index
//   POST /discrepancy                -> job
//   GET  /status
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int Start();
  // Binds and serves on the calling thread until Stop().
  void Run();
  void Stop();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pathlens

#endif  // PATHLENS_TOOLS_SERVICE_H_
