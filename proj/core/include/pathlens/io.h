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

#ifndef PATHLENS_IO_H_
#define PATHLENS_IO_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathlens/model.h"

namespace pathlens {

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view data);
// Hash of the compact JSON dump (nlohmann orders object keys).
std::string JsonHash(const nlohmann::json& document);

std::string EncodeFloat32LE(std::span<const float> values);
std::vector<float> DecodeFloat32LE(std::string_view bytes);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view contents);
// Pretty JSON with a trailing newline.
void WriteJson(const std::filesystem::path& path, const nlohmann::json& document);
nlohmann::json ReadJson(const std::filesystem::path& path);

// Model manifest ---------------------------------------------------------
//
// The manifest lists nodes (id, kind, shape, window parameters, weight
// descriptors), edges and the hierarchy. Weights live in a sidecar of
// little-endian float32 values in manifest order: for each node, weights
// then bias.

inline constexpr std::string_view kModelFormat = "pathlens-model";
inline constexpr std::string_view kExamplesFormat = "pathlens-examples";

nlohmann::json ModelManifest(const ModelGraph& model, std::string_view weights_file);
std::vector<float> FlattenWeights(const ModelGraph& model);
ModelGraph ModelFromManifest(const nlohmann::json& manifest, std::span<const float> weights);

// Writes `manifest_path` and a sidecar `<stem>.bin` next to it.
void SaveModel(const ModelGraph& model, const std::filesystem::path& manifest_path);
ModelGraph LoadModel(const std::filesystem::path& manifest_path);

std::string ModelHash(const ModelGraph& model);

// Examples ---------------------------------------------------------------
//
// One JSON header line (format, count, height, width, channels, labels,
// group_tags), a newline, then count * height * width * channels
// little-endian float32 pixels per example in height-width-channel order.

std::string EncodeExamples(const ExampleSet& set);
ExampleSet DecodeExamples(std::string_view bytes, std::string name = {});
void SaveExamples(const ExampleSet& set, const std::filesystem::path& path);
ExampleSet LoadExamples(const std::filesystem::path& path);
std::string ExampleSetHash(const ExampleSet& set);

}  // namespace pathlens

#endif  // PATHLENS_IO_H_
