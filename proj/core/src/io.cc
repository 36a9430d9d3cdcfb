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

#include "pathlens/io.h"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "pathlens/error.h"

namespace pathlens {

using nlohmann::json;

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    Fail(ErrorCode::kIo, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string JsonHash(const json& document) { return Sha256Hex(document.dump()); }

std::string EncodeFloat32LE(std::span<const float> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return out;
}

std::vector<float> DecodeFloat32LE(std::string_view bytes) {
  Require(bytes.size() % 4 == 0, ErrorCode::kFormat,
          "float32 payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open file for reading", path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void WriteFile(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIo, "cannot open file for writing", path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  Require(out.good(), ErrorCode::kIo, "write failed", path.string());
}

void WriteJson(const std::filesystem::path& path, const json& document) {
  WriteFile(path, document.dump(2) + "\n");
}

json ReadJson(const std::filesystem::path& path) {
  try {
    return json::parse(ReadFile(path));
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kFormat, e.what(), path.string());
  }
}

// ---------------------------------------------------------------------------
// Model manifest

namespace {

json HierarchyToJson(const Hierarchy& hierarchy, const ModelGraph& model, int index) {
  const HierarchyNode& node = hierarchy.node(index);
  json out{{"name", node.name}};
  if (node.layer >= 0) {
    out["layer"] = model.node(node.layer).id;
    return out;
  }
  json children = json::array();
  for (int child : node.children) children.push_back(HierarchyToJson(hierarchy, model, child));
  out["children"] = std::move(children);
  return out;
}

void HierarchyFromJson(const json& doc, int parent, Hierarchy& hierarchy,
                       const std::map<std::string, int>& index_of) {
  for (const auto& child : doc.at("children")) {
    const std::string name = child.at("name").get<std::string>();
    if (child.contains("layer")) {
      const std::string layer = child.at("layer").get<std::string>();
      const auto it = index_of.find(layer);
      Require(it != index_of.end(), ErrorCode::kInvariantViolation,
              "hierarchy leaf references unknown layer", layer);
      hierarchy.AddLeaf(parent, it->second, name);
    } else {
      HierarchyFromJson(child, hierarchy.AddGroup(parent, name), hierarchy, index_of);
    }
  }
}

}  // namespace

nlohmann::json ModelManifest(const ModelGraph& model, std::string_view weights_file) {
  json nodes = json::array();
  json edges = json::array();
  std::size_t offset = 0;
  for (const LayerNode& node : model.nodes()) {
    json record{{"id", node.id},
                {"kind", LayerKindName(node.kind)},
                {"shape", {node.shape.channels, node.shape.height, node.shape.width}}};
    if (node.kind == LayerKind::kConv || node.kind == LayerKind::kMaxPool ||
        node.kind == LayerKind::kAvgPool) {
      record["kernel"] = node.kernel;
      record["stride"] = node.stride;
    }
    if (node.kind == LayerKind::kConv) record["padding"] = node.padding;
    if (node.kind == LayerKind::kConv || node.kind == LayerKind::kDense) {
      const Shape& in = model.node(node.inputs[0]).shape;
      json wshape = node.kind == LayerKind::kConv
                        ? json{node.shape.channels, in.channels, node.kernel, node.kernel}
                        : json{node.shape.channels, static_cast<int>(in.size())};
      record["weights"] = {{"offset", offset}, {"count", node.weights.size()}, {"shape", wshape}};
      offset += node.weights.size();
      record["bias"] = {{"offset", offset}, {"count", node.bias.size()}};
      offset += node.bias.size();
    }
    nodes.push_back(std::move(record));
    for (int input : node.inputs) edges.push_back({model.node(input).id, node.id});
  }
  return json{{"format", kModelFormat},
              {"version", 1},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"hierarchy", HierarchyToJson(model.hierarchy(), model, Hierarchy::kRoot)},
              {"weights_file", weights_file},
              {"weight_count", offset}};
}

std::vector<float> FlattenWeights(const ModelGraph& model) {
  std::vector<float> flat;
  flat.reserve(model.ParameterCount());
  for (const LayerNode& node : model.nodes()) {
    for (double w : node.weights) flat.push_back(static_cast<float>(w));
    for (double b : node.bias) flat.push_back(static_cast<float>(b));
  }
  return flat;
}

ModelGraph ModelFromManifest(const json& manifest, std::span<const float> weights) {
  try {
    Require(manifest.value("format", "") == kModelFormat, ErrorCode::kFormat,
            "not a pathlens model manifest");
    const auto& records = manifest.at("nodes");
    const std::size_t count = records.size();
    Require(count > 0, ErrorCode::kInvariantViolation, "model has no layers");
    Require(count <= static_cast<std::size_t>(kMaxNodes), ErrorCode::kInvariantViolation,
            "model exceeds the supported envelope of " + std::to_string(kMaxNodes) + " layers");
    Require(manifest.at("weight_count").get<std::size_t>() == weights.size(), ErrorCode::kFormat,
            "weight sidecar holds " + std::to_string(weights.size()) +
                " values, manifest declares " +
                std::to_string(manifest.at("weight_count").get<std::size_t>()));

    std::vector<LayerNode> parsed(count);
    std::map<std::string, int> manifest_index;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& r = records[i];
      LayerNode& node = parsed[i];
      node.id = r.at("id").get<std::string>();
      node.kind = ParseLayerKind(r.at("kind").get<std::string>());
      const auto shape = r.at("shape").get<std::vector<int>>();
      Require(shape.size() == 3, ErrorCode::kFormat, "shape must be [C,H,W]", node.id);
      node.shape = Shape{shape[0], shape[1], shape[2]};
      node.kernel = r.value("kernel", 0);
      node.stride = r.value("stride", 1);
      node.padding = r.value("padding", 0);
      for (const char* field : {"weights", "bias"}) {
        if (!r.contains(field)) continue;
        const auto off = r.at(field).at("offset").get<std::size_t>();
        const auto n = r.at(field).at("count").get<std::size_t>();
        Require(off + n <= weights.size(), ErrorCode::kFormat,
                std::string(field) + " descriptor exceeds the sidecar", node.id);
        auto& target = std::string_view(field) == "weights" ? node.weights : node.bias;
        target.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
          const float v = weights[off + k];
          Require(std::isfinite(v), ErrorCode::kNumeric, "non-finite weight", node.id);
          target.push_back(v);
        }
      }
      Require(manifest_index.emplace(node.id, static_cast<int>(i)).second,
              ErrorCode::kInvariantViolation, "duplicate layer id", node.id);
    }

    // Edges in listed order define each node's producers.
    std::vector<std::vector<int>> producers(count);
    for (const auto& edge : manifest.at("edges")) {
      const auto from = edge.at(0).get<std::string>();
      const auto to = edge.at(1).get<std::string>();
      const auto f = manifest_index.find(from);
      const auto t = manifest_index.find(to);
      Require(f != manifest_index.end() && t != manifest_index.end(),
              ErrorCode::kInvariantViolation, "edge references unknown layer", from + "->" + to);
      producers[t->second].push_back(f->second);
    }

    // Stable topological order (Kahn, manifest order among ready nodes).
    std::vector<int> indegree(count, 0);
    std::vector<std::vector<int>> consumers(count);
    for (std::size_t i = 0; i < count; ++i) {
      indegree[i] = static_cast<int>(producers[i].size());
      for (int p : producers[i]) consumers[p].push_back(static_cast<int>(i));
    }
    std::vector<int> order;
    std::vector<bool> placed(count, false);
    while (order.size() < count) {
      int next = -1;
      for (std::size_t i = 0; i < count; ++i) {
        if (!placed[i] && indegree[i] == 0) {
          next = static_cast<int>(i);
          break;
        }
      }
      Require(next >= 0, ErrorCode::kInvariantViolation, "layer graph contains a cycle");
      placed[next] = true;
      order.push_back(next);
      for (int c : consumers[next]) --indegree[c];
    }
    std::vector<int> position(count);
    for (std::size_t k = 0; k < count; ++k) position[order[k]] = static_cast<int>(k);

    std::vector<LayerNode> nodes;
    std::map<std::string, int> index_of;
    for (int original : order) {
      LayerNode node = std::move(parsed[original]);
      for (int p : producers[original]) node.inputs.push_back(position[p]);
      index_of.emplace(node.id, static_cast<int>(nodes.size()));
      nodes.push_back(std::move(node));
    }

    Hierarchy hierarchy;
    HierarchyFromJson(manifest.at("hierarchy"), Hierarchy::kRoot, hierarchy, index_of);
    return ModelGraph(std::move(nodes), std::move(hierarchy));
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed model manifest: ") + e.what());
  }
}

void SaveModel(const ModelGraph& model, const std::filesystem::path& manifest_path) {
  std::filesystem::path sidecar = manifest_path;
  sidecar.replace_extension(".bin");
  WriteJson(manifest_path, ModelManifest(model, sidecar.filename().string()));
  WriteFile(sidecar, EncodeFloat32LE(FlattenWeights(model)));
}

ModelGraph LoadModel(const std::filesystem::path& manifest_path) {
  const json manifest = ReadJson(manifest_path);
  Require(manifest.contains("weights_file"), ErrorCode::kFormat,
          "manifest lacks weights_file", manifest_path.string());
  const auto sidecar =
      manifest_path.parent_path() / manifest.at("weights_file").get<std::string>();
  return ModelFromManifest(manifest, DecodeFloat32LE(ReadFile(sidecar)));
}

std::string ModelHash(const ModelGraph& model) {
  return Sha256Hex(ModelManifest(model, "").dump() +
                   EncodeFloat32LE(FlattenWeights(model)));
}

// ---------------------------------------------------------------------------
// Examples

std::string EncodeExamples(const ExampleSet& set) {
  Require(!set.empty(), ErrorCode::kInvalidArgument, "cannot encode an empty example set",
          set.name);
  const Shape shape = set.examples.front().pixels.shape();
  json labels = json::array();
  json tags = json::array();
  std::vector<float> pixels;
  pixels.reserve(set.size() * shape.size());
  for (const Example& ex : set.examples) {
    Require(ex.pixels.shape() == shape, ErrorCode::kShapeMismatch,
            "examples in one file must share a shape", set.name);
    labels.push_back(ex.label);
    tags.push_back(ex.group_tag);
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x)
        for (int c = 0; c < shape.channels; ++c)
          pixels.push_back(static_cast<float>(ex.pixels.at(c, y, x)));
  }
  const json header{{"format", kExamplesFormat},
                    {"version", 1},
                    {"count", set.size()},
                    {"height", shape.height},
                    {"width", shape.width},
                    {"channels", shape.channels},
                    {"labels", labels},
                    {"group_tags", tags}};
  return header.dump() + "\n" + EncodeFloat32LE(pixels);
}

ExampleSet DecodeExamples(std::string_view bytes, std::string name) {
  const std::size_t newline = bytes.find('\n');
  Require(newline != std::string_view::npos, ErrorCode::kFormat,
          "example file lacks a header line", name);
  json header;
  try {
    header = json::parse(bytes.substr(0, newline));
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kFormat, std::string("bad example header: ") + e.what(), name);
  }
  try {
    Require(header.value("format", "") == kExamplesFormat, ErrorCode::kFormat,
            "not a pathlens example file", name);
    const auto count = header.at("count").get<std::size_t>();
    const Shape shape{header.at("channels").get<int>(), header.at("height").get<int>(),
                      header.at("width").get<int>()};
    Require(shape.channels > 0 && shape.height > 0 && shape.width > 0, ErrorCode::kFormat,
            "example dimensions must be positive", name);
    const auto labels = header.at("labels").get<std::vector<int>>();
    const auto tags = header.at("group_tags").get<std::vector<std::string>>();
    Require(labels.size() == count && tags.size() == count, ErrorCode::kFormat,
            "labels/group_tags length differs from count", name);
    const auto pixels = DecodeFloat32LE(bytes.substr(newline + 1));
    Require(pixels.size() == count * shape.size(), ErrorCode::kFormat,
            "pixel payload holds " + std::to_string(pixels.size()) + " values, expected " +
                std::to_string(count * shape.size()),
            name);
    ExampleSet set;
    set.name = std::move(name);
    std::size_t k = 0;
    for (std::size_t e = 0; e < count; ++e) {
      Example ex;
      ex.pixels = Tensor(shape);
      ex.label = labels[e];
      ex.group_tag = tags[e];
      for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x)
          for (int c = 0; c < shape.channels; ++c) {
            const float v = pixels[k++];
            Require(std::isfinite(v), ErrorCode::kNumeric, "non-finite pixel", set.name);
            ex.pixels.at(c, y, x) = std::clamp(static_cast<double>(v), 0.0, 1.0);
          }
      set.examples.push_back(std::move(ex));
    }
    return set;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed example header: ") + e.what(), name);
  }
}

void SaveExamples(const ExampleSet& set, const std::filesystem::path& path) {
  WriteFile(path, EncodeExamples(set));
}

ExampleSet LoadExamples(const std::filesystem::path& path) {
  return DecodeExamples(ReadFile(path), path.stem().string());
}

std::string ExampleSetHash(const ExampleSet& set) { return Sha256Hex(EncodeExamples(set)); }

}  // namespace pathlens
