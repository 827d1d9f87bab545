// Copyright 2026 The odsel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "odsel/registry.h"

#include <fstream>
#include <sstream>

#include "builtin_registry_data.h"

namespace odsel {

namespace {

constexpr std::array<std::string_view, kTagCount> kTagNames = {
    "high_dimensional", "low_dimensional", "small_sample",    "large_sample",
    "imbalanced",       "noisy_features",  "heavy_tailed",    "skewed",
    "multimodal",       "sparse",          "correlated_features", "mixed_scale",
    "near_gaussian",    "labeled_anomalies_available", "local_anomalies", "global_anomalies"};

TagSet parse_tag_list(const json& list, const std::string& where) {
  if (!list.is_array()) fail(ErrorCode::kParse, where + ": expected an array of tags");
  TagSet out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string field = where + "[" + std::to_string(i) + "]";
    if (!list[i].is_string()) fail(ErrorCode::kParse, field + ": expected a string");
    const auto name = list[i].get<std::string>();
    auto tag = parse_tag(name);
    if (!tag) fail(ErrorCode::kVocabulary, field + ": unknown tag '" + name + "'");
    out.insert(*tag);
  }
  return out;
}

}  // namespace

const std::array<Tag, kTagCount>& all_tags() {
  static const std::array<Tag, kTagCount> tags = [] {
    std::array<Tag, kTagCount> t{};
    for (std::size_t i = 0; i < kTagCount; ++i) t[i] = static_cast<Tag>(i);
    return t;
  }();
  return tags;
}

std::string_view to_string(Tag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

std::optional<Tag> parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kTagCount; ++i) {
    if (kTagNames[i] == name) return static_cast<Tag>(i);
  }
  return std::nullopt;
}

std::vector<std::string> tag_names(const TagSet& tags) {
  std::vector<std::string> out;
  for (Tag t : tags) out.emplace_back(to_string(t));
  return out;
}

Registry::Registry(std::map<DetectorId, ModelMetadata> models) : models_(std::move(models)) {
  for (const auto& [id, meta] : models_) {
    for (Tag t : meta.strengths) {
      if (meta.weaknesses.count(t)) {
        fail(ErrorCode::kVocabulary, std::string(odsel::to_string(id)) + ": tag '" +
                                         std::string(odsel::to_string(t)) + "' is both a strength and a weakness");
      }
    }
  }
}

const ModelMetadata& Registry::at(DetectorId id) const {
  auto it = models_.find(id);
  if (it == models_.end()) {
    fail(ErrorCode::kInvalidArgument, "registry has no metadata for " + std::string(odsel::to_string(id)));
  }
  return it->second;
}

Registry Registry::merged_with(const Registry& overlay) const {
  auto models = models_;
  for (const auto& [id, meta] : overlay.models_) models[id] = meta;
  return Registry(std::move(models));
}

const Registry& builtin_registry() {
  static const Registry registry = parse_registry(kBuiltinRegistryJson, "builtin registry");
  return registry;
}

Registry parse_registry(std::string_view text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, source + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("models") || !j["models"].is_array()) {
    fail(ErrorCode::kParse, source + ": expected {\"version\": 1, \"models\": [...]}");
  }
  if (j.contains("version") && j["version"] != 1) {
    fail(ErrorCode::kVersionMismatch, source + ": unsupported registry version " + j["version"].dump());
  }
  std::map<DetectorId, ModelMetadata> models;
  const json& list = j["models"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = source + ": models[" + std::to_string(i) + "]";
    const json& m = list[i];
    if (!m.is_object() || !m.contains("id") || !m["id"].is_string()) {
      fail(ErrorCode::kParse, where + ": missing string field 'id'");
    }
    const auto name = m["id"].get<std::string>();
    const auto id = parse_detector_id(name);
    if (!id) fail(ErrorCode::kVocabulary, where + ".id: unknown detector id '" + name + "'");
    if (models.count(*id)) fail(ErrorCode::kVocabulary, where + ".id: duplicate detector id '" + name + "'");
    ModelMetadata meta{*id,
                       parse_tag_list(m.value("strengths", json::array()), where + ".strengths"),
                       parse_tag_list(m.value("weaknesses", json::array()), where + ".weaknesses"),
                       m.value("notes", std::string())};
    for (Tag t : meta.strengths) {
      if (meta.weaknesses.count(t)) {
        fail(ErrorCode::kVocabulary, where + ": tag '" + std::string(to_string(t)) +
                                         "' listed as both strength and weakness");
      }
    }
    models.emplace(*id, std::move(meta));
  }
  return Registry(std::move(models));
}

std::string registry_to_text(const Registry& registry) {
  // Hand-assembled so entries keep detector order and keys keep schema order.
  std::ostringstream out;
  out << "{\n  \"version\": 1,\n  \"models\": [";
  bool first = true;
  for (const auto& [id, meta] : registry.models()) {
    out << (first ? "\n" : ",\n");
    first = false;
    out << "    {\"id\": " << json(std::string(to_string(id))).dump()
        << ", \"strengths\": " << json(tag_names(meta.strengths)).dump()
        << ", \"weaknesses\": " << json(tag_names(meta.weaknesses)).dump()
        << ", \"notes\": " << json(meta.notes).dump() << "}";
  }
  out << "\n  ]\n}\n";
  return out.str();
}

Registry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open registry " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return builtin_registry().merged_with(parse_registry(ss.str(), path.string()));
}

void save_registry(const Registry& registry, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write registry " + path.string());
  out << registry_to_text(registry);
}

}  // namespace odsel
