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

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "odsel/core.h"

namespace odsel {

// Closed tag vocabulary shared by model metadata and dataset tags.
enum class Tag {
  kHighDimensional,
  kLowDimensional,
  kSmallSample,
  kLargeSample,
  kImbalanced,
  kNoisyFeatures,
  kHeavyTailed,
  kSkewed,
  kMultimodal,
  kSparse,
  kCorrelatedFeatures,
  kMixedScale,
  kNearGaussian,
  kLabeledAnomaliesAvailable,
  kLocalAnomalies,
  kGlobalAnomalies,
};

inline constexpr std::size_t kTagCount = 16;

// Vocabulary order.
const std::array<Tag, kTagCount>& all_tags();
std::string_view to_string(Tag tag);
std::optional<Tag> parse_tag(std::string_view name);

using TagSet = std::set<Tag>;

std::vector<std::string> tag_names(const TagSet& tags);

struct ModelMetadata {
  DetectorId id;
  TagSet strengths;
  TagSet weaknesses;
  std::string notes;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

class Registry {
 public:
  Registry() = default;
  explicit Registry(std::map<DetectorId, ModelMetadata> models);

  bool contains(DetectorId id) const { return models_.count(id) > 0; }
  // Throws kInvalidArgument when `id` has no metadata.
  const ModelMetadata& at(DetectorId id) const;
  const std::map<DetectorId, ModelMetadata>& models() const { return models_; }
  bool total() const { return models_.size() == kAllDetectors.size(); }

  // Entries of `overlay` replace ours.
  Registry merged_with(const Registry& overlay) const;

  friend bool operator==(const Registry&, const Registry&) = default;

 private:
  std::map<DetectorId, ModelMetadata> models_;
};

// The shipped metadata (data/registry.json, embedded at build time).
const Registry& builtin_registry();

// Parses the registry JSON schema. Partial registries are allowed here.
// Throws kParse on malformed JSON and kVocabulary naming the offending field
// for unknown ids/tags, duplicate ids, or a tag in both sets.
Registry parse_registry(std::string_view text, const std::string& source = "<memory>");
std::string registry_to_text(const Registry& registry);

// A file covering only some detectors is merged over the builtin registry.
Registry load_registry(const std::filesystem::path& path);
void save_registry(const Registry& registry, const std::filesystem::path& path);

}  // namespace odsel
