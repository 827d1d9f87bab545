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

// Tag mapping, alignment scoring, candidate sets and refinement.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "odsel/core.h"
#include "odsel/llm.h"
#include "odsel/profiler.h"
#include "odsel/registry.h"

namespace odsel {

enum class SelectorMode { kOffline, kLlm };

std::string_view to_string(SelectorMode mode);

inline constexpr const char* kSymbolicFallbackReason = "symbolic fallback";

struct SelectorConfig {
  double delta = 0.0;
  std::map<Tag, double> tag_weights;  // missing tags weigh 1
  SelectorMode mode = SelectorMode::kOffline;
  std::optional<std::string> notes;  // reaches prompts only, never scores

  double weight(Tag tag) const;
  // Throws kInvalidArgument on a non-positive or non-finite weight or delta.
  void validate() const;
};

using ScoreMap = std::map<DetectorId, double>;
using DetectorSet = std::set<DetectorId>;

struct SelectionResult {
  DetectorId chosen = DetectorId::kKnn;
  std::string reason;
  ScoreMap scores;
  DetectorSet candidates;
  TagSet tags;
  SelectorMode mode = SelectorMode::kOffline;
  DatasetProfile profile;
  // LLM fallbacks taken, one line each; empty in offline mode.
  std::vector<std::string> warnings;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

// Fixed threshold table; never emits local_anomalies or global_anomalies.
TagSet map_tags_rules(const DatasetProfile& profile);

// Out-of-vocabulary tags are dropped. An unusable reply, an empty result or
// an LLM failure falls back to map_tags_rules; `warnings` gets one line then.
TagSet map_tags_llm(const DatasetProfile& profile, const std::optional<std::string>& notes, LlmClient& client,
                    std::vector<std::string>* warnings = nullptr);

// sim - penalty, each normalized by the model's own tag mass; in [-1, 1].
double score_model(const ModelMetadata& meta, const TagSet& tags, const SelectorConfig& config = {});

// Ordering used for every argmax: higher score first, then smaller id name.
bool ranks_before(const std::pair<DetectorId, double>& a, const std::pair<DetectorId, double>& b);
DetectorId argmax_score(const ScoreMap& scores, const DetectorSet* among = nullptr);

// {m : S(m) >= delta}, possibly empty.
DetectorSet candidate_set_raw(const ScoreMap& scores, double delta);
// As above, but an empty result becomes the singleton argmax.
DetectorSet candidate_set(const ScoreMap& scores, double delta);

// Constrained choice among `candidates`; a singleton returns without a call.
// A reply naming no candidate gets one corrective retry, then the symbolic
// argmax with reason kSymbolicFallbackReason.
std::pair<DetectorId, std::string> refine_llm(const DetectorSet& candidates, const ScoreMap& scores,
                                              const Registry& registry, const TagSet& tags,
                                              const std::optional<std::string>& notes, LlmClient& client,
                                              std::vector<std::string>* warnings = nullptr);

// profile -> tags -> scores -> candidates -> choice. `client` is required in
// LLM mode. Throws kInvalidArgument on an empty pool, a pool member missing
// from the registry, or LLM mode without a client.
SelectionResult select(const DataMatrix& data, const Labels* labels, const std::vector<DetectorId>& pool,
                       const Registry& registry, const SelectorConfig& config, LlmClient* client = nullptr);

json selection_to_json(const SelectionResult& result);

}  // namespace odsel
