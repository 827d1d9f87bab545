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

#include "odsel/selector.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace odsel {

std::string_view to_string(SelectorMode mode) { return mode == SelectorMode::kLlm ? "llm" : "offline"; }

double SelectorConfig::weight(Tag tag) const {
  auto it = tag_weights.find(tag);
  return it == tag_weights.end() ? 1.0 : it->second;
}

void SelectorConfig::validate() const {
  if (!std::isfinite(delta)) fail(ErrorCode::kInvalidArgument, "delta must be finite");
  for (const auto& [tag, w] : tag_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      fail(ErrorCode::kInvalidArgument, "tag weight for '" + std::string(to_string(tag)) + "' must be positive");
    }
  }
}

TagSet map_tags_rules(const DatasetProfile& p) {
  TagSet tags;
  if (p.d >= 50) tags.insert(Tag::kHighDimensional);
  if (p.d <= 10) tags.insert(Tag::kLowDimensional);
  if (p.n < 1000) tags.insert(Tag::kSmallSample);
  if (p.n >= 50000) tags.insert(Tag::kLargeSample);
  if (p.skew_mean > 1.0) tags.insert(Tag::kSkewed);
  if (p.kurt_mean > 3.0) tags.insert(Tag::kHeavyTailed);
  if (p.noise_level > 0.3) tags.insert(Tag::kNoisyFeatures);
  if (p.sparsity > 0.5) tags.insert(Tag::kSparse);
  if (p.corr_mean > 0.5) tags.insert(Tag::kCorrelatedFeatures);
  if (p.scale_spread > 2.0) tags.insert(Tag::kMixedScale);
  if (p.anomaly_ratio && *p.anomaly_ratio < 0.05) tags.insert(Tag::kImbalanced);
  if (p.labeled_anomalies()) tags.insert(Tag::kLabeledAnomaliesAvailable);
  if (std::abs(p.skew_mean) < 0.3 && std::abs(p.kurt_mean) < 0.5) tags.insert(Tag::kNearGaussian);
  if (p.bimodality >= 0.5) tags.insert(Tag::kMultimodal);
  return tags;
}

namespace {

std::vector<std::string> vocabulary() {
  std::vector<std::string> names;
  for (Tag t : all_tags()) names.emplace_back(to_string(t));
  return names;
}

void warn(std::vector<std::string>* warnings, std::string line) {
  if (warnings) warnings->push_back(std::move(line));
}

double aligned_share(const TagSet& model_tags, const TagSet& tags, const SelectorConfig& config) {
  double total = 0.0;
  double hit = 0.0;
  for (Tag t : model_tags) {
    const double w = config.weight(t);
    total += w;
    if (tags.count(t)) hit += w;
  }
  return total > 0.0 ? hit / total : 0.0;
}

std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", s);
  return buf;
}

}  // namespace

TagSet map_tags_llm(const DatasetProfile& profile, const std::optional<std::string>& notes, LlmClient& client,
                    std::vector<std::string>* warnings) {
  try {
    const auto reply = client.chat(render_tag_prompt(profile_summary_text(profile), notes, vocabulary()));
    const json parsed = parse_json_reply(reply, ReplyShape::kTags);
    TagSet tags;
    std::vector<std::string> dropped;
    for (const auto& item : parsed["tags"]) {
      const auto name = item.get<std::string>();
      if (auto tag = parse_tag(name)) {
        tags.insert(*tag);
      } else {
        dropped.push_back(name);
      }
    }
    for (const auto& name : dropped) warn(warnings, "dropped out-of-vocabulary tag '" + name + "'");
    if (!tags.empty()) return tags;
    warn(warnings, "tag reply held no usable tags; using rule-based tags");
  } catch (const Error& e) {
    warn(warnings, std::string("tag mapping via LLM failed (") + e.what() + "); using rule-based tags");
  }
  return map_tags_rules(profile);
}

double score_model(const ModelMetadata& meta, const TagSet& tags, const SelectorConfig& config) {
  return aligned_share(meta.strengths, tags, config) - aligned_share(meta.weaknesses, tags, config);
}

bool ranks_before(const std::pair<DetectorId, double>& a, const std::pair<DetectorId, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return to_string(a.first) < to_string(b.first);
}

DetectorId argmax_score(const ScoreMap& scores, const DetectorSet* among) {
  std::optional<std::pair<DetectorId, double>> best;
  for (const auto& entry : scores) {
    if (among && !among->count(entry.first)) continue;
    if (!best || ranks_before(entry, *best)) best = entry;
  }
  if (!best) fail(ErrorCode::kInvalidArgument, "argmax over an empty score map");
  return best->first;
}

DetectorSet candidate_set_raw(const ScoreMap& scores, double delta) {
  DetectorSet out;
  for (const auto& [id, s] : scores) {
    if (s >= delta) out.insert(id);
  }
  return out;
}

DetectorSet candidate_set(const ScoreMap& scores, double delta) {
  DetectorSet out = candidate_set_raw(scores, delta);
  if (out.empty() && !scores.empty()) out.insert(argmax_score(scores));
  return out;
}

std::pair<DetectorId, std::string> refine_llm(const DetectorSet& candidates, const ScoreMap& scores,
                                              const Registry& registry, const TagSet& tags,
                                              const std::optional<std::string>& notes, LlmClient& client,
                                              std::vector<std::string>* warnings) {
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "refinement needs at least one candidate");
  if (candidates.size() == 1) {
    const DetectorId only = *candidates.begin();
    return {only, "only candidate (S=" + format_score(scores.at(only)) + ")"};
  }
  std::vector<RefineCandidate> listed;
  std::vector<std::string> allowed;
  for (DetectorId id : candidates) {
    const auto& meta = registry.at(id);
    listed.push_back({std::string(to_string(id)), scores.at(id), tag_names(meta.strengths),
                      tag_names(meta.weaknesses), meta.notes});
    allowed.emplace_back(to_string(id));
  }
  std::sort(allowed.begin(), allowed.end());

  Messages messages = render_refine_prompt(listed, tag_names(tags), notes);
  try {
    for (int attempt = 0; attempt < 2; ++attempt) {
      const std::string reply = client.chat(messages);
      std::string problem;
      try {
        const json parsed = parse_json_reply(reply, ReplyShape::kModelChoice);
        const auto model = parsed["model"].get<std::string>();
        const auto id = parse_detector_id(model);
        if (id && candidates.count(*id)) return {*id, parsed["reason"].get<std::string>()};
        problem = "reply named non-candidate '" + model + "'";
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kParse) throw;
        problem = std::string("unparseable reply: ") + e.what();
      }
      warn(warnings, "refinement " + problem);
      messages.push_back({"assistant", reply});
      messages.push_back(refine_correction(allowed));
    }
  } catch (const Error& e) {
    warn(warnings, std::string("refinement via LLM failed: ") + e.what());
  }
  warn(warnings, "refinement fell back to the highest alignment score");
  return {argmax_score(scores, &candidates), kSymbolicFallbackReason};
}

SelectionResult select(const DataMatrix& data, const Labels* labels, const std::vector<DetectorId>& pool,
                       const Registry& registry, const SelectorConfig& config, LlmClient* client) {
  if (pool.empty()) fail(ErrorCode::kInvalidArgument, "selection pool is empty");
  config.validate();
  for (DetectorId id : pool) {
    if (!registry.contains(id)) {
      fail(ErrorCode::kInvalidArgument, "registry has no metadata for pool member " + std::string(to_string(id)));
    }
  }
  const bool llm = config.mode == SelectorMode::kLlm;
  if (llm && client == nullptr) fail(ErrorCode::kInvalidArgument, "LLM selection needs a configured client");

  SelectionResult result;
  result.mode = config.mode;
  result.profile = profile(data, labels);
  result.tags = llm ? map_tags_llm(result.profile, config.notes, *client, &result.warnings)
                    : map_tags_rules(result.profile);
  for (DetectorId id : pool) result.scores[id] = score_model(registry.at(id), result.tags, config);
  result.candidates = candidate_set(result.scores, config.delta);

  if (llm) {
    std::tie(result.chosen, result.reason) = refine_llm(result.candidates, result.scores, registry, result.tags,
                                                        config.notes, *client, &result.warnings);
  } else {
    result.chosen = argmax_score(result.scores, &result.candidates);
    result.reason = "highest alignment score S=" + format_score(result.scores.at(result.chosen)) + " among " +
                    std::to_string(result.candidates.size()) + " candidate(s)";
  }
  return result;
}

json selection_to_json(const SelectionResult& r) {
  json j = json::object();
  j["mode"] = std::string(to_string(r.mode));
  j["chosen"] = std::string(to_string(r.chosen));
  j["reason"] = r.reason;
  j["tags"] = tag_names(r.tags);
  json scores = json::object();
  for (const auto& [id, s] : r.scores) scores[std::string(to_string(id))] = s;
  j["scores"] = std::move(scores);
  std::vector<std::string> candidates;
  for (DetectorId id : r.candidates) candidates.emplace_back(to_string(id));
  std::sort(candidates.begin(), candidates.end());
  j["candidates"] = candidates;
  j["profile"] = profile_to_json(r.profile);
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace odsel
