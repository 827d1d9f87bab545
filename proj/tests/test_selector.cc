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

#include <memory>
#include <string>

#include "doctest.h"
#include "fakes.h"
#include "odsel/io.h"
#include "odsel/rng.h"
#include "odsel/selector.h"

using namespace odsel;

namespace {

ModelMetadata meta(DetectorId id, TagSet strengths, TagSet weaknesses) {
  return {id, std::move(strengths), std::move(weaknesses), ""};
}

bool is_tag_request(const json& body) {
  return body["messages"][0]["content"].get<std::string>().find("Allowed tags") != std::string::npos;
}

// Client whose tag replies and refine replies come from the given strings.
struct ScriptedLlm {
  ScriptedLlm(std::string tag_reply, std::vector<std::string> refine_replies)
      : transport(std::make_shared<fakes::FunctionTransport>([this, tag_reply, refine_replies](const json& body) {
          if (is_tag_request(body)) {
            ++tag_calls;
            return tag_reply;
          }
          const std::size_t at = std::min(refine_calls++, refine_replies.size() - 1);
          return refine_replies[at];
        })),
        client(fakes::test_config(), Transcript(), transport) {}

  std::size_t tag_calls = 0;
  std::size_t refine_calls = 0;
  std::shared_ptr<fakes::FunctionTransport> transport;
  LlmClient client;
};

Matrix gaussian(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return x;
}

const std::vector<DetectorId> kPool(kAllDetectors.begin(), kAllDetectors.end());

}  // namespace

TEST_CASE("rule-based tag examples") {
  DatasetProfile p;
  p.n = 500;
  p.d = 100;
  p.skew_mean = 0.1;
  p.kurt_mean = 0.2;
  CHECK(map_tags_rules(p) == TagSet{Tag::kHighDimensional, Tag::kSmallSample, Tag::kNearGaussian});
  p.n = 50000;
  p.d = 10;
  p.skew_mean = 1.5;
  p.kurt_mean = 4.0;
  p.sparsity = 0.6;
  p.corr_mean = 0.7;
  p.scale_spread = 2.5;
  p.noise_level = 0.4;
  p.bimodality = 0.5;
  p.anomaly_ratio = 0.01;
  CHECK(map_tags_rules(p) == TagSet{Tag::kLowDimensional, Tag::kLargeSample, Tag::kSkewed, Tag::kHeavyTailed,
                                    Tag::kNoisyFeatures, Tag::kSparse, Tag::kCorrelatedFeatures, Tag::kMixedScale,
                                    Tag::kImbalanced, Tag::kLabeledAnomaliesAvailable, Tag::kMultimodal});
  p.anomaly_ratio = 0.0;
  CHECK(!map_tags_rules(p).count(Tag::kLabeledAnomaliesAvailable));
}

TEST_CASE("alignment score examples") {
  const TagSet tags = {Tag::kHighDimensional, Tag::kSmallSample};
  CHECK(score_model(meta(DetectorId::kKnn, {Tag::kLowDimensional, Tag::kGlobalAnomalies},
                         {Tag::kHighDimensional, Tag::kMixedScale}),
                    tags) == -0.5);
  CHECK(score_model(meta(DetectorId::kAe, {Tag::kHighDimensional, Tag::kCorrelatedFeatures},
                         {Tag::kSmallSample, Tag::kMultimodal}),
                    tags) == 0.0);
  CHECK(score_model(meta(DetectorId::kAe1Svm, {Tag::kHighDimensional}, {}), tags) == 1.0);
  CHECK(score_model(meta(DetectorId::kLof, {}, {}), tags) == 0.0);

  SelectorConfig heavy;
  heavy.tag_weights[Tag::kHighDimensional] = 3.0;
  CHECK(score_model(meta(DetectorId::kAe, {Tag::kHighDimensional, Tag::kSparse}, {}), tags, heavy) == 0.75);
}

TEST_CASE("candidate set examples") {
  const ScoreMap scores = {{DetectorId::kKnn, 0.5}, {DetectorId::kLof, 0.2}, {DetectorId::kAe, -0.1}};
  CHECK(candidate_set(scores, 0.2) == DetectorSet{DetectorId::kKnn, DetectorId::kLof});
  CHECK(candidate_set(scores, 0.9) == DetectorSet{DetectorId::kKnn});
  CHECK(candidate_set_raw(scores, 0.9).empty());
  CHECK(candidate_set(scores, -1.0).size() == 3);
}

TEST_CASE("ties break on the lexicographically smaller id") {
  // Enum order puts knn first, but "ae" < "knn" as strings.
  const ScoreMap scores = {{DetectorId::kKnn, 0.5}, {DetectorId::kAe, 0.5}, {DetectorId::kLunar, 0.5}};
  CHECK(argmax_score(scores) == DetectorId::kAe);
  const DetectorSet among = {DetectorId::kKnn, DetectorId::kLunar};
  CHECK(argmax_score(scores, &among) == DetectorId::kKnn);
  CHECK_THROWS_AS(argmax_score({}), Error);
}

TEST_CASE("property: candidate sets shrink as delta grows") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMap scores;
    for (DetectorId id : kAllDetectors) {
      if (rng.below(3) != 0) scores[id] = std::round(rng.uniform(-1.0, 1.0) * 4.0) / 4.0;
    }
    if (scores.empty()) continue;
    DetectorSet previous = candidate_set_raw(scores, -1.0);
    CHECK(previous.size() == scores.size());
    for (int step = -9; step <= 10; ++step) {
      const DetectorSet current = candidate_set_raw(scores, step / 10.0);
      for (DetectorId id : current) CHECK(previous.count(id));
      previous = current;
    }
    CHECK(!candidate_set(scores, 1.5).empty());
  }
}

TEST_CASE("property: scores are bounded and invariant to uniform weight scaling") {
  Rng rng(23);
  const auto& tags_all = all_tags();
  for (int trial = 0; trial < 200; ++trial) {
    TagSet strengths, weaknesses, tags;
    for (Tag t : tags_all) {
      const auto r = rng.below(4);
      if (r == 0) strengths.insert(t);
      if (r == 1) weaknesses.insert(t);
      if (rng.below(2) == 0) tags.insert(t);
    }
    SelectorConfig base, scaled;
    for (Tag t : tags_all) {
      const double w = rng.uniform(0.1, 3.0);
      base.tag_weights[t] = w;
      scaled.tag_weights[t] = 7.5 * w;
    }
    const auto m = meta(DetectorId::kKnn, strengths, weaknesses);
    const double s = score_model(m, tags, base);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(score_model(m, tags, scaled) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("selector config validation") {
  SelectorConfig c;
  c.tag_weights[Tag::kSparse] = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.tag_weights[Tag::kSparse] = 2.0;
  c.delta = std::nan("");
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("offline selection is deterministic and prefers ae for wide small data") {
  Rng rng(2);
  const DataMatrix data(gaussian(rng, 500, 100));
  const auto a = select(data, nullptr, kPool, builtin_registry(), {});
  const auto b = select(data, nullptr, kPool, builtin_registry(), {});
  CHECK(a == b);
  CHECK(a.tags.count(Tag::kHighDimensional));
  CHECK(a.tags.count(Tag::kSmallSample));
  CHECK(a.scores.at(DetectorId::kAe) > a.scores.at(DetectorId::kKnn));
  CHECK(a.mode == SelectorMode::kOffline);
  CHECK(a.warnings.empty());
  CHECK(a.reason.find("highest alignment score") != std::string::npos);
  const auto expected = argmax_score(a.scores, &a.candidates);
  CHECK(a.chosen == expected);
  CHECK(selection_to_json(a).dump() == selection_to_json(b).dump());
}

TEST_CASE("offline selection ignores notes") {
  Rng rng(3);
  const DataMatrix data(gaussian(rng, 80, 4));
  SelectorConfig with_notes;
  with_notes.notes = "the anomalies are local";
  const auto a = select(data, nullptr, kPool, builtin_registry(), {});
  const auto b = select(data, nullptr, kPool, builtin_registry(), with_notes);
  CHECK(a.chosen == b.chosen);
  CHECK(a.scores == b.scores);
}

TEST_CASE("selection validates the pool") {
  Rng rng(3);
  const DataMatrix data(gaussian(rng, 20, 2));
  CHECK_THROWS_AS(select(data, nullptr, {}, builtin_registry(), {}), Error);
  const Registry partial({{DetectorId::kKnn, meta(DetectorId::kKnn, {}, {})}});
  CHECK_THROWS_AS(select(data, nullptr, {DetectorId::kLof}, partial, {}), Error);
  SelectorConfig llm;
  llm.mode = SelectorMode::kLlm;
  CHECK_THROWS_AS(select(data, nullptr, kPool, builtin_registry(), llm), Error);
}

TEST_CASE("llm tags: valid replies are used, unknown tags dropped") {
  Rng rng(5);
  const auto p = profile(DataMatrix(gaussian(rng, 60, 3)));
  ScriptedLlm llm(R"({"tags": ["sparse", "gigantic", "skewed"]})", {"{}"});
  std::vector<std::string> warnings;
  CHECK(map_tags_llm(p, std::nullopt, llm.client, &warnings) == TagSet{Tag::kSparse, Tag::kSkewed});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("gigantic") != std::string::npos);
}

TEST_CASE("llm tags: malformed or empty replies fall back to the rules") {
  Rng rng(5);
  const auto p = profile(DataMatrix(gaussian(rng, 60, 3)));
  for (const std::string reply : {"I think it is sparse", R"({"tags": ["gigantic"]})", R"({"tags": 5})"}) {
    ScriptedLlm llm(reply, {"{}"});
    std::vector<std::string> warnings;
    CHECK(map_tags_llm(p, std::nullopt, llm.client, &warnings) == map_tags_rules(p));
    CHECK(!warnings.empty());
  }
  LlmClient dead(fakes::test_config(), Transcript(), std::make_shared<fakes::ScriptedTransport>());
  CHECK(map_tags_llm(p, std::nullopt, dead) == map_tags_rules(p));
}

TEST_CASE("llm refinement picks a named candidate") {
  const ScoreMap scores = {{DetectorId::kKnn, 0.5}, {DetectorId::kLof, 0.5}, {DetectorId::kAe, -1.0}};
  const DetectorSet cands = {DetectorId::kKnn, DetectorId::kLof};
  ScriptedLlm llm("", {R"({"model": "lof", "reason": "local structure"})"});
  const auto [id, reason] = refine_llm(cands, scores, builtin_registry(), {}, std::nullopt, llm.client);
  CHECK(id == DetectorId::kLof);
  CHECK(reason == "local structure");
  CHECK(llm.refine_calls == 1);
}

TEST_CASE("llm refinement retries once, then falls back") {
  const ScoreMap scores = {{DetectorId::kKnn, 0.5}, {DetectorId::kLof, 0.25}, {DetectorId::kAe, 1.0}};
  const DetectorSet cands = {DetectorId::kKnn, DetectorId::kLof};

  ScriptedLlm fixed("", {R"({"model": "ae", "reason": "x"})", R"({"model": "knn", "reason": "corrected"})"});
  std::vector<std::string> warnings;
  auto [id, reason] = refine_llm(cands, scores, builtin_registry(), {}, std::nullopt, fixed.client, &warnings);
  CHECK(id == DetectorId::kKnn);
  CHECK(reason == "corrected");
  CHECK(fixed.refine_calls == 2);

  ScriptedLlm stubborn("", {R"({"model": "ae", "reason": "x"})"});
  std::tie(id, reason) = refine_llm(cands, scores, builtin_registry(), {}, std::nullopt, stubborn.client);
  CHECK(id == DetectorId::kKnn);
  CHECK(reason == kSymbolicFallbackReason);
  CHECK(stubborn.refine_calls == 2);

  ScriptedLlm garbled("", {"no idea"});
  std::tie(id, reason) = refine_llm(cands, scores, builtin_registry(), {}, std::nullopt, garbled.client);
  CHECK(reason == kSymbolicFallbackReason);
  CHECK(garbled.refine_calls == 2);

  LlmClient dead(fakes::test_config(), Transcript(), std::make_shared<fakes::ScriptedTransport>());
  std::tie(id, reason) = refine_llm(cands, scores, builtin_registry(), {}, std::nullopt, dead);
  CHECK(id == DetectorId::kKnn);
  CHECK(reason == kSymbolicFallbackReason);
}

TEST_CASE("a single candidate needs no llm call") {
  auto forbidden = std::make_shared<fakes::ForbiddenTransport>();
  LlmClient client(fakes::test_config(), Transcript(), forbidden);
  const ScoreMap scores = {{DetectorId::kIforest, 0.25}};
  const auto [id, reason] =
      refine_llm({DetectorId::kIforest}, scores, builtin_registry(), {}, std::nullopt, client);
  CHECK(id == DetectorId::kIforest);
  CHECK(reason == "only candidate (S=0.2500)");
  CHECK(forbidden->calls == 0);
}

TEST_CASE("llm selection replays identically from a recorded transcript") {
  const auto syn = make_synthetic(SyntheticKind::kLabeledSemi, 1);
  SelectorConfig config;
  config.mode = SelectorMode::kLlm;
  config.delta = -1.0;
  config.notes = "a handful of confirmed anomalies";
  auto answer = [](const json& body) -> std::string {
    if (is_tag_request(body)) return R"({"tags": ["labeled_anomalies_available", "imbalanced"]})";
    return R"({"model": "devnet", "reason": "labels are available"})";
  };
  LlmClient recorder(fakes::test_config(), Transcript::record(), std::make_shared<fakes::FunctionTransport>(answer));
  const auto live = select(syn.dataset.data, &*syn.supervision, kPool, builtin_registry(), config, &recorder);
  CHECK(live.chosen == DetectorId::kDevNet);
  CHECK(live.mode == SelectorMode::kLlm);

  auto forbidden = std::make_shared<fakes::ForbiddenTransport>();
  LlmClient player(fakes::test_config(), Transcript::replay(recorder.transcript().records()), forbidden);
  const auto replayed = select(syn.dataset.data, &*syn.supervision, kPool, builtin_registry(), config, &player);
  CHECK(replayed == live);
  CHECK(forbidden->calls == 0);
}
