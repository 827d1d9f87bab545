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

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "doctest.h"
#include "fakes.h"
#include "odsel/llm.h"

using namespace odsel;

namespace {

const Messages kHello = {{"system", "be brief"}, {"user", "hello"}};

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected an odsel::Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("sha256 of known inputs") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("request body carries model, messages and temperature") {
  const auto config = fakes::test_config();
  const json body = json::parse(chat_request_body(config, kHello));
  CHECK(body["model"] == config.model);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][1]["content"] == "hello");
  CHECK(chat_request_body(config, kHello).find(config.api_key) == std::string::npos);
}

TEST_CASE("replay returns the recorded content without a network") {
  const auto config = fakes::test_config();
  const std::string body = chat_request_body(config, kHello);
  auto forbidden = std::make_shared<fakes::ForbiddenTransport>();
  LlmClient client(config, Transcript::replay({{sha256_hex(body), body, fakes::chat_response("ok")}}), forbidden);
  CHECK(client.chat(kHello) == "ok");
  CHECK(forbidden->calls == 0);

  std::string message;
  const Messages other = {{"user", "something else"}};
  CHECK(code_of([&] { client.chat(other); }, &message) == ErrorCode::kReplayMiss);
  CHECK(message.find(sha256_hex(chat_request_body(config, other))) != std::string::npos);
}

TEST_CASE("record then replay through a file") {
  const auto path = std::filesystem::temp_directory_path() / "odsel_llm_transcript.jsonl";
  const auto config = fakes::test_config();
  auto scripted = std::make_shared<fakes::ScriptedTransport>();
  scripted->push_content("first");
  scripted->push_content("second");
  {
    LlmClient recorder(config, Transcript::record(path), scripted);
    CHECK(recorder.chat(kHello) == "first");
    CHECK(recorder.chat({{"user", "again"}}) == "second");
  }
  CHECK(scripted->paths[0] == "/chat/completions");
  CHECK(scripted->keys[0] == config.api_key);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find(config.api_key) == std::string::npos);
  const auto records = Transcript::parse_jsonl(text, path.string());
  REQUIRE(records.size() == 2);
  CHECK(records[0].hash == sha256_hex(records[0].request));

  LlmClient player(config, Transcript::replay(path), std::make_shared<fakes::ForbiddenTransport>());
  CHECK(player.chat({{"user", "again"}}) == "second");
  CHECK(player.chat(kHello) == "first");
  std::filesystem::remove(path);
}

TEST_CASE("non-retryable statuses fail at once and name the status") {
  auto config = fakes::test_config();
  auto scripted = std::make_shared<fakes::ScriptedTransport>();
  scripted->push(401, R"({"error":"bad key"})");
  LlmClient client(config, Transcript(), scripted);
  std::string message;
  CHECK(code_of([&] { client.chat(kHello); }, &message) == ErrorCode::kTransport);
  CHECK(message.find("401") != std::string::npos);
  CHECK(message.find(config.api_key) == std::string::npos);
  CHECK(scripted->calls() == 1);
}

TEST_CASE("rate limits, server errors and connection failures are retried") {
  auto config = fakes::test_config();
  config.max_retries = 2;
  auto scripted = std::make_shared<fakes::ScriptedTransport>();
  scripted->push(429, "");
  scripted->push(503, "");
  scripted->push_content("finally");
  LlmClient client(config, Transcript(), scripted);
  CHECK(client.chat(kHello) == "finally");
  CHECK(scripted->calls() == 3);

  auto dead = std::make_shared<fakes::ScriptedTransport>();
  LlmClient unreachable(config, Transcript(), dead);
  CHECK(code_of([&] { unreachable.chat(kHello); }) == ErrorCode::kTransport);
  CHECK(dead->calls() == 3);

  auto scripted2 = std::make_shared<fakes::ScriptedTransport>();
  scripted2->push(500, "");
  scripted2->push(500, "");
  scripted2->push(500, "");
  scripted2->push_content("too late");
  LlmClient exhausted(config, Transcript(), scripted2);
  CHECK(code_of([&] { exhausted.chat(kHello); }) == ErrorCode::kTransport);
  CHECK(scripted2->calls() == 3);
}

TEST_CASE("a body without a first choice is a parse error") {
  auto scripted = std::make_shared<fakes::ScriptedTransport>();
  scripted->push(200, R"({"choices":[]})");
  LlmClient client(fakes::test_config(), Transcript(), scripted);
  CHECK(code_of([&] { client.chat(kHello); }) == ErrorCode::kParse);
}

TEST_CASE("config validation") {
  auto config = fakes::test_config();
  config.timeout_seconds = 0.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = fakes::test_config();
  config.max_retries = -1;
  CHECK_THROWS_AS(LlmClient{config}, Error);
}

TEST_CASE("tag prompt is deterministic and lists the vocabulary verbatim") {
  const std::vector<std::string> vocab = {"sparse", "skewed", "near_gaussian"};
  const auto a = render_tag_prompt("n=10, d=2", std::nullopt, vocab);
  CHECK(a == render_tag_prompt("n=10, d=2", std::nullopt, vocab));
  REQUIRE(a.size() == 2);
  CHECK(a[0].role == "system");
  CHECK(a[0].content.find("sparse, skewed, near_gaussian") != std::string::npos);
  CHECK(a[1].content.find("n=10, d=2") != std::string::npos);
  CHECK(a[1].content.find("Notes") == std::string::npos);
  CHECK(render_tag_prompt("n=10, d=2", std::string(""), vocab) == a);
  const auto with_notes = render_tag_prompt("n=10, d=2", std::string("sensor drift"), vocab);
  CHECK(with_notes[1].content.find("sensor drift") != std::string::npos);

  const auto config = fakes::test_config();
  CHECK(sha256_hex(chat_request_body(config, a)) != sha256_hex(chat_request_body(config, with_notes)));
}

TEST_CASE("refine prompt orders candidates and restricts the answer") {
  const std::vector<RefineCandidate> cands = {{"lof", 0.5, {"local_anomalies"}, {}, ""},
                                              {"ae", 0.5, {"high_dimensional"}, {"small_sample"}, "recon"},
                                              {"knn", 1.0, {}, {}, ""}};
  const auto m = render_refine_prompt(cands, {"sparse"}, std::nullopt);
  CHECK(m[0].content.find("<one of: knn, ae, lof>") != std::string::npos);
  const auto& user = m[1].content;
  CHECK(user.find("- knn (S=1.0000)") < user.find("- ae (S=0.5000)"));
  CHECK(user.find("- ae (S=0.5000)") < user.find("- lof (S=0.5000)"));
  CHECK(user.find("weaknesses: small_sample; recon") != std::string::npos);
  CHECK(user.find("Notes") == std::string::npos);
  CHECK(refine_correction({"ae", "knn"}).content.find("ae, knn") != std::string::npos);
}

TEST_CASE("json replies are found inside fences and prose") {
  CHECK(parse_json_reply(R"({"tags": ["sparse"]})", ReplyShape::kTags)["tags"][0] == "sparse");
  CHECK(parse_json_reply("```json\n{\"tags\": []}\n```", ReplyShape::kTags)["tags"].empty());
  CHECK(parse_json_reply(R"(Sure! {"model": "ae", "reason": "a {brace} inside"} hope it helps)",
                         ReplyShape::kModelChoice)["reason"] == "a {brace} inside");
  CHECK(parse_json_reply(R"({broken} then {"tags": ["skewed"]})", ReplyShape::kTags)["tags"][0] == "skewed");
  std::string message;
  CHECK(code_of([&] { parse_json_reply("no json here", ReplyShape::kTags); }, &message) == ErrorCode::kParse);
  CHECK(code_of([&] { parse_json_reply(R"({"tags": "sparse"})", ReplyShape::kTags); }) == ErrorCode::kParse);
  CHECK(code_of([&] { parse_json_reply(R"({"model": 3, "reason": ""})", ReplyShape::kModelChoice); }) ==
        ErrorCode::kParse);
}

TEST_CASE("transcript jsonl rejects malformed lines") {
  CHECK(code_of([] { Transcript::parse_jsonl("{\"hash\": 1}\n", "t"); }) == ErrorCode::kParse);
  CHECK(code_of([] { Transcript::parse_jsonl("not json\n", "t"); }) == ErrorCode::kParse);
  CHECK(Transcript::parse_jsonl("\n", "t").empty());
  CHECK(code_of([] { Transcript::replay(std::filesystem::path("/nonexistent/odsel.jsonl")); }) == ErrorCode::kIo);
}
