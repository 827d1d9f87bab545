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

// Chat-completions client with strict-JSON prompting and record/replay.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odsel/core.h"

namespace odsel {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using Messages = std::vector<ChatMessage>;

inline constexpr const char* kApiKeyEnv = "OD_LLM_API_KEY";
inline constexpr const char* kEndpointEnv = "OD_LLM_ENDPOINT";
inline constexpr const char* kModelEnv = "OD_LLM_MODEL";

struct LlmConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string api_key;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  double temperature = 0.0;
  // Retry k (0-based) sleeps backoff_base_seconds * 2^k.
  double backoff_base_seconds = 1.0;

  // Defaults overridden by OD_LLM_API_KEY, OD_LLM_ENDPOINT and OD_LLM_MODEL.
  static LlmConfig from_env();
  // Throws kInvalidArgument unless timeout > 0, retries >= 0, backoff >= 0.
  void validate() const;
};

struct HttpReply {
  int status = 0;
  std::string body;
};

// One POST. Throws kTransport when no HTTP response was obtained.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpReply post(const std::string& endpoint, const std::string& path, const std::string& body,
                         const std::string& api_key, double timeout_seconds) = 0;
};

class HttpTransport final : public ChatTransport {
 public:
  HttpReply post(const std::string& endpoint, const std::string& path, const std::string& body,
                 const std::string& api_key, double timeout_seconds) override;
};

enum class TranscriptMode { kLive, kRecord, kReplay };

std::string_view to_string(TranscriptMode mode);

struct TranscriptRecord {
  std::string hash;      // hex SHA-256 of `request`
  std::string request;   // serialized request body
  std::string response;  // raw HTTP response body

  friend bool operator==(const TranscriptRecord&, const TranscriptRecord&) = default;
};

// Ordered request/response log. In record mode each new record is appended
// to `path` as one JSON line; in replay mode every request must be present.
class Transcript {
 public:
  Transcript() = default;  // live, no file
  Transcript(TranscriptMode mode, std::optional<std::filesystem::path> path);

  // Replay from `path`; throws kIo or kParse.
  static Transcript replay(const std::filesystem::path& path);
  static Transcript replay(std::vector<TranscriptRecord> records);
  // Record to `path`, truncating it.
  static Transcript record(const std::filesystem::path& path);
  // Record in memory only.
  static Transcript record();

  TranscriptMode mode() const { return mode_; }
  const std::vector<TranscriptRecord>& records() const { return records_; }
  // First record with `hash`, or nullptr.
  const TranscriptRecord* find(const std::string& hash) const;
  void append(TranscriptRecord record);

  std::string to_jsonl() const;
  static std::vector<TranscriptRecord> parse_jsonl(std::string_view text, const std::string& source);

 private:
  TranscriptMode mode_ = TranscriptMode::kLive;
  std::optional<std::filesystem::path> path_;
  std::vector<TranscriptRecord> records_;
};

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// Serialized {model, messages, temperature}; the transcript hash covers it.
std::string chat_request_body(const LlmConfig& config, const Messages& messages);

// content of choices[0].message in a chat-completions body; throws kParse.
std::string extract_chat_content(const std::string& response_body);

// One client, one request in flight.
class LlmClient {
 public:
  LlmClient(LlmConfig config, Transcript transcript = Transcript(),
            std::shared_ptr<ChatTransport> transport = std::make_shared<HttpTransport>());

  // Returns the first choice's content. Throws kTransport after exhausting
  // retries (connection errors, 429 and 5xx are retried; other statuses
  // fail at once with the status), kReplayMiss naming the hash, kParse on
  // a body without a first choice.
  std::string chat(const Messages& messages);

  const LlmConfig& config() const { return config_; }
  const Transcript& transcript() const { return transcript_; }

 private:
  std::string post_with_retries(const std::string& body);

  LlmConfig config_;
  Transcript transcript_;
  std::shared_ptr<ChatTransport> transport_;
};

Messages render_tag_prompt(const std::string& profile_text, const std::optional<std::string>& notes,
                           const std::vector<std::string>& vocabulary);

struct RefineCandidate {
  std::string id;
  double score = 0.0;
  std::vector<std::string> strengths;
  std::vector<std::string> weaknesses;
  std::string notes;
};

// Candidates are listed by descending score, then ascending id, whatever
// order they arrive in.
Messages render_refine_prompt(std::vector<RefineCandidate> candidates, const std::vector<std::string>& tags,
                              const std::optional<std::string>& notes);

// Follow-up after a reply that did not name an allowed model.
ChatMessage refine_correction(const std::vector<std::string>& allowed);

enum class ReplyShape {
  kTags,         // {"tags": [string...]}
  kModelChoice,  // {"model": string, "reason": string}
};

// First parseable JSON object in `text`, validated against `shape`.
// Throws kParse when none is found or the shape is wrong.
json parse_json_reply(std::string_view text, ReplyShape shape);

}  // namespace odsel
