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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "odsel/llm.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace odsel {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return (value != nullptr && *value != '\0') ? std::string(value) : fallback;
}

bool has_text(const std::optional<std::string>& notes) { return notes.has_value() && !notes->empty(); }

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

// Splits "https://host:port/base" into ("https://host:port", "/base").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = endpoint.find('/', host_start);
  if (slash == std::string::npos) return {endpoint, ""};
  std::string path = endpoint.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {endpoint.substr(0, slash), path};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

LlmConfig LlmConfig::from_env() {
  LlmConfig config;
  config.api_key = env_or(kApiKeyEnv, config.api_key);
  config.endpoint = env_or(kEndpointEnv, config.endpoint);
  config.model = env_or(kModelEnv, config.model);
  return config;
}

void LlmConfig::validate() const {
  if (!(timeout_seconds > 0.0)) fail(ErrorCode::kInvalidArgument, "llm timeout must be positive");
  if (max_retries < 0) fail(ErrorCode::kInvalidArgument, "llm max retries must be >= 0");
  if (!(backoff_base_seconds >= 0.0)) fail(ErrorCode::kInvalidArgument, "llm backoff must be >= 0");
  if (endpoint.empty()) fail(ErrorCode::kInvalidArgument, "llm endpoint is empty");
}

HttpReply HttpTransport::post(const std::string& endpoint, const std::string& path, const std::string& body,
                              const std::string& api_key, double timeout_seconds) {
  const auto [base, prefix] = split_endpoint(endpoint);
  httplib::Client client(base);
  const auto timeout = std::chrono::duration<double>(timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto result = client.Post(prefix + path, headers, body, "application/json");
  if (!result) {
    fail(ErrorCode::kTransport, "request to " + endpoint + " failed: " + httplib::to_string(result.error()));
  }
  return HttpReply{result->status, result->body};
}

std::string_view to_string(TranscriptMode mode) {
  switch (mode) {
    case TranscriptMode::kLive: return "live";
    case TranscriptMode::kRecord: return "record";
    case TranscriptMode::kReplay: return "replay";
  }
  return "live";
}

Transcript::Transcript(TranscriptMode mode, std::optional<std::filesystem::path> path)
    : mode_(mode), path_(std::move(path)) {}

Transcript Transcript::replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open transcript " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return replay(parse_jsonl(ss.str(), path.string()));
}

Transcript Transcript::replay(std::vector<TranscriptRecord> records) {
  Transcript t(TranscriptMode::kReplay, std::nullopt);
  t.records_ = std::move(records);
  return t;
}

Transcript Transcript::record(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write transcript " + path.string());
  return Transcript(TranscriptMode::kRecord, path);
}

Transcript Transcript::record() { return Transcript(TranscriptMode::kRecord, std::nullopt); }

const TranscriptRecord* Transcript::find(const std::string& hash) const {
  for (const auto& r : records_) {
    if (r.hash == hash) return &r;
  }
  return nullptr;
}

namespace {

json record_to_json(const TranscriptRecord& r) {
  json j = json::object();
  j["hash"] = r.hash;
  j["request"] = json::parse(r.request);
  j["response"] = r.response;
  return j;
}

}  // namespace

void Transcript::append(TranscriptRecord record) {
  if (path_) {
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) fail(ErrorCode::kIo, "cannot append to transcript " + path_->string());
    out << record_to_json(record).dump() << '\n';
  }
  records_.push_back(std::move(record));
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) out += record_to_json(r).dump() + "\n";
  return out;
}

std::vector<TranscriptRecord> Transcript::parse_jsonl(std::string_view text, const std::string& source) {
  std::vector<TranscriptRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      const auto& request = j.at("request");
      TranscriptRecord r{j.at("hash").get<std::string>(),
                         request.is_string() ? request.get<std::string>() : request.dump(),
                         j.at("response").get<std::string>()};
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, where + ": bad transcript record: " + e.what());
    }
  }
  return records;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kTransport, "sha256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string chat_request_body(const LlmConfig& config, const Messages& messages) {
  json j = json::object();
  j["model"] = config.model;
  json list = json::array();
  for (const auto& m : messages) list.push_back(json{{"role", m.role}, {"content", m.content}});
  j["messages"] = std::move(list);
  j["temperature"] = config.temperature;
  return j.dump();
}

std::string extract_chat_content(const std::string& response_body) {
  try {
    const json j = json::parse(response_body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("chat response has no first choice: ") + e.what());
  }
}

LlmClient::LlmClient(LlmConfig config, Transcript transcript, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)), transcript_(std::move(transcript)), transport_(std::move(transport)) {
  config_.validate();
  if (!transport_) fail(ErrorCode::kInvalidArgument, "llm client needs a transport");
}

std::string LlmClient::post_with_retries(const std::string& body) {
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = config_.backoff_base_seconds * std::ldexp(1.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    try {
      HttpReply reply = transport_->post(config_.endpoint, "/chat/completions", body, config_.api_key,
                                         config_.timeout_seconds);
      if (reply.status >= 200 && reply.status < 300) return std::move(reply.body);
      last_error = "HTTP status " + std::to_string(reply.status);
      if (!retryable(reply.status)) break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport) throw;
      last_error = e.what();
    }
  }
  fail(ErrorCode::kTransport, "llm request to " + config_.endpoint + " failed: " + last_error);
}

std::string LlmClient::chat(const Messages& messages) {
  const std::string body = chat_request_body(config_, messages);
  const std::string hash = sha256_hex(body);
  if (transcript_.mode() == TranscriptMode::kReplay) {
    const TranscriptRecord* record = transcript_.find(hash);
    if (record == nullptr) fail(ErrorCode::kReplayMiss, "no transcript record for request " + hash);
    return extract_chat_content(record->response);
  }
  std::string response = post_with_retries(body);
  if (transcript_.mode() == TranscriptMode::kRecord) {
    transcript_.append(TranscriptRecord{hash, body, response});
  }
  return extract_chat_content(response);
}

Messages render_tag_prompt(const std::string& profile_text, const std::optional<std::string>& notes,
                           const std::vector<std::string>& vocabulary) {
  std::string system =
      "You convert dataset statistics into symbolic tags for outlier detection model selection.\n"
      "Allowed tags: " + join(vocabulary, ", ") + "\n"
      "Reply with a single JSON object of the form {\"tags\": [\"<tag>\", ...]} "
      "using only allowed tags and no other text.";
  std::string user = "Dataset profile: " + profile_text + "\n";
  if (has_text(notes)) user += "Notes from the user: " + *notes + "\n";
  user += "Which tags describe this dataset?";
  return {{"system", std::move(system)}, {"user", std::move(user)}};
}

Messages render_refine_prompt(std::vector<RefineCandidate> candidates, const std::vector<std::string>& tags,
                              const std::optional<std::string>& notes) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const RefineCandidate& a, const RefineCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<std::string> ids;
  for (const auto& c : candidates) ids.push_back(c.id);
  std::string system =
      "You choose one outlier detection model for a dataset from a fixed candidate list.\n"
      "Reply with a single JSON object of the form {\"model\": \"<one of: " + join(ids, ", ") +
      ">\", \"reason\": \"<short explanation>\"} and no other text.";
  std::string user = "Dataset tags: " + (tags.empty() ? std::string("(none)") : join(tags, ", ")) + "\n";
  user += "Candidates, best alignment score first:\n";
  char score[32];
  for (const auto& c : candidates) {
    std::snprintf(score, sizeof score, "%.4f", c.score);
    user += "- " + c.id + " (S=" + score + "); strengths: " + join(c.strengths, ", ") +
            "; weaknesses: " + join(c.weaknesses, ", ");
    if (!c.notes.empty()) user += "; " + c.notes;
    user += "\n";
  }
  if (has_text(notes)) user += "Notes from the user: " + *notes + "\n";
  user += "Which candidate fits best?";
  return {{"system", std::move(system)}, {"user", std::move(user)}};
}

ChatMessage refine_correction(const std::vector<std::string>& allowed) {
  return {"user", "That reply was not valid. Answer again with only {\"model\": \"<one of: " + join(allowed, ", ") +
                      ">\", \"reason\": \"...\"}, naming exactly one of the listed candidates."};
}

namespace {

// End of the balanced object starting at text[start] == '{', or npos.
std::size_t object_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

void check_shape(const json& j, ReplyShape shape) {
  switch (shape) {
    case ReplyShape::kTags: {
      if (!j.contains("tags") || !j["tags"].is_array()) {
        fail(ErrorCode::kParse, "reply lacks a \"tags\" array");
      }
      for (const auto& t : j["tags"]) {
        if (!t.is_string()) fail(ErrorCode::kParse, "reply \"tags\" must hold strings");
      }
      return;
    }
    case ReplyShape::kModelChoice:
      if (!j.contains("model") || !j["model"].is_string()) {
        fail(ErrorCode::kParse, "reply lacks a string \"model\"");
      }
      if (!j.contains("reason") || !j["reason"].is_string()) {
        fail(ErrorCode::kParse, "reply lacks a string \"reason\"");
      }
      return;
  }
}

}  // namespace

json parse_json_reply(std::string_view text, ReplyShape shape) {
  for (auto start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    const auto end = object_end(text, start);
    if (end == std::string_view::npos) continue;
    json j = json::parse(text.substr(start, end - start + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    check_shape(j, shape);
    return j;
  }
  fail(ErrorCode::kParse, "no JSON object found in reply");
}

}  // namespace odsel
