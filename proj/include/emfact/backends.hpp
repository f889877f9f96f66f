/*
 * Copyright 2026 The emfact Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emfact/gateway.hpp"

namespace emfact {

// How a mock rule produces its reply.
enum class MockReplyMode {
  literal,          // fixed text
  echo,             // substring of the prompt between two markers
  entail_contains,  // {"entailment_prediction": 1} iff the hypothesis occurs verbatim in the premise
  judge_longer,     // "Response 1"/"Response 2" for the longer response, equal on a tie
};

struct EchoSpec {
  std::string after;                  // start marker (required)
  std::optional<std::string> before;  // end marker, searched after the start; end of text if absent/missing
  bool last = false;                  // use the last occurrence of `after`
  bool split_sentences = false;       // reply = sentences of the extract joined by " // "
};

struct MockRule {
  std::optional<std::string> tag;       // matches ChatRequest::request_tag
  std::optional<std::string> contains;  // substring of the joined prompt
  std::optional<int> attempt;           // matches ChatRequest::attempt
  std::optional<int> times;             // consumption budget; unlimited when absent
  MockReplyMode mode = MockReplyMode::literal;
  std::string reply;
  EchoSpec echo;
};

// Deterministic scripted backend. Rules are tried in file order; the first
// rule whose matchers all hold and whose budget is not spent answers.
//
// Script format (JSON):
//   {"id": "optional-backend-id",
//    "rules": [{"tag": "edit", "contains": "PSA", "reply": "X", "times": 2},
//              {"tag": "edit", "echo": {"after": "Physician's response: "}},
//              {"tag": "entail", "mode": "entail_contains"}]}
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(std::vector<MockRule> rules, std::string id = "mock");

  std::string id() const override { return id_; }
  ChatResult send(const ChatRequest& req) override;

  const std::vector<MockRule>& rules() const { return rules_; }

 private:
  std::string id_;
  std::vector<MockRule> rules_;
  std::vector<int> used_;
  std::mutex mu_;
};

std::shared_ptr<MockBackend> load_mock_script(const std::filesystem::path& path);
std::shared_ptr<MockBackend> parse_mock_script(const nlohmann::json& script);

// Extracts the text between the markers described by `spec`; nullopt if the start marker is absent.
std::optional<std::string> echo_extract(const std::string& prompt, const EchoSpec& spec);

struct HttpBackendConfig {
  std::string base_url;  // e.g. https://host:8443/api ; "/v1/chat/completions" is appended
  std::string api_key;
  double timeout_seconds = 120.0;

  // Reads LLM_API_BASE and LLM_API_KEY.
  static HttpBackendConfig from_env();
};

// OpenAI-compatible chat completions over HTTP(S).
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string id() const override;
  ChatResult send(const ChatRequest& req) override;

  // Parses a chat.completions response body; throws GatewayError(permanent) on schema errors.
  static ChatResult parse_response(const std::string& body);
  // Whether an HTTP status warrants a retry (429 and 5xx).
  static bool is_retryable_status(int status);

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace emfact
