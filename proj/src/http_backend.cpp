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

#include <httplib.h>

#include <cstdlib>

#include "emfact/backends.hpp"

namespace emfact {

using nlohmann::json;

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig c;
  if (const char* base = std::getenv("LLM_API_BASE")) c.base_url = base;
  if (const char* key = std::getenv("LLM_API_KEY")) c.api_key = key;
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty())
    throw GatewayError(GatewayError::Kind::config, "http backend needs a base URL (LLM_API_BASE)");
  auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos)
    throw GatewayError(GatewayError::Kind::config, "base URL must include a scheme: " + config_.base_url);
  auto path_start = config_.base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = config_.base_url;
  } else {
    scheme_host_port_ = config_.base_url.substr(0, path_start);
    path_prefix_ = config_.base_url.substr(path_start);
  }
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  // Accept base URLs that already end in /v1.
  if (path_prefix_.size() >= 3 && path_prefix_.compare(path_prefix_.size() - 3, 3, "/v1") == 0)
    path_prefix_.resize(path_prefix_.size() - 3);
}

std::string HttpBackend::id() const { return "http:" + scheme_host_port_ + path_prefix_; }

bool HttpBackend::is_retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

ChatResult HttpBackend::parse_response(const std::string& body) {
  try {
    json j = json::parse(body);
    ChatResult r;
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty())
      throw GatewayError(GatewayError::Kind::permanent, "chat completion has no choices");
    const auto& content = choices[0].at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (j.contains("id") && j["id"].is_string()) r.raw_id = j["id"].get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      Usage u;
      u.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      u.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
      r.usage = u;
    }
    return r;
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::permanent, std::string("malformed chat completion: ") + e.what());
  }
}

ChatResult HttpBackend::send(const ChatRequest& req) {
  httplib::Client cli(scheme_host_port_);
  auto secs = static_cast<time_t>(config_.timeout_seconds);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);
  if (!config_.api_key.empty()) cli.set_bearer_token_auth(config_.api_key);

  auto res = cli.Post(path_prefix_ + "/v1/chat/completions", to_json(req).dump(), "application/json");
  if (!res) {
    // Connection failures and timeouts are transient.
    throw GatewayError(GatewayError::Kind::transient, "http request failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    auto kind = is_retryable_status(res->status) ? GatewayError::Kind::transient : GatewayError::Kind::permanent;
    throw GatewayError(kind, "http status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_response(res->body);
}

}  // namespace emfact
