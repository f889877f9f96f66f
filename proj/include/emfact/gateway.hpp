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

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emfact/error.hpp"

namespace emfact {

enum class Role { system, user };

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  // Pipeline stage ("edit", "rank", "entail", ...); used by the mock to route replies.
  std::string request_tag;
  // Parse-retry index. 0 for the first call; higher values get their own cache slot.
  int attempt = 0;

  void validate() const;
  // Concatenated content of all messages, in order.
  std::string joined_content() const;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResult {
  std::string text;
  std::optional<Usage> usage;
  bool cached = false;
  std::optional<double> latency_ms;
  std::optional<std::string> raw_id;
};

std::string to_string(Role role);
nlohmann::json to_json(const ChatRequest& req);

// A chat-completion provider. Implementations must be callable from several
// threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Stable identifier that participates in the cache key.
  virtual std::string id() const = 0;
  // Throws GatewayError; transient failures use Kind::transient.
  virtual ChatResult send(const ChatRequest& req) = 0;
};

// Wraps a callable; handy for tests and in-process judges.
class FunctionBackend final : public ChatBackend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  FunctionBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  ChatResult send(const ChatRequest& req) override {
    ChatResult r;
    r.text = fn_(req);
    return r;
  }

 private:
  std::string id_;
  Fn fn_;
};

// Content-addressed reply store: one JSON file per request key.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(const std::string& backend_id, const ChatRequest& req);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const ChatRequest& req, const std::string& backend_id,
           const ChatResult& result);
  std::filesystem::path path_for(const std::string& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  static constexpr std::size_t kStripes = 64;
  // Per-key write serialization; shared so the cache stays copyable.
  std::shared_ptr<std::array<std::mutex, kStripes>> locks_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(2000),
                                                 std::chrono::milliseconds(4000)};
  // Replaceable so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewaySettings {
  std::size_t parallelism = 1;
  double default_temperature = 0.0;
  // Per-tag overrides of default_temperature, keyed by request_tag.
  std::map<std::string, double> stage_temperature;
  int default_max_tokens = 1024;
  RetryPolicy retry;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, std::optional<ResponseCache> cache,
          GatewaySettings settings = {});

  ChatResult complete(const ChatRequest& req);

  // Results are positioned by request index, whatever the completion order.
  std::vector<ChatResult> complete_batch(std::span<const ChatRequest> reqs);

  // Runs fn(i) for i in [0, n) with at most `parallelism` concurrent calls.
  // The first exception by index is rethrown after all items finish.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const;

  // Convenience builder applying the default decoding settings.
  ChatRequest make_request(std::string model_id, std::string tag, std::string prompt) const;

  const GatewaySettings& settings() const { return settings_; }
  std::string backend_id() const { return backend_->id(); }
  std::size_t backend_calls() const { return backend_calls_.load(); }
  nlohmann::json describe() const;

 private:
  ChatResult send_with_retry(const ChatRequest& req);

  std::shared_ptr<ChatBackend> backend_;
  std::optional<ResponseCache> cache_;
  GatewaySettings settings_;
  std::atomic<std::size_t> backend_calls_{0};
};

}  // namespace emfact
