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

#include "emfact/gateway.hpp"

#include <omp.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Role role) { return role == Role::system ? "system" : "user"; }

void ChatRequest::validate() const {
  if (model_id.empty()) throw GatewayError(GatewayError::Kind::config, "chat request has no model id");
  if (messages.empty()) throw GatewayError(GatewayError::Kind::config, "chat request has no messages");
  for (const auto& m : messages)
    if (m.content.empty())
      throw GatewayError(GatewayError::Kind::config, "chat request has an empty message");
  if (temperature < 0.0) throw GatewayError(GatewayError::Kind::config, "negative temperature");
  if (max_tokens <= 0) throw GatewayError(GatewayError::Kind::config, "max_tokens must be positive");
}

std::string ChatRequest::joined_content() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out.push_back('\n');
    out += messages[i].content;
  }
  return out;
}

json to_json(const ChatRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"model", req.model_id},
          {"messages", std::move(msgs)},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(fs::path dir)
    : dir_(std::move(dir)), locks_(std::make_shared<std::array<std::mutex, kStripes>>()) {
  fs::create_directories(dir_);
}

std::string ResponseCache::key(const std::string& backend_id, const ChatRequest& req) {
  json k = to_json(req);
  k["backend"] = backend_id;
  if (req.attempt > 0) k["attempt"] = req.attempt;
  return text::sha256_hex(k.dump());
}

fs::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  auto p = path_for(key);
  std::lock_guard lock((*locks_)[std::hash<std::string>{}(key) % kStripes]);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    json rec = json::parse(in);
    return rec.at("reply").get<std::string>();
  } catch (const json::exception&) {
    // Corrupt entry: treat as a miss, it will be overwritten.
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const ChatRequest& req, const std::string& backend_id,
                        const ChatResult& result) {
  json rec = {{"key", key}, {"backend", backend_id}, {"request", to_json(req)},
              {"request_tag", req.request_tag}, {"attempt", req.attempt}, {"reply", result.text}};
  if (result.raw_id) rec["raw_id"] = *result.raw_id;
  if (result.usage)
    rec["usage"] = {{"prompt_tokens", result.usage->prompt_tokens},
                    {"completion_tokens", result.usage->completion_tokens}};
  auto p = path_for(key);
  std::lock_guard lock((*locks_)[std::hash<std::string>{}(key) % kStripes]);
  fs::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << rec.dump(2) << '\n';
    if (!out) throw Error("cannot write cache entry " + tmp.string());
  }
  fs::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, std::optional<ResponseCache> cache,
                 GatewaySettings settings)
    : backend_(std::move(backend)), cache_(std::move(cache)), settings_(std::move(settings)) {
  if (!backend_) throw GatewayError(GatewayError::Kind::config, "gateway needs a backend");
  if (settings_.parallelism == 0) settings_.parallelism = 1;
  if (!settings_.retry.sleep)
    settings_.retry.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatRequest Gateway::make_request(std::string model_id, std::string tag, std::string prompt) const {
  ChatRequest req;
  req.model_id = std::move(model_id);
  req.messages.push_back({Role::user, std::move(prompt)});
  auto it = settings_.stage_temperature.find(tag);
  req.temperature = it != settings_.stage_temperature.end() ? it->second : settings_.default_temperature;
  req.max_tokens = settings_.default_max_tokens;
  req.request_tag = std::move(tag);
  return req;
}

ChatResult Gateway::send_with_retry(const ChatRequest& req) {
  const auto& policy = settings_.retry;
  for (int attempt = 0;; ++attempt) {
    try {
      ++backend_calls_;
      auto started = std::chrono::steady_clock::now();
      ChatResult r = backend_->send(req);
      if (!r.latency_ms)
        r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      return r;
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayError::Kind::transient) throw;
      if (attempt >= policy.max_retries)
        throw GatewayError(GatewayError::Kind::retries_exhausted,
                           "retries exhausted after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt), policy.backoff.size() - 1);
      if (!policy.backoff.empty()) policy.sleep(policy.backoff[idx]);
    }
  }
}

ChatResult Gateway::complete(const ChatRequest& req) {
  req.validate();
  std::string key;
  if (cache_) {
    key = ResponseCache::key(backend_->id(), req);
    if (auto hit = cache_->get(key)) {
      ChatResult r;
      r.text = std::move(*hit);
      r.cached = true;
      return r;
    }
  }
  ChatResult r = send_with_retry(req);
  if (cache_) cache_->put(key, req, backend_->id(), r);
  return r;
}

void Gateway::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
  const int threads = static_cast<int>(std::max<std::size_t>(1, settings_.parallelism));
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<ChatResult> Gateway::complete_batch(std::span<const ChatRequest> reqs) {
  std::vector<ChatResult> out(reqs.size());
  parallel_for(reqs.size(), [&](std::size_t i) { out[i] = complete(reqs[i]); });
  return out;
}

json Gateway::describe() const {
  json temps = json::object();
  for (const auto& [tag, t] : settings_.stage_temperature) temps[tag] = t;
  return {{"backend", backend_->id()},
          {"temperature", settings_.default_temperature},
          {"stage_temperature", temps},
          {"max_tokens", settings_.default_max_tokens},
          {"max_retries", settings_.retry.max_retries}};
}

}  // namespace emfact
