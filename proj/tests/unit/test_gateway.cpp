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

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "emfact/backends.hpp"
#include "emfact/gateway.hpp"
#include "helpers.hpp"

using namespace emfact;
using emfact::testing::fast_settings;
using emfact::testing::TempDir;
using nlohmann::json;

namespace {

ChatRequest req(const std::string& prompt, const std::string& tag = "t", int attempt = 0) {
  ChatRequest r;
  r.model_id = "m";
  r.messages.push_back({Role::user, prompt});
  r.request_tag = tag;
  r.attempt = attempt;
  return r;
}

// Fails with `kind` for the first `failures` calls, then echoes the prompt.
class FlakyBackend : public ChatBackend {
 public:
  FlakyBackend(int failures, GatewayError::Kind kind) : failures_(failures), kind_(kind) {}
  std::string id() const override { return "flaky"; }
  ChatResult send(const ChatRequest& r) override {
    if (calls++ < failures_) throw GatewayError(kind_, "boom");
    ChatResult out;
    out.text = r.joined_content();
    return out;
  }
  std::atomic<int> calls{0};

 private:
  int failures_;
  GatewayError::Kind kind_;
};

}  // namespace

TEST_CASE("request validation") {
  ChatRequest r;
  CHECK_THROWS_AS(r.validate(), GatewayError);
  r = req("x");
  r.temperature = -1;
  CHECK_THROWS_AS(r.validate(), GatewayError);
  CHECK_NOTHROW(req("x").validate());
}

TEST_CASE("cache: second identical request is served from disk") {
  TempDir dir;
  int calls = 0;
  auto backend = std::make_shared<FunctionBackend>("fn", [&](const ChatRequest& r) {
    ++calls;
    return "reply to " + r.joined_content();
  });
  Gateway gw(backend, ResponseCache(dir.path()), fast_settings(1));
  auto a = gw.complete(req("hello"));
  auto b = gw.complete(req("hello"));
  CHECK(calls == 1);
  CHECK_FALSE(a.cached);
  CHECK(b.cached);
  CHECK(a.text == b.text);

  // A new gateway over the same directory hits the same file.
  Gateway gw2(backend, ResponseCache(dir.path()), fast_settings(1));
  CHECK(gw2.complete(req("hello")).cached);
  CHECK(calls == 1);

  // Parse retries get their own slot.
  CHECK_FALSE(gw.complete(req("hello", "t", 1)).cached);
  CHECK(calls == 2);

  auto key = ResponseCache::key("fn", req("hello"));
  auto stored = json::parse(std::ifstream(ResponseCache(dir.path()).path_for(key)));
  CHECK(stored["reply"] == "reply to hello");
  CHECK(stored["request"]["model"] == "m");
}

TEST_CASE("cache key depends on every decoding field") {
  auto base = req("p");
  auto k = ResponseCache::key("b", base);
  auto t = base;
  t.temperature = 0.7;
  auto m = base;
  m.max_tokens = 10;
  auto mod = base;
  mod.model_id = "other";
  std::set<std::string> keys{k, ResponseCache::key("b", t), ResponseCache::key("b", m), ResponseCache::key("b", mod),
                             ResponseCache::key("other-backend", base)};
  CHECK(keys.size() == 5);
  // The tag routes mock replies only; it does not change the reply identity.
  CHECK(ResponseCache::key("b", req("p", "other")) == k);
}

TEST_CASE("batch results keep request order at parallelism 8") {
  auto backend = std::make_shared<FunctionBackend>("fn", [](const ChatRequest& r) {
    // Later requests finish first.
    auto n = std::stoi(r.joined_content());
    std::this_thread::sleep_for(std::chrono::microseconds((50 - n) * 100));
    return "r" + r.joined_content();
  });
  Gateway gw(backend, std::nullopt, fast_settings(8));
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 50; ++i) reqs.push_back(req(std::to_string(i)));
  auto out = gw.complete_batch(reqs);
  REQUIRE(out.size() == 50);
  for (int i = 0; i < 50; ++i) CHECK(out[i].text == "r" + std::to_string(i));
}

TEST_CASE("parallel_for rethrows the first failure by index after finishing") {
  Gateway gw(std::make_shared<FunctionBackend>("fn", [](const ChatRequest&) { return std::string("x"); }), std::nullopt,
             fast_settings(4));
  std::atomic<int> ran{0};
  try {
    gw.parallel_for(20, [&](std::size_t i) {
      ++ran;
      if (i == 7 || i == 3) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "fail 3");
  }
  CHECK(ran == 20);
}

TEST_CASE("transient failures are retried with backoff") {
  std::vector<std::chrono::milliseconds> slept;
  auto settings = fast_settings(1);
  settings.retry.sleep = [&](std::chrono::milliseconds d) { slept.push_back(d); };

  auto flaky = std::make_shared<FlakyBackend>(2, GatewayError::Kind::transient);
  Gateway gw(flaky, std::nullopt, settings);
  CHECK(gw.complete(req("ok")).text == "ok");
  CHECK(flaky->calls == 3);
  REQUIRE(slept.size() == 2);
  CHECK(slept[0] == std::chrono::milliseconds(1000));
  CHECK(slept[1] == std::chrono::milliseconds(2000));

  slept.clear();
  auto dead = std::make_shared<FlakyBackend>(100, GatewayError::Kind::transient);
  Gateway gw2(dead, std::nullopt, settings);
  try {
    gw2.complete(req("x"));
    FAIL("expected retries_exhausted");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayError::Kind::retries_exhausted);
  }
  CHECK(dead->calls == 4);
  CHECK(slept.size() == 3);

  auto permanent = std::make_shared<FlakyBackend>(1, GatewayError::Kind::permanent);
  Gateway gw3(permanent, std::nullopt, settings);
  CHECK_THROWS_AS(gw3.complete(req("x")), GatewayError);
  CHECK(permanent->calls == 1);
}

TEST_CASE("failed calls are not cached") {
  TempDir dir;
  auto flaky = std::make_shared<FlakyBackend>(1, GatewayError::Kind::permanent);
  Gateway gw(flaky, ResponseCache(dir.path()), fast_settings(1));
  CHECK_THROWS(gw.complete(req("x")));
  CHECK(gw.complete(req("x")).text == "x");
  CHECK(gw.complete(req("x")).cached);
  CHECK(flaky->calls == 2);
}

TEST_CASE("make_request applies stage temperatures") {
  auto settings = fast_settings(1);
  settings.default_temperature = 0.2;
  settings.stage_temperature["edit"] = 0.9;
  settings.default_max_tokens = 77;
  Gateway gw(std::make_shared<FunctionBackend>("fn", [](const ChatRequest&) { return std::string("x"); }), std::nullopt,
             settings);
  CHECK(gw.make_request("m", "edit", "p").temperature == 0.9);
  CHECK(gw.make_request("m", "rank", "p").temperature == 0.2);
  CHECK(gw.make_request("m", "rank", "p").max_tokens == 77);
  auto d = gw.describe();
  CHECK(d["backend"] == "fn");
  CHECK_FALSE(d.contains("parallelism"));
}

TEST_CASE("mock script rules") {
  auto mock = parse_mock_script(json::parse(R"({
    "rules": [
      {"tag": "edit", "contains": "PSA", "reply": "special", "times": 1},
      {"tag": "edit", "echo": {"after": "Physician's response: ", "before": "\n\nKey"}},
      {"tag": "extract", "echo": {"after": "Note: ", "last": true, "split_sentences": true}},
      {"tag": "rank", "attempt": 1, "reply": "Response 2"},
      {"tag": "rank", "reply": "unclear"},
      {"tag": "entail", "mode": "entail_contains"},
      {"tag": "judge", "mode": "judge_longer"}
    ]})"));
  CHECK(mock->send(req("Physician's response: PSA is fine.", "edit")).text == "special");
  CHECK(mock->send(req("Physician's response: PSA is fine.\n\nKey stuff", "edit")).text == "PSA is fine.");
  CHECK(mock->send(req("Note: example\nNote: A b. C d.", "extract")).text == "A b. // C d.");
  CHECK(mock->send(req("x", "rank")).text == "unclear");
  CHECK(mock->send(req("x", "rank", 1)).text == "Response 2");
  CHECK(mock->send(req("Premise: The dose is 5 mg daily.\nHypothesis: The dose is 5 mg\n\nHere is the JSON-formatted answer:",
                       "entail"))
            .text.find("1") != std::string::npos);
  CHECK(mock->send(req("Premise: The dose is 5 mg daily.\nHypothesis: Stop the drug\n\nHere is the JSON-formatted answer:",
                       "entail"))
            .text.find("0") != std::string::npos);
  CHECK(mock->send(req("Response 1: short\n\nResponse 2: much longer text\n\nWhich response is more empathetic?", "judge"))
            .text.rfind("Response 2", 0) == 0);
  try {
    mock->send(req("x", "nothing-matches"));
    FAIL("expected mock_unmatched");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayError::Kind::mock_unmatched);
  }
  CHECK_THROWS_AS(parse_mock_script(json::parse(R"({"rules":[{"tag":"x"}]})")), GatewayError);
}

TEST_CASE("http backend speaks the chat completions schema") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth, seen_model;
  server.Post("/api/v1/chat/completions", [&](const httplib::Request& r, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    seen_auth = r.get_header_value("Authorization");
    auto body = json::parse(r.body);
    seen_model = body["model"];
    json reply = {{"id", "cmpl-1"},
                  {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", "pong"}}}}}},
                  {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 1}}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/api/v1";
  cfg.api_key = "secret";
  auto backend = std::make_shared<HttpBackend>(cfg);
  Gateway gw(backend, std::nullopt, fast_settings(1));
  auto r = gw.complete(req("ping"));
  CHECK(r.text == "pong");
  CHECK(r.raw_id == "cmpl-1");
  REQUIRE(r.usage);
  CHECK(r.usage->prompt_tokens == 3);
  CHECK(hits == 2);
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_model == "m");

  server.stop();
  t.join();

  CHECK(HttpBackend::is_retryable_status(503));
  CHECK_FALSE(HttpBackend::is_retryable_status(400));
  CHECK_THROWS_AS(HttpBackend::parse_response("{}"), GatewayError);
}
