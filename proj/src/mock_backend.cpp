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

#include <fstream>

#include "emfact/backends.hpp"
#include "emfact/text.hpp"

namespace emfact {

using nlohmann::json;

namespace {

std::optional<std::string> between(const std::string& s, std::string_view start, std::string_view end,
                                   bool last_start, bool last_end) {
  auto b = last_start ? s.rfind(start) : s.find(start);
  if (b == std::string::npos) return std::nullopt;
  b += start.size();
  auto e = last_end ? s.rfind(end) : s.find(end, b);
  if (e == std::string::npos || e < b) return std::nullopt;
  return s.substr(b, e - b);
}

std::string entail_contains_reply(const std::string& prompt) {
  auto premise = between(prompt, "Premise: ", "\nHypothesis: ", false, true);
  auto hypothesis = between(prompt, "\nHypothesis: ", "\n\nHere is the JSON-formatted answer:", true, true);
  if (!premise || !hypothesis)
    throw GatewayError(GatewayError::Kind::mock_unmatched, "entail_contains: prompt has no premise/hypothesis");
  bool entailed = premise->find(text::trimmed(*hypothesis)) != std::string::npos;
  return std::string("{\"entailment_prediction\": ") + (entailed ? "1" : "0") + "}";
}

std::string judge_longer_reply(const std::string& prompt) {
  auto r1 = between(prompt, "Response 1: ", "\n\nResponse 2:", false, false);
  auto r2 = between(prompt, "\n\nResponse 2:", "\n\nWhich response is more empathetic?", false, false);
  if (!r1 || !r2)
    throw GatewayError(GatewayError::Kind::mock_unmatched, "judge_longer: prompt has no response slots");
  auto l1 = text::trim(*r1).size();
  auto l2 = text::trim(*r2).size();
  if (l1 > l2) return "Response 1: More empathetic";
  if (l2 > l1) return "Response 2: More empathetic";
  return "Both responses are equally empathetic";
}

MockReplyMode parse_mode(const std::string& s) {
  if (s == "literal") return MockReplyMode::literal;
  if (s == "echo") return MockReplyMode::echo;
  if (s == "entail_contains") return MockReplyMode::entail_contains;
  if (s == "judge_longer") return MockReplyMode::judge_longer;
  throw GatewayError(GatewayError::Kind::config, "unknown mock rule mode '" + s + "'");
}

}  // namespace

std::optional<std::string> echo_extract(const std::string& prompt, const EchoSpec& spec) {
  auto b = spec.last ? prompt.rfind(spec.after) : prompt.find(spec.after);
  if (b == std::string::npos) return std::nullopt;
  b += spec.after.size();
  auto e = std::string::npos;
  if (spec.before) e = prompt.find(*spec.before, b);
  std::string out = e == std::string::npos ? prompt.substr(b) : prompt.substr(b, e - b);
  if (spec.split_sentences) return text::join(text::split_sentences(out), " // ");
  return out;
}

MockBackend::MockBackend(std::vector<MockRule> rules, std::string id)
    : id_(std::move(id)), rules_(std::move(rules)), used_(rules_.size(), 0) {}

ChatResult MockBackend::send(const ChatRequest& req) {
  const std::string prompt = req.joined_content();
  std::size_t chosen = rules_.size();
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const auto& r = rules_[i];
      if (r.tag && *r.tag != req.request_tag) continue;
      if (r.contains && prompt.find(*r.contains) == std::string::npos) continue;
      if (r.attempt && *r.attempt != req.attempt) continue;
      if (r.times && used_[i] >= *r.times) continue;
      ++used_[i];
      chosen = i;
      break;
    }
  }
  if (chosen == rules_.size())
    throw GatewayError(GatewayError::Kind::mock_unmatched,
                       "mock script has no rule for request tag '" + req.request_tag + "'");
  const auto& rule = rules_[chosen];
  ChatResult out;
  switch (rule.mode) {
    case MockReplyMode::literal:
      out.text = rule.reply;
      break;
    case MockReplyMode::echo: {
      auto extracted = echo_extract(prompt, rule.echo);
      if (!extracted)
        throw GatewayError(GatewayError::Kind::mock_unmatched,
                           "echo marker '" + rule.echo.after + "' not found in prompt");
      out.text = std::move(*extracted);
      break;
    }
    case MockReplyMode::entail_contains:
      out.text = entail_contains_reply(prompt);
      break;
    case MockReplyMode::judge_longer:
      out.text = judge_longer_reply(prompt);
      break;
  }
  return out;
}

std::shared_ptr<MockBackend> parse_mock_script(const json& script) {
  try {
    if (!script.is_object() || !script.contains("rules") || !script["rules"].is_array())
      throw GatewayError(GatewayError::Kind::config, "mock script must be an object with a 'rules' array");
    std::vector<MockRule> rules;
    for (const auto& jr : script["rules"]) {
      if (!jr.is_object()) throw GatewayError(GatewayError::Kind::config, "mock rule must be an object");
      MockRule r;
      if (jr.contains("tag")) r.tag = jr["tag"].get<std::string>();
      if (jr.contains("contains")) r.contains = jr["contains"].get<std::string>();
      if (jr.contains("attempt")) r.attempt = jr["attempt"].get<int>();
      if (jr.contains("times")) {
        r.times = jr["times"].get<int>();
        if (*r.times <= 0) throw GatewayError(GatewayError::Kind::config, "mock rule 'times' must be positive");
      }
      if (jr.contains("mode")) r.mode = parse_mode(jr["mode"].get<std::string>());
      else if (jr.contains("echo")) r.mode = MockReplyMode::echo;
      if (jr.contains("echo")) {
        const auto& e = jr["echo"];
        r.echo.after = e.at("after").get<std::string>();
        if (e.contains("before")) r.echo.before = e["before"].get<std::string>();
        r.echo.last = e.value("last", false);
        r.echo.split_sentences = e.value("split_sentences", false);
      }
      if (r.mode == MockReplyMode::literal) {
        if (!jr.contains("reply")) throw GatewayError(GatewayError::Kind::config, "literal mock rule needs 'reply'");
        r.reply = jr["reply"].get<std::string>();
      }
      if (r.mode == MockReplyMode::echo && r.echo.after.empty())
        throw GatewayError(GatewayError::Kind::config, "echo rule needs a nonempty 'after' marker");
      rules.push_back(std::move(r));
    }
    return std::make_shared<MockBackend>(std::move(rules), script.value("id", std::string("mock")));
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::config, std::string("malformed mock script: ") + e.what());
  }
}

std::shared_ptr<MockBackend> load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GatewayError(GatewayError::Kind::config, "cannot open mock script " + path.string());
  json script;
  try {
    script = json::parse(in);
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::config, "malformed mock script " + path.string() + ": " + e.what());
  }
  return parse_mock_script(script);
}

}  // namespace emfact
