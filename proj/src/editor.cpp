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

#include "emfact/editor.hpp"

#include <fstream>
#include <sstream>

#include "emfact/error.hpp"
#include "emfact/gateway.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

EditMode parse_edit_mode(const std::string& s) {
  if (s == "simple") return EditMode::simple;
  if (s == "refined") return EditMode::refined;
  throw ConfigError("unknown edit mode '" + s + "' (expected simple or refined)");
}

std::string to_string(EditMode m) { return m == EditMode::simple ? "simple" : "refined"; }

Provenance Provenance::for_edit(EditMode mode, EmpathyLevel level) {
  if (level == EmpathyLevel::standard)
    return {mode == EditMode::simple ? ProvenanceKind::edited_simple : ProvenanceKind::edited_refined,
            EmpathyLevel::standard};
  if (mode == EditMode::refined)
    throw ConfigError("empathy levels other than standard apply to the simple edit prompt only");
  return {ProvenanceKind::edited_level, level};
}

std::string Provenance::str() const {
  switch (kind) {
    case ProvenanceKind::physician: return "physician";
    case ProvenanceKind::direct_ai: return "direct_ai";
    case ProvenanceKind::edited_simple: return "edited_simple";
    case ProvenanceKind::edited_refined: return "edited_refined";
    case ProvenanceKind::edited_level: return "edited_level_" + to_string(level);
  }
  return "physician";
}

Provenance Provenance::parse(const std::string& s) {
  if (s == "physician") return {ProvenanceKind::physician, EmpathyLevel::standard};
  if (s == "direct_ai") return {ProvenanceKind::direct_ai, EmpathyLevel::standard};
  if (s == "edited_simple") return {ProvenanceKind::edited_simple, EmpathyLevel::standard};
  if (s == "edited_refined") return {ProvenanceKind::edited_refined, EmpathyLevel::standard};
  const std::string prefix = "edited_level_";
  if (s.rfind(prefix, 0) == 0) {
    auto level = parse_empathy_level(s.substr(prefix.size()));
    // edited_level_standard is the same variant as edited_simple.
    if (level == EmpathyLevel::standard) return {ProvenanceKind::edited_simple, EmpathyLevel::standard};
    return {ProvenanceKind::edited_level, level};
  }
  throw ConfigError("unknown provenance '" + s + "'");
}

std::optional<TemplateName> Provenance::template_name() const {
  switch (kind) {
    case ProvenanceKind::physician: return std::nullopt;
    case ProvenanceKind::direct_ai: return TemplateName::direct_generate;
    case ProvenanceKind::edited_simple:
    case ProvenanceKind::edited_level: return TemplateName::simple_edit;
    case ProvenanceKind::edited_refined: return TemplateName::refined_edit;
  }
  return std::nullopt;
}

VariantSpec VariantSpec::parse(const std::string& s) {
  auto colon = s.find(':');
  VariantSpec spec;
  spec.provenance = Provenance::parse(s.substr(0, colon));
  if (colon != std::string::npos) spec.model_id = s.substr(colon + 1);
  if (spec.model_id.empty()) {
    if (spec.provenance.kind != ProvenanceKind::physician)
      throw ConfigError("variant '" + s + "' needs a model id (<provenance>:<model>)");
    spec.model_id = kHumanModel;
  }
  return spec;
}

std::string VariantSpec::str() const { return provenance.str() + ":" + model_id; }

std::string variant_ref(const std::string& exchange_id, const VariantSpec& spec) {
  return exchange_id + "/" + spec.str();
}

std::string ResponseVariant::ref() const { return variant_ref(exchange_id, spec()); }

json to_json(const ResponseVariant& v) {
  return {{"exchange_id", v.exchange_id},
          {"provenance", v.provenance.str()},
          {"model_id", v.model_id},
          {"text", v.text},
          {"prompt_version", v.prompt_version}};
}

ResponseVariant variant_from_json(const json& j) {
  try {
    ResponseVariant v;
    v.exchange_id = j.at("exchange_id").get<std::string>();
    v.provenance = Provenance::parse(j.at("provenance").get<std::string>());
    v.model_id = j.at("model_id").get<std::string>();
    v.text = j.at("text").get<std::string>();
    v.prompt_version = j.value("prompt_version", std::string());
    if (v.text.empty()) throw ArtifactError("variant " + v.ref() + " has empty text");
    return v;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed variant record: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("malformed variant record: ") + e.what());
  }
}

ResponseVariant physician_variant(const QAExchange& ex) {
  return {ex.id, Provenance{}, kHumanModel, ex.physician_response, "original", {}};
}

namespace {

std::string strip_fences(std::string_view t) {
  if (t.rfind("```", 0) != 0) return std::string(t);
  auto nl = t.find('\n');
  if (nl == std::string_view::npos) {
    // Single-line ```text```.
    t.remove_prefix(3);
  } else {
    t.remove_prefix(nl + 1);
  }
  t = text::trim(t);
  if (t.size() >= 3 && t.substr(t.size() - 3) == "```") t.remove_suffix(3);
  return text::trimmed(t);
}

std::string strip_quotes(const std::string& t) {
  static const std::pair<std::string, std::string> kPairs[] = {
      {"\"", "\""}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"'", "'"}};
  for (const auto& [open, close] : kPairs) {
    if (t.size() < open.size() + close.size()) continue;
    if (t.compare(0, open.size(), open) != 0) continue;
    if (t.compare(t.size() - close.size(), close.size(), close) != 0) continue;
    auto inner = t.substr(open.size(), t.size() - open.size() - close.size());
    // Only a wrapping pair: the same marks must not occur inside.
    if (inner.find(open) != std::string::npos || inner.find(close) != std::string::npos) continue;
    return text::trimmed(inner);
  }
  return t;
}

std::string strip_preamble(const std::string& t) {
  auto nl = t.find('\n');
  if (nl == std::string::npos) return t;
  auto first = text::trim(std::string_view(t).substr(0, nl));
  auto rest = text::trim(std::string_view(t).substr(nl + 1));
  if (first.empty() || first.back() != ':' || rest.empty()) return t;
  auto head = text::trim(first.substr(0, first.size() - 1));
  if (!head.empty() && rest.find(head) != std::string_view::npos) return t;
  return std::string(rest);
}

}  // namespace

std::string strip_reply(const std::string& reply) {
  auto t = text::trimmed(reply);
  t = strip_preamble(t);
  t = strip_fences(t);
  t = strip_quotes(t);
  return text::trimmed(t);
}

namespace {

ResponseVariant finish_variant(const QAExchange& ex, Provenance prov, const std::string& model_id,
                               const std::string& reply, std::string prompt_version) {
  auto cleaned = strip_reply(reply);
  if (cleaned.empty())
    throw Error("empty " + prov.str() + " reply for exchange '" + ex.id + "' from model " + model_id);
  return {ex.id, prov, model_id, std::move(cleaned), std::move(prompt_version), {}};
}

}  // namespace

ResponseVariant edit_response(const QAExchange& ex, EditMode mode, EmpathyLevel level, Gateway& gateway,
                              const PromptKit& prompts, const std::string& model_id) {
  auto prov = Provenance::for_edit(mode, level);
  auto name = mode == EditMode::simple ? TemplateName::simple_edit : TemplateName::refined_edit;
  auto prompt = prompts.render(name, {{"PQ", ex.patient_question}, {"PR", ex.physician_response}}, level);
  auto reply = gateway.complete(gateway.make_request(model_id, "edit", prompt)).text;
  auto version = to_string(name) + "@" + prompts.get(name).version;
  if (level != EmpathyLevel::standard) version += "+" + to_string(level);
  return finish_variant(ex, prov, model_id, reply, version);
}

ResponseVariant generate_direct(const QAExchange& ex, Gateway& gateway, const PromptKit& prompts,
                                const std::string& model_id) {
  auto prompt = prompts.render(TemplateName::direct_generate, {{"PQ", ex.patient_question}});
  auto reply = gateway.complete(gateway.make_request(model_id, "generate", prompt)).text;
  return finish_variant(ex, {ProvenanceKind::direct_ai, EmpathyLevel::standard}, model_id, reply,
                        "direct_generate@" + prompts.get(TemplateName::direct_generate).version);
}

VariantStore VariantStore::load(const fs::path& path) {
  VariantStore store;
  std::ifstream in(path);
  if (!in) return store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      store.upsert(variant_from_json(json::parse(line)), true);
    } catch (const json::exception& e) {
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

void VariantStore::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path.string());
  for (const auto& v : variants_) out << to_json(v).dump() << '\n';
}

bool VariantStore::upsert(ResponseVariant v, bool overwrite) {
  for (auto& existing : variants_) {
    if (existing.exchange_id == v.exchange_id && existing.spec() == v.spec()) {
      if (!overwrite) return false;
      existing = std::move(v);
      return true;
    }
  }
  variants_.push_back(std::move(v));
  return true;
}

const ResponseVariant* VariantStore::find(const std::string& exchange_id, const VariantSpec& spec) const {
  for (const auto& v : variants_)
    if (v.exchange_id == exchange_id && v.spec() == spec) return &v;
  return nullptr;
}

}  // namespace emfact
