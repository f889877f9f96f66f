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

#include "emfact/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "emfact/error.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<TemplateName, const char*> kNames[] = {
    {TemplateName::simple_edit, "simple_edit"}, {TemplateName::refined_edit, "refined_edit"},
    {TemplateName::direct_generate, "direct_generate"}, {TemplateName::emrank3, "emrank3"},
    {TemplateName::fact_extract, "fact_extract"}, {TemplateName::entail, "entail"},
    {TemplateName::classify, "classify"},
};

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Finds the placeholder starting at `pos` ('{'), returning its name or empty.
std::string placeholder_at(const std::string& body, std::size_t pos) {
  std::size_t i = pos + 1;
  while (i < body.size() && ident_char(body[i])) ++i;
  if (i == pos + 1 || i >= body.size() || body[i] != '}') return {};
  if (std::isdigit(static_cast<unsigned char>(body[pos + 1]))) return {};
  return body.substr(pos + 1, i - pos - 1);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PromptError("cannot read template " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string to_string(TemplateName name) {
  for (const auto& [n, s] : kNames)
    if (n == name) return s;
  return "unknown";
}

TemplateName parse_template_name(const std::string& s) {
  for (const auto& [n, str] : kNames)
    if (s == str) return n;
  throw PromptError("unknown template '" + s + "'");
}

std::string to_string(EmpathyLevel level) {
  switch (level) {
    case EmpathyLevel::standard: return "standard";
    case EmpathyLevel::high: return "high";
    case EmpathyLevel::extreme: return "extreme";
  }
  return "standard";
}

EmpathyLevel parse_empathy_level(const std::string& s) {
  if (s == "standard") return EmpathyLevel::standard;
  if (s == "high") return EmpathyLevel::high;
  if (s == "extreme") return EmpathyLevel::extreme;
  throw PromptError("unknown empathy level '" + s + "'");
}

std::string PromptTemplate::checksum() const { return text::sha256_hex(body); }

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    auto name = placeholder_at(body, i);
    if (name.empty()) continue;
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    i += name.size() + 1;
  }
  return out;
}

std::string render(const PromptTemplate& tpl, const Bindings& bindings, std::optional<EmpathyLevel> level,
                   const std::map<EmpathyLevel, std::string>* level_phrases) {
  std::string body = tpl.body;
  if (level) {
    if (!tpl.is_edit())
      throw PromptError("empathy level applies only to edit templates, not " + to_string(tpl.name));
    if (*level != EmpathyLevel::standard) {
      if (!tpl.empathy_descriptor || !level_phrases || !level_phrases->count(*level))
        throw PromptError("no empathy descriptor configured for " + to_string(tpl.name));
      auto pos = body.find(*tpl.empathy_descriptor);
      if (pos == std::string::npos)
        throw PromptError("empathy descriptor '" + *tpl.empathy_descriptor + "' not found in " + to_string(tpl.name));
      body.replace(pos, tpl.empathy_descriptor->size(), level_phrases->at(*level));
    }
  }

  std::string out;
  out.reserve(body.size() + 256);
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '{') {
      auto name = placeholder_at(body, i);
      if (!name.empty()) {
        auto it = bindings.find(name);
        if (it == bindings.end())
          throw PromptError("unbound placeholder {" + name + "} in template " + to_string(tpl.name));
        out += it->second;
        i += name.size() + 1;
        continue;
      }
    }
    out.push_back(body[i]);
  }
  return out;
}

fs::path PromptKit::default_dir() {
#ifdef EMFACT_DEFAULT_TEMPLATE_DIR
  return fs::path(EMFACT_DEFAULT_TEMPLATE_DIR);
#else
  return fs::path("templates");
#endif
}

PromptKit PromptKit::load(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw PromptError("malformed template manifest in " + dir.string() + ": " + e.what());
  }
  PromptKit kit;
  for (const auto& [name, key] : kNames) {
    if (!manifest.contains(key)) throw PromptError(std::string("manifest lacks template ") + key);
    const auto& entry = manifest[key];
    PromptTemplate t{name, read_file(dir / entry.at("file").get<std::string>()),
                     entry.value("version", std::string("0")), std::nullopt};
    if (entry.contains("empathy_descriptor")) t.empathy_descriptor = entry["empathy_descriptor"].get<std::string>();
    kit.templates_.emplace(name, std::move(t));
  }
  if (manifest.contains("empathy_levels"))
    for (const auto& [lvl, phrase] : manifest["empathy_levels"].items())
      kit.level_phrases_[parse_empathy_level(lvl)] = phrase.get<std::string>();
  return kit;
}

const PromptTemplate& PromptKit::get(TemplateName name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw PromptError("template not loaded: " + to_string(name));
  return it->second;
}

std::string PromptKit::render(TemplateName name, const Bindings& bindings, std::optional<EmpathyLevel> level) const {
  return emfact::render(get(name), bindings, level, &level_phrases_);
}

std::vector<TemplateName> PromptKit::names() const {
  std::vector<TemplateName> out;
  for (const auto& [n, _] : templates_) out.push_back(n);
  return out;
}

json PromptKit::checksums() const {
  json out = json::object();
  for (const auto& [n, t] : templates_) out[to_string(n)] = {{"version", t.version}, {"sha256", t.checksum()}};
  json levels = json::object();
  for (const auto& [lvl, phrase] : level_phrases_) levels[to_string(lvl)] = phrase;
  out["empathy_levels"] = levels;
  return out;
}

}  // namespace emfact
