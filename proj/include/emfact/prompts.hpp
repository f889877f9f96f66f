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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emfact {

enum class TemplateName { simple_edit, refined_edit, direct_generate, emrank3, fact_extract, entail, classify };

enum class EmpathyLevel { standard, high, extreme };

std::string to_string(TemplateName name);
TemplateName parse_template_name(const std::string& s);
std::string to_string(EmpathyLevel level);
EmpathyLevel parse_empathy_level(const std::string& s);

struct PromptTemplate {
  TemplateName name;
  std::string body;
  std::string version;
  // Phrase in the body that encodes the empathy target; edit templates only.
  std::optional<std::string> empathy_descriptor;

  bool is_edit() const { return name == TemplateName::simple_edit || name == TemplateName::refined_edit; }
  std::string checksum() const;  // sha256 of body bytes
  // Placeholder names ("PQ", "R1", ...) appearing in the body, in order of first use.
  std::vector<std::string> placeholders() const;
};

using Bindings = std::map<std::string, std::string>;

// Substitutes every {NAME} placeholder in one pass; bound values are never rescanned.
// Throws PromptError on an unbound placeholder, or when a level is given for a
// non-edit template.
std::string render(const PromptTemplate& tpl, const Bindings& bindings,
                   std::optional<EmpathyLevel> level = std::nullopt,
                   const std::map<EmpathyLevel, std::string>* level_phrases = nullptr);

// Template directory: manifest.json plus one text file per template.
class PromptKit {
 public:
  static PromptKit load(const std::filesystem::path& dir);
  // Directory configured at build time (the repository's templates/).
  static std::filesystem::path default_dir();

  const PromptTemplate& get(TemplateName name) const;
  std::string render(TemplateName name, const Bindings& bindings,
                     std::optional<EmpathyLevel> level = std::nullopt) const;

  const std::map<EmpathyLevel, std::string>& level_phrases() const { return level_phrases_; }
  std::vector<TemplateName> names() const;
  // {name: {version, sha256}} plus the empathy-level substitutions.
  nlohmann::json checksums() const;

 private:
  std::map<TemplateName, PromptTemplate> templates_;
  std::map<EmpathyLevel, std::string> level_phrases_;
};

}  // namespace emfact
