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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emfact/corpus.hpp"
#include "emfact/prompts.hpp"

namespace emfact {

class Gateway;

enum class ProvenanceKind { physician, direct_ai, edited_simple, edited_refined, edited_level };
enum class EditMode { simple, refined };

EditMode parse_edit_mode(const std::string& s);
std::string to_string(EditMode m);

// Where a response text came from. Level variants are simple-prompt edits with
// a modified empathy descriptor.
struct Provenance {
  ProvenanceKind kind = ProvenanceKind::physician;
  EmpathyLevel level = EmpathyLevel::standard;

  static Provenance for_edit(EditMode mode, EmpathyLevel level);
  // "physician", "direct_ai", "edited_simple", "edited_refined", "edited_level_high", ...
  std::string str() const;
  static Provenance parse(const std::string& s);
  // Template that produced this provenance; nullopt for physician.
  std::optional<TemplateName> template_name() const;

  auto operator<=>(const Provenance&) const = default;
};

inline const std::string kHumanModel = "human";

// "<provenance>:<model>"; the model defaults to "human" for physician responses.
struct VariantSpec {
  Provenance provenance;
  std::string model_id;

  static VariantSpec parse(const std::string& s);
  std::string str() const;
  auto operator<=>(const VariantSpec&) const = default;
};

struct ResponseVariant {
  std::string exchange_id;
  Provenance provenance;
  std::string model_id;
  std::string text;
  std::string prompt_version;
  std::string created_at;  // not serialized; run timestamps live in run metadata

  VariantSpec spec() const { return {provenance, model_id}; }
  // "<exchange_id>/<provenance>:<model>"
  std::string ref() const;
};

std::string variant_ref(const std::string& exchange_id, const VariantSpec& spec);

nlohmann::json to_json(const ResponseVariant& v);
ResponseVariant variant_from_json(const nlohmann::json& j);

// The physician's own response, wrapped as a variant.
ResponseVariant physician_variant(const QAExchange& ex);

// Removes surrounding whitespace, a preamble line ending in ':', markdown code
// fences and one pair of wrapping quotes.
std::string strip_reply(const std::string& reply);

ResponseVariant edit_response(const QAExchange& ex, EditMode mode, EmpathyLevel level, Gateway& gateway,
                              const PromptKit& prompts, const std::string& model_id);
ResponseVariant generate_direct(const QAExchange& ex, Gateway& gateway, const PromptKit& prompts,
                                const std::string& model_id);

// Variants keyed by (exchange_id, provenance, model_id), kept in insertion order.
class VariantStore {
 public:
  static VariantStore load(const std::filesystem::path& path);  // missing file -> empty store
  void save(const std::filesystem::path& path) const;

  // Returns false (and leaves the store unchanged) when the key exists and !overwrite.
  bool upsert(ResponseVariant v, bool overwrite);
  const ResponseVariant* find(const std::string& exchange_id, const VariantSpec& spec) const;
  const std::vector<ResponseVariant>& all() const { return variants_; }
  std::size_t size() const { return variants_.size(); }

 private:
  std::vector<ResponseVariant> variants_;
};

}  // namespace emfact
