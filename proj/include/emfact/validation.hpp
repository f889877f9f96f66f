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

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emfact {

// Which entailment direction flagged a fact.
enum class FlagDirection { not_preserved, added };
std::string to_string(FlagDirection d);
FlagDirection parse_flag_direction(const std::string& s);

// One automatically flagged fact and the reviewer's verdict on it.
struct FlagRecord {
  std::string variant_ref;
  std::string fact;
  FlagDirection direction = FlagDirection::added;
  bool confirmed = false;
  std::string annotator_id;
};

nlohmann::json to_json(const FlagRecord& f);
FlagRecord flag_from_json(const nlohmann::json& j);

struct FlagPrecision {
  FlagDirection direction = FlagDirection::added;
  std::size_t flagged = 0;
  std::size_t confirmed = 0;
  double precision() const { return flagged ? static_cast<double>(confirmed) / static_cast<double>(flagged) : 0.0; }
};

// Precision of the flags per direction (not_preserved first, then added).
std::vector<FlagPrecision> validation_tallies(const std::vector<FlagRecord>& flags);

// The six fabrication patterns used by the clinical reviewers.
enum class FabricationCategory {
  follow_up_recommendation,
  clinical_assumption,
  clinical_inaccuracy,
  unnecessary_advice,
  unnecessary_doubt_fear,
  false_assurance,
};
inline constexpr std::size_t kFabricationCategoryCount = 6;
std::string to_string(FabricationCategory c);
// Display label, e.g. "Added follow-up recommendation".
std::string display_name(FabricationCategory c);
// Throws ArtifactError on unknown names.
FabricationCategory parse_fabrication_category(const std::string& s);
const std::vector<FabricationCategory>& all_fabrication_categories();

// A response the clinical reviewers flagged with one pattern.
struct ExpertFlag {
  std::string response_id;
  FabricationCategory category;
};

// An automatically flagged fact mapped to a pattern for one response.
struct MappedFact {
  std::string response_id;
  FabricationCategory category;
  std::string fact;
};

struct CategoryCoverage {
  FabricationCategory category;
  std::size_t total = 0;     // expert-flagged instances
  std::size_t detected = 0;  // instances with >= 1 mapped fact
  std::size_t missed() const { return total - detected; }
  double coverage() const { return total ? static_cast<double>(detected) / static_cast<double>(total) : 0.0; }
};

struct CoverageReport {
  std::vector<CategoryCoverage> categories;  // fixed category order
  std::size_t total = 0;
  std::size_t detected = 0;
  double overall() const { return total ? static_cast<double>(detected) / static_cast<double>(total) : 0.0; }
};

CoverageReport category_coverage(const std::vector<ExpertFlag>& expert, const std::vector<MappedFact>& mapped);

nlohmann::json to_json(const FlagPrecision& p);
nlohmann::json to_json(const CoverageReport& r);

std::vector<FlagRecord> load_flags(const std::filesystem::path& path);
std::vector<ExpertFlag> load_expert_flags(const std::filesystem::path& path);
std::vector<MappedFact> load_mapped_facts(const std::filesystem::path& path);

}  // namespace emfact
