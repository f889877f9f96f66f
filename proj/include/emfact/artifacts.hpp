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
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emfact {

// Flat artifact directory; each file belongs to exactly one stage.
namespace artifact {
inline constexpr const char* kCorpus = "corpus.jsonl";            // ingest
inline constexpr const char* kStats = "stats.json";               // stats
inline constexpr const char* kClassify = "classify.jsonl";        // classify
inline constexpr const char* kVariants = "variants.jsonl";        // edit, generate
inline constexpr const char* kJudgments = "judgments.jsonl";      // rank
inline constexpr const char* kFacts = "facts.jsonl";              // factcheck
inline constexpr const char* kEntailments = "entailments.jsonl";  // factcheck
inline constexpr const char* kFactPairs = "factpairs.jsonl";      // factcheck
inline constexpr const char* kFactReport = "factreport.json";     // factcheck
inline constexpr const char* kAlignment = "alignment.json";       // align
inline constexpr const char* kValidation = "validation.json";     // validate
inline constexpr const char* kRunConfig = "run_config.json";      // run
}  // namespace artifact

std::string read_text(const std::filesystem::path& path);
// Writes through a temporary file and a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& records);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

// Replaces records whose key matches an incoming record and appends the rest,
// keeping the existing file order. Missing file -> plain write.
void upsert_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records,
                  const std::function<std::string(const nlohmann::json&)>& key);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace emfact
