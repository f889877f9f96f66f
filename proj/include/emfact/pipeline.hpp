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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emfact/corpus.hpp"
#include "emfact/editor.hpp"
#include "emfact/error.hpp"
#include "emfact/factcheck.hpp"
#include "emfact/prompts.hpp"

namespace emfact {

class Gateway;

// Everything a run depends on. Serialized into run_config.json and into the
// metadata of the factuality report. The API key is never stored.
struct RunConfig {
  // paths
  std::filesystem::path corpus;  // ingest source
  std::optional<CorpusFormat> corpus_format;  // default: by extension
  std::filesystem::path artifact_dir = "artifacts";
  std::filesystem::path cache_dir;     // empty: <artifact_dir>/cache
  std::filesystem::path template_dir;  // empty: built-in templates

  // backend
  std::string backend = "mock";  // http | mock
  std::filesystem::path mock_script;
  std::string api_base;  // empty: LLM_API_BASE
  std::size_t parallelism = 4;
  double temperature = 0.0;
  std::map<std::string, double> stage_temperature;
  int max_tokens = 1024;
  int max_retries = 3;
  std::uint64_t seed = 0;

  // models per stage
  std::string classify_model;
  std::string edit_model;
  std::string generate_model;
  std::vector<std::string> judge_models;
  std::string fact_model;
  std::string entail_model;  // empty: fact_model

  // stage options
  EditMode edit_mode = EditMode::simple;
  EmpathyLevel level = EmpathyLevel::standard;
  bool force = false;  // regenerate existing variants
  std::string rank_a = "physician";
  std::string rank_b;  // empty: the edit stage's variant
  bool debias = true;
  std::string fact_original = "physician";
  std::string fact_edited;  // empty: the edit stage's variant
  std::vector<EmpathyLevel> sweep_levels{EmpathyLevel::standard, EmpathyLevel::high, EmpathyLevel::extreme};
  bool fixed_tertiles = false;
  Tertiles tertiles = kReferenceTertiles;
  bool dedup = true;
  EdgeRule edge_rule = EdgeRule::literal;

  // human annotation inputs
  std::filesystem::path judgments;  // empty: <artifact_dir>/judgments.jsonl
  std::filesystem::path human_labels;
  std::filesystem::path flags;
  std::filesystem::path expert_flags;
  std::filesystem::path mapped_facts;

  // report
  std::string report_format = "md";
  std::filesystem::path report_out;  // empty: <artifact_dir>/report.<ext>

  std::filesystem::path effective_cache_dir() const;
  VariantSpec edit_spec() const;  // what the edit stage produces
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

enum class Stage { ingest, stats, classify, edit, generate, rank, factcheck, sweep, align, validate, report };
std::string to_string(Stage s);
Stage parse_stage(const std::string& s);
// Comma-separated list, kept in pipeline order.
std::vector<Stage> parse_stages(const std::string& csv);
const std::vector<Stage>& all_stages();

// A stage failed; what() names the stage.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& message)
      : Error("stage " + to_string(stage) + " failed: " + message), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

std::unique_ptr<Gateway> make_gateway(const RunConfig& config);
PromptKit load_prompts(const RunConfig& config);

struct StageResult {
  Stage stage;
  std::vector<std::filesystem::path> written;
  std::string summary;
};

// Stages run in pipeline order. ConfigError for invalid settings; StageError
// (naming the stage) for a missing dependency or a failure inside a stage.
// Artifacts of completed stages stay in place, so a rerun resumes.
std::vector<StageResult> run_pipeline(const RunConfig& config, const std::vector<Stage>& stages);

// Same, with a caller-supplied gateway (tests, custom backends).
std::vector<StageResult> run_pipeline(const RunConfig& config, const std::vector<Stage>& stages, Gateway& gateway);

}  // namespace emfact
