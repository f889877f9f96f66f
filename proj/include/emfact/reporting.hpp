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

#include "emfact/emranker.hpp"
#include "emfact/factcheck.hpp"

namespace emfact {

// One scored (original, edited) comparison as stored in factreport.json.
struct FactReportEntry {
  std::string original;  // variant spec, e.g. "physician:human"
  std::string edited;    // e.g. "edited_simple:gemini"
  std::string model;     // extraction/entailment model
  std::optional<std::string> level;
  CorpusFactReport report;
  nlohmann::json length_analysis;  // FactRatioAnalysis json, or null

  std::string edit_model() const;
  std::string label() const;  // "<edit model> (<provenance>)"
};

nlohmann::json to_json(const FactReportEntry& e);
FactReportEntry fact_entry_from_json(const nlohmann::json& j);

// Adds or replaces entries (keyed by original/edited/model) in factreport.json.
void upsert_fact_reports(const std::filesystem::path& file, const std::vector<FactReportEntry>& entries,
                         const nlohmann::json& metadata);

struct RunReport {
  std::string run_id;  // digest of the report content
  std::string corpus_checksum;
  nlohmann::json prompt_checksums;
  nlohmann::json backend;
  nlohmann::json config;  // run_config.json when present
  std::optional<nlohmann::json> stats;
  std::optional<nlohmann::json> classification;
  std::vector<ComparisonSummary> comparisons;
  std::vector<FactReportEntry> fact_reports;
  std::optional<nlohmann::json> alignment;
  std::optional<nlohmann::json> validation;
  std::vector<std::string> notes;
};

// Pure function of the files in `dir`. Throws ArtifactError on schema errors.
RunReport build_report(const std::filesystem::path& dir);

nlohmann::json to_json(const RunReport& r);
RunReport run_report_from_json(const nlohmann::json& j);

enum class ReportFormat { json, csv, markdown };
ReportFormat parse_report_format(const std::string& s);

std::string render_json(const RunReport& r);
std::string render_markdown(const RunReport& r);
std::string render_comparisons_csv(const RunReport& r);
std::string render_fact_metrics_csv(const RunReport& r);

// json/markdown: writes `out`. csv: `out` is a directory receiving
// comparisons.csv and fact_metrics.csv. Returns the written paths.
std::vector<std::filesystem::path> export_report(const RunReport& r, ReportFormat format,
                                                 const std::filesystem::path& out);

// Display helpers shared by all exports.
std::string format_pct(double percent);        // one decimal, no sign
std::string format_rate(const Ratio& r);       // "8.5%"
std::string format_metric(double value);       // two decimals

}  // namespace emfact
