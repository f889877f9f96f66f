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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emfact {

class Gateway;
class PromptKit;

enum class QuestionCategory { general, ehr_dependent, unclassified };

std::string to_string(QuestionCategory c);
QuestionCategory parse_question_category(const std::string& s);

struct QAExchange {
  std::string id;
  std::string patient_question;
  std::string physician_response;
  std::optional<QuestionCategory> category;
  std::map<std::string, std::string> metadata;

  bool operator==(const QAExchange&) const = default;
};

using Corpus = std::vector<QAExchange>;

enum class CorpusFormat { jsonl, csv };
CorpusFormat parse_corpus_format(const std::string& s);

// Throws CorpusError naming the offending line for malformed records,
// duplicate ids, and empty required fields.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus_jsonl(const std::string& content);
Corpus parse_corpus_csv(const std::string& content);

nlohmann::json to_json(const QAExchange& ex);
QAExchange exchange_from_json(const nlohmann::json& j);
std::string serialize_corpus_jsonl(const Corpus& corpus);
void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_checksum(const Corpus& corpus);

// RFC 4180 records; each record carries the 1-based line where it starts.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(const std::string& content);
std::string csv_escape(const std::string& field);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 when n == 1
};

struct Tertiles {
  double low = 0.0;
  double high = 0.0;
};

// Reference corpus bands: Short < 231 <= Medium <= 393 < Long (characters).
inline constexpr Tertiles kReferenceTertiles{231.0, 393.0};

enum class LengthBand { short_, medium, long_ };
std::string to_string(LengthBand b);

// Short iff len < low; Medium iff low <= len <= high; Long iff len > high.
LengthBand assign_band(double length, const Tertiles& t);

struct CorpusStats {
  std::size_t n_exchanges = 0;
  MeanStd question_words;
  MeanStd question_sentences;
  MeanStd response_words;
  MeanStd response_sentences;
  Tertiles response_length_tertiles;
  bool fixed_tertiles = false;
};

nlohmann::json to_json(const CorpusStats& s);

// Linear-interpolation percentile (fraction in [0,1]) of an unsorted sample.
double percentile(std::vector<double> values, double fraction);

// Per-exchange counts run in parallel; the reduction is in corpus order.
CorpusStats compute_stats(const Corpus& corpus, std::optional<Tertiles> fixed = std::nullopt);
// Sequential reference used by the tests.
CorpusStats compute_stats_serial(const Corpus& corpus, std::optional<Tertiles> fixed = std::nullopt);

// Physician-response length in UTF-8 code points.
std::size_t response_length(const QAExchange& ex);

struct ClassificationResult {
  QuestionCategory label = QuestionCategory::unclassified;
  std::vector<std::string> raw_replies;
};

// GENERAL / EHR parse of a classifier reply; nullopt when neither or both appear.
std::optional<QuestionCategory> parse_classification(const std::string& reply);

// One call, one retry on an unparseable reply, then unclassified.
ClassificationResult classify_question(const QAExchange& ex, Gateway& gateway, const PromptKit& prompts,
                                       const std::string& model_id);

// Fraction of exchanges per label (general, ehr_dependent, unclassified); sums to 1.
std::map<QuestionCategory, double> category_proportions(const Corpus& corpus);

}  // namespace emfact
