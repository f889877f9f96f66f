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

#include "emfact/corpus.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "emfact/error.hpp"
#include "emfact/gateway.hpp"
#include "emfact/prompts.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(QuestionCategory c) {
  switch (c) {
    case QuestionCategory::general: return "general";
    case QuestionCategory::ehr_dependent: return "ehr_dependent";
    case QuestionCategory::unclassified: return "unclassified";
  }
  return "unclassified";
}

QuestionCategory parse_question_category(const std::string& s) {
  if (s == "general") return QuestionCategory::general;
  if (s == "ehr_dependent") return QuestionCategory::ehr_dependent;
  if (s == "unclassified") return QuestionCategory::unclassified;
  throw CorpusError("unknown category '" + s + "'");
}

CorpusFormat parse_corpus_format(const std::string& s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "csv") return CorpusFormat::csv;
  throw CorpusError("unknown corpus format '" + s + "' (expected jsonl or csv)");
}

std::string to_string(LengthBand b) {
  switch (b) {
    case LengthBand::short_: return "short";
    case LengthBand::medium: return "medium";
    case LengthBand::long_: return "long";
  }
  return "short";
}

LengthBand assign_band(double length, const Tertiles& t) {
  if (length < t.low) return LengthBand::short_;
  if (length <= t.high) return LengthBand::medium;
  return LengthBand::long_;
}

namespace {

void validate_exchange(const QAExchange& ex, std::size_t line) {
  if (text::trim(ex.id).empty()) throw CorpusError("empty id", line);
  if (text::trim(ex.patient_question).empty())
    throw CorpusError("empty patient_question for id '" + ex.id + "'", line);
  if (text::trim(ex.physician_response).empty())
    throw CorpusError("empty physician_response for id '" + ex.id + "'", line);
}

class IdRegistry {
 public:
  void add(const std::string& id, std::size_t line) {
    auto [it, inserted] = seen_.emplace(id, line);
    if (!inserted)
      throw CorpusError("duplicate id '" + id + "' (first seen on line " + std::to_string(it->second) + ")", line);
  }

 private:
  std::unordered_map<std::string, std::size_t> seen_;
};

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

QAExchange exchange_from_json(const json& j) {
  if (!j.is_object()) throw CorpusError("record is not a JSON object");
  QAExchange ex;
  for (const char* key : {"id", "patient_question", "physician_response"}) {
    if (!j.contains(key)) throw CorpusError(std::string("missing required key '") + key + "'");
    if (!j[key].is_string()) throw CorpusError(std::string("key '") + key + "' must be a string");
  }
  ex.id = j["id"].get<std::string>();
  ex.patient_question = j["patient_question"].get<std::string>();
  ex.physician_response = j["physician_response"].get<std::string>();
  if (j.contains("category") && !j["category"].is_null()) {
    if (!j["category"].is_string()) throw CorpusError("category must be a string");
    ex.category = parse_question_category(j["category"].get<std::string>());
  }
  if (j.contains("metadata") && !j["metadata"].is_null()) {
    if (!j["metadata"].is_object()) throw CorpusError("metadata must be an object of strings");
    for (const auto& [k, v] : j["metadata"].items()) {
      if (!v.is_string()) throw CorpusError("metadata value for '" + k + "' must be a string");
      ex.metadata[k] = v.get<std::string>();
    }
  }
  return ex;
}

json to_json(const QAExchange& ex) {
  json j = {{"id", ex.id}, {"patient_question", ex.patient_question}, {"physician_response", ex.physician_response}};
  if (ex.category) j["category"] = to_string(*ex.category);
  if (!ex.metadata.empty()) j["metadata"] = ex.metadata;
  return j;
}

Corpus parse_corpus_jsonl(const std::string& content) {
  Corpus out;
  IdRegistry ids;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    QAExchange ex;
    try {
      ex = exchange_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw CorpusError(std::string("malformed JSON: ") + e.what(), lineno);
    } catch (const CorpusError& e) {
      throw CorpusError(e.what(), lineno);
    }
    validate_exchange(ex, lineno);
    ids.add(ex.id, lineno);
    out.push_back(std::move(ex));
  }
  return out;
}

Corpus parse_corpus_csv(const std::string& content) {
  auto records = parse_csv(content);
  std::erase_if(records, [](const CsvRecord& r) { return r.fields.size() == 1 && text::trim(r.fields[0]).empty(); });
  if (records.empty()) throw CorpusError("CSV corpus has no header row");
  const auto& header = records.front().fields;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[text::trimmed(header[i])] = i;
  for (const char* key : {"id", "patient_question", "physician_response"})
    if (!col.count(key)) throw CorpusError(std::string("CSV header lacks column '") + key + "'", records.front().line);

  Corpus out;
  IdRegistry ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size())
      throw CorpusError("expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(rec.fields.size()),
                        rec.line);
    QAExchange ex;
    ex.id = rec.fields[col["id"]];
    ex.patient_question = rec.fields[col["patient_question"]];
    ex.physician_response = rec.fields[col["physician_response"]];
    for (const auto& [name, idx] : col) {
      if (name == "id" || name == "patient_question" || name == "physician_response") continue;
      const auto& value = rec.fields[idx];
      if (name == "category") {
        if (!value.empty()) {
          try {
            ex.category = parse_question_category(value);
          } catch (const CorpusError& e) {
            throw CorpusError(e.what(), rec.line);
          }
        }
      } else if (!value.empty()) {
        ex.metadata[name] = value;
      }
    }
    validate_exchange(ex, rec.line);
    ids.add(ex.id, rec.line);
    out.push_back(std::move(ex));
  }
  return out;
}

Corpus load_corpus(const fs::path& path, CorpusFormat format) {
  if (!fs::exists(path)) throw CorpusError("corpus file not found: " + path.string());
  auto content = read_all(path);
  return format == CorpusFormat::jsonl ? parse_corpus_jsonl(content) : parse_corpus_csv(content);
}

std::string serialize_corpus_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus) {
    out += to_json(ex).dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus_jsonl(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  out << serialize_corpus_jsonl(corpus);
}

std::string corpus_checksum(const Corpus& corpus) { return text::sha256_hex(serialize_corpus_jsonl(corpus)); }

// ---------------------------------------------------------------------------
// Statistics

std::size_t response_length(const QAExchange& ex) { return text::utf8_length(ex.physician_response); }

double percentile(std::vector<double> values, double fraction) {
  if (values.empty()) throw CorpusError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  double pos = fraction * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = static_cast<std::size_t>(std::ceil(pos));
  double w = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * w;
}

namespace {

struct ExchangeCounts {
  double q_words = 0, q_sentences = 0, r_words = 0, r_sentences = 0, r_length = 0;
};

ExchangeCounts count_exchange(const QAExchange& ex) {
  return {static_cast<double>(text::count_words(ex.patient_question)),
          static_cast<double>(text::count_sentences(ex.patient_question)),
          static_cast<double>(text::count_words(ex.physician_response)),
          static_cast<double>(text::count_sentences(ex.physician_response)),
          static_cast<double>(response_length(ex))};
}

MeanStd mean_std(const std::vector<ExchangeCounts>& counts, double ExchangeCounts::*field) {
  MeanStd out;
  const double n = static_cast<double>(counts.size());
  double sum = 0;
  for (const auto& c : counts) sum += c.*field;
  out.mean = sum / n;
  if (counts.size() > 1) {
    double ss = 0;
    for (const auto& c : counts) ss += (c.*field - out.mean) * (c.*field - out.mean);
    out.stddev = std::sqrt(ss / (n - 1));
  }
  return out;
}

CorpusStats reduce_stats(const std::vector<ExchangeCounts>& counts, std::optional<Tertiles> fixed) {
  CorpusStats s;
  s.n_exchanges = counts.size();
  s.question_words = mean_std(counts, &ExchangeCounts::q_words);
  s.question_sentences = mean_std(counts, &ExchangeCounts::q_sentences);
  s.response_words = mean_std(counts, &ExchangeCounts::r_words);
  s.response_sentences = mean_std(counts, &ExchangeCounts::r_sentences);
  if (fixed) {
    s.response_length_tertiles = *fixed;
    s.fixed_tertiles = true;
  } else {
    std::vector<double> lengths;
    lengths.reserve(counts.size());
    for (const auto& c : counts) lengths.push_back(c.r_length);
    s.response_length_tertiles = {percentile(lengths, 1.0 / 3.0), percentile(lengths, 2.0 / 3.0)};
  }
  return s;
}

}  // namespace

CorpusStats compute_stats(const Corpus& corpus, std::optional<Tertiles> fixed) {
  if (corpus.empty()) throw CorpusError("statistics need a nonempty corpus");
  std::vector<ExchangeCounts> counts(corpus.size());
  const auto n = static_cast<std::int64_t>(corpus.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) counts[static_cast<std::size_t>(i)] = count_exchange(corpus[static_cast<std::size_t>(i)]);
  return reduce_stats(counts, fixed);
}

CorpusStats compute_stats_serial(const Corpus& corpus, std::optional<Tertiles> fixed) {
  if (corpus.empty()) throw CorpusError("statistics need a nonempty corpus");
  std::vector<ExchangeCounts> counts;
  counts.reserve(corpus.size());
  for (const auto& ex : corpus) counts.push_back(count_exchange(ex));
  return reduce_stats(counts, fixed);
}

json to_json(const CorpusStats& s) {
  auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"stddev", m.stddev}}; };
  return {{"n_exchanges", s.n_exchanges},
          {"patient_question", {{"words", ms(s.question_words)}, {"sentences", ms(s.question_sentences)}}},
          {"physician_response", {{"words", ms(s.response_words)}, {"sentences", ms(s.response_sentences)}}},
          {"response_length_tertiles",
           {{"low", s.response_length_tertiles.low},
            {"high", s.response_length_tertiles.high},
            {"mode", s.fixed_tertiles ? "fixed" : "computed"}}},
          {"tokenization",
           {{"words", "whitespace"},
            {"sentences", "split after . ! ? followed by whitespace or end of text; nonempty segments"},
            {"length", "utf-8 code points"},
            {"stddev", "sample (n-1)"},
            {"percentile", "linear interpolation at 1/3 and 2/3"}}}};
}

// ---------------------------------------------------------------------------
// Classification

std::optional<QuestionCategory> parse_classification(const std::string& reply) {
  // Whole-word, case-insensitive search for the two labels.
  auto lower = text::to_lower(reply);
  auto has_word = [&](std::string_view w) {
    std::size_t pos = 0;
    while ((pos = lower.find(w, pos)) != std::string::npos) {
      bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
      bool right = pos + w.size() == lower.size() || !std::isalnum(static_cast<unsigned char>(lower[pos + w.size()]));
      if (left && right) return true;
      pos += w.size();
    }
    return false;
  };
  bool general = has_word("general");
  bool ehr = has_word("ehr");
  if (general == ehr) return std::nullopt;
  return general ? QuestionCategory::general : QuestionCategory::ehr_dependent;
}

ClassificationResult classify_question(const QAExchange& ex, Gateway& gateway, const PromptKit& prompts,
                                       const std::string& model_id) {
  ClassificationResult out;
  auto prompt = prompts.render(TemplateName::classify, {{"PQ", ex.patient_question}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto req = gateway.make_request(model_id, "classify", prompt);
    req.attempt = attempt;
    auto reply = gateway.complete(req).text;
    out.raw_replies.push_back(reply);
    if (auto label = parse_classification(reply)) {
      out.label = *label;
      return out;
    }
  }
  out.label = QuestionCategory::unclassified;
  return out;
}

std::map<QuestionCategory, double> category_proportions(const Corpus& corpus) {
  std::map<QuestionCategory, double> out{
      {QuestionCategory::general, 0.0}, {QuestionCategory::ehr_dependent, 0.0}, {QuestionCategory::unclassified, 0.0}};
  if (corpus.empty()) return out;
  std::map<QuestionCategory, std::size_t> counts;
  for (const auto& ex : corpus) ++counts[ex.category.value_or(QuestionCategory::unclassified)];
  for (auto& [c, v] : out) v = static_cast<double>(counts[c]) / static_cast<double>(corpus.size());
  return out;
}

}  // namespace emfact
