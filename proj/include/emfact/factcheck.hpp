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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emfact/corpus.hpp"

namespace emfact {

class Gateway;
class PromptKit;
struct ResponseVariant;
class VariantStore;
struct VariantSpec;

// Exact nonnegative fraction. Comparison is by value (cross-multiplication).
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  Ratio complement() const { return {den - num, den}; }  // 1 - r
  friend bool operator==(const Ratio& a, const Ratio& b) { return a.num * b.den == b.num * a.den; }
};

// How a metric is defined when its own denominator set is empty.
//   literal: 1.0 if both fact sets are empty, else 0.0
//   vacuous: 1.0 whenever the denominator set is empty
enum class EdgeRule { literal, vacuous };
std::string to_string(EdgeRule r);
EdgeRule parse_edge_rule(const std::string& s);

// ---------------------------------------------------------------------------
// Decomposition

struct AtomicFactSet {
  std::string source_ref;
  std::vector<std::string> facts;
  std::string extraction_model;
  std::string raw_reply;
  bool refusal = false;  // reply was refusal/meta text; facts is empty
};

// Splits on "//", trims, drops empty pieces and (when dedup) repeats by
// normalized form, keeping the first surface form.
std::vector<std::string> split_facts(const std::string& reply, bool dedup = true);
bool looks_like_refusal(const std::string& reply);

AtomicFactSet decompose(const ResponseVariant& variant, Gateway& gateway, const PromptKit& prompts,
                        const std::string& extraction_model, bool dedup = true);

nlohmann::json to_json(const AtomicFactSet& f);
AtomicFactSet fact_set_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Entailment

struct EntailmentVerdict {
  std::string premise_ref;
  std::string hypothesis;
  int prediction = 0;  // 1 entailed, 0 not
  bool parse_failed = false;
  std::string raw_reply;
};

// Reads the first JSON object in the reply (markdown fences and prose
// tolerated) and returns its entailment_prediction when it is 0 or 1.
std::optional<int> parse_entailment_reply(const std::string& reply);

// Unparseable replies are retried once, then recorded as 0 with parse_failed.
EntailmentVerdict check_entailment(const std::string& premise, const std::string& hypothesis, Gateway& gateway,
                                   const PromptKit& prompts, const std::string& model);

nlohmann::json to_json(const EntailmentVerdict& v);
EntailmentVerdict verdict_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Scoring

struct PairFactReport {
  std::string exchange_id;
  std::string edited_ref;
  std::int64_t n_original = 0;   // |C|
  std::int64_t n_edited = 0;     // |C'|
  std::int64_t n_preserved = 0;  // facts of C entailed by the edited response
  std::int64_t n_grounded = 0;   // facts of C' entailed by the original response
  double recall = 0.0;
  double precision = 0.0;
  std::int64_t parse_failures = 0;
};

nlohmann::json to_json(const PairFactReport& p);
PairFactReport pair_report_from_json(const nlohmann::json& j);

// Per-pair metrics from raw counts, with the edge rule applied per metric.
PairFactReport score_counts(std::int64_t n_original, std::int64_t n_preserved, std::int64_t n_edited,
                            std::int64_t n_grounded, EdgeRule rule = EdgeRule::literal);

// recall_verdicts[i] must judge original.facts[i] (premise: edited response);
// precision_verdicts[j] must judge edited.facts[j] (premise: original response).
// Throws on a coverage gap.
PairFactReport score_pair(const std::string& exchange_id, const AtomicFactSet& original, const AtomicFactSet& edited,
                          std::span<const EntailmentVerdict> recall_verdicts,
                          std::span<const EntailmentVerdict> precision_verdicts, EdgeRule rule = EdgeRule::literal);

struct FactFlow {
  std::int64_t original = 0;
  std::int64_t preserved = 0;
  std::int64_t edited = 0;
  std::int64_t grounded = 0;
  std::int64_t new_facts = 0;  // edited - grounded
};

struct CorpusFactReport {
  std::size_t n_pairs = 0;
  FactFlow flow;
  Ratio micro_recall;
  Ratio micro_precision;
  double micro_f1 = 0.0;
  double macro_recall = 0.0;
  double macro_precision = 0.0;
  double macro_f1 = 0.0;
  Ratio loss_rate;           // (original - preserved) / original
  Ratio hallucination_rate;  // new / edited
  std::int64_t parse_failures = 0;
  std::size_t empty_original_pairs = 0;
  std::size_t empty_edited_pairs = 0;
  EdgeRule edge_rule = EdgeRule::literal;
};

double f1(double precision, double recall);

// Fact-flow totals and rates straight from corpus-level counts.
CorpusFactReport report_from_flow(std::int64_t original, std::int64_t preserved, std::int64_t edited,
                                  std::int64_t grounded, EdgeRule rule = EdgeRule::literal);

// OpenMP kernel: pairs are reduced in fixed-size blocks so the result does not
// depend on the thread count.
CorpusFactReport score_corpus(std::span<const PairFactReport> pairs, EdgeRule rule = EdgeRule::literal);
// Sequential reference over the same blocks; results are bitwise equal.
CorpusFactReport score_corpus_serial(std::span<const PairFactReport> pairs, EdgeRule rule = EdgeRule::literal);

nlohmann::json to_json(const CorpusFactReport& r);
CorpusFactReport corpus_report_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Length analysis

struct Quartiles {
  double mean = 0, q1 = 0, median = 0, q3 = 0;
};

struct BandStats {
  LengthBand band = LengthBand::short_;
  std::size_t n_pairs = 0;
  Quartiles precision;
  Quartiles recall;
  Quartiles fact_ratio;            // over pairs with n_original > 0
  std::size_t ratio_excluded = 0;  // pairs with n_original == 0
};

struct FactRatioAnalysis {
  Tertiles tertiles;
  std::vector<BandStats> bands;  // short, medium, long
  std::vector<std::optional<double>> fact_ratios;  // per input pair
  std::size_t ratio_excluded = 0;
};

Quartiles describe(std::vector<double> values);

// lengths maps exchange id -> physician-response length. Throws on a missing join.
FactRatioAnalysis fact_ratio_analysis(std::span<const PairFactReport> pairs,
                                      const std::map<std::string, double>& lengths, const Tertiles& tertiles);

nlohmann::json to_json(const FactRatioAnalysis& a);

// ---------------------------------------------------------------------------
// Orchestration

struct FactcheckOptions {
  std::string model;  // extraction and entailment
  std::optional<std::string> entail_model;  // defaults to model
  bool dedup = true;
  EdgeRule edge_rule = EdgeRule::literal;
};

struct FactcheckRun {
  std::vector<AtomicFactSet> fact_sets;         // originals and edits, corpus order
  std::vector<EntailmentVerdict> verdicts;      // recall then precision per pair
  std::vector<PairFactReport> pairs;
  CorpusFactReport report;
  std::vector<std::string> missing;             // exchanges without an edited variant
};

// Decomposes both sides of every (original, edited) pair and checks
// entailment in both directions. Calls fan out through the gateway.
FactcheckRun run_factcheck(const Corpus& corpus, const VariantStore& variants, const VariantSpec& original,
                           const VariantSpec& edited, Gateway& gateway, const PromptKit& prompts,
                           const FactcheckOptions& options);

}  // namespace emfact
