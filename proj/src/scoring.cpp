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

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "emfact/error.hpp"
#include "emfact/factcheck.hpp"
#include "emfact/text.hpp"

namespace emfact {

using nlohmann::json;

std::string to_string(EdgeRule r) { return r == EdgeRule::literal ? "literal" : "vacuous"; }

EdgeRule parse_edge_rule(const std::string& s) {
  if (s == "literal") return EdgeRule::literal;
  if (s == "vacuous") return EdgeRule::vacuous;
  throw ConfigError("unknown edge rule '" + s + "' (expected literal or vacuous)");
}

double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

// Value of a metric whose denominator set is empty.
double empty_denominator_value(std::int64_t other_set_size, EdgeRule rule) {
  if (rule == EdgeRule::vacuous) return 1.0;
  return other_set_size == 0 ? 1.0 : 0.0;
}

Ratio ratio_or_edge(std::int64_t num, std::int64_t den, std::int64_t other_total, EdgeRule rule) {
  if (den > 0) return {num, den};
  return empty_denominator_value(other_total, rule) == 1.0 ? Ratio{1, 1} : Ratio{0, 1};
}

void check_counts(std::int64_t n_original, std::int64_t n_preserved, std::int64_t n_edited, std::int64_t n_grounded) {
  if (n_original < 0 || n_edited < 0 || n_preserved < 0 || n_grounded < 0)
    throw Error("fact counts must be nonnegative");
  if (n_preserved > n_original) throw Error("preserved facts exceed original facts");
  if (n_grounded > n_edited) throw Error("grounded facts exceed edited facts");
}

}  // namespace

PairFactReport score_counts(std::int64_t n_original, std::int64_t n_preserved, std::int64_t n_edited,
                            std::int64_t n_grounded, EdgeRule rule) {
  check_counts(n_original, n_preserved, n_edited, n_grounded);
  PairFactReport p;
  p.n_original = n_original;
  p.n_preserved = n_preserved;
  p.n_edited = n_edited;
  p.n_grounded = n_grounded;
  p.recall = n_original > 0 ? static_cast<double>(n_preserved) / static_cast<double>(n_original)
                            : empty_denominator_value(n_edited, rule);
  p.precision = n_edited > 0 ? static_cast<double>(n_grounded) / static_cast<double>(n_edited)
                             : empty_denominator_value(n_original, rule);
  return p;
}

PairFactReport score_pair(const std::string& exchange_id, const AtomicFactSet& original, const AtomicFactSet& edited,
                          std::span<const EntailmentVerdict> recall_verdicts,
                          std::span<const EntailmentVerdict> precision_verdicts, EdgeRule rule) {
  auto check = [&](const AtomicFactSet& facts, std::span<const EntailmentVerdict> verdicts, const char* dir) {
    if (facts.facts.size() != verdicts.size())
      throw Error(std::string("verdict coverage gap (") + dir + ") for " + exchange_id + ": " +
                  std::to_string(facts.facts.size()) + " facts, " + std::to_string(verdicts.size()) + " verdicts");
    for (std::size_t i = 0; i < verdicts.size(); ++i)
      if (verdicts[i].hypothesis != facts.facts[i])
        throw Error(std::string("verdict coverage gap (") + dir + ") for " + exchange_id + ": fact '" +
                    facts.facts[i] + "' has no verdict");
  };
  check(original, recall_verdicts, "recall");
  check(edited, precision_verdicts, "precision");

  std::int64_t preserved = 0, grounded = 0, failures = 0;
  for (const auto& v : recall_verdicts) {
    preserved += v.prediction;
    failures += v.parse_failed;
  }
  for (const auto& v : precision_verdicts) {
    grounded += v.prediction;
    failures += v.parse_failed;
  }
  auto p = score_counts(static_cast<std::int64_t>(original.facts.size()), preserved,
                        static_cast<std::int64_t>(edited.facts.size()), grounded, rule);
  p.exchange_id = exchange_id;
  p.edited_ref = edited.source_ref;
  p.parse_failures = failures;
  return p;
}

CorpusFactReport report_from_flow(std::int64_t original, std::int64_t preserved, std::int64_t edited,
                                  std::int64_t grounded, EdgeRule rule) {
  check_counts(original, preserved, edited, grounded);
  CorpusFactReport r;
  r.edge_rule = rule;
  r.flow = {original, preserved, edited, grounded, edited - grounded};
  r.micro_recall = ratio_or_edge(preserved, original, edited, rule);
  r.micro_precision = ratio_or_edge(grounded, edited, original, rule);
  r.loss_rate = r.micro_recall.complement();
  r.hallucination_rate = r.micro_precision.complement();
  r.micro_f1 = f1(r.micro_precision.value(), r.micro_recall.value());
  return r;
}

namespace {

struct Partial {
  std::int64_t original = 0, preserved = 0, edited = 0, grounded = 0, failures = 0;
  std::size_t empty_original = 0, empty_edited = 0;
  double recall_sum = 0.0, precision_sum = 0.0;

  void add(const PairFactReport& p, EdgeRule rule) {
    original += p.n_original;
    preserved += p.n_preserved;
    edited += p.n_edited;
    grounded += p.n_grounded;
    failures += p.parse_failures;
    empty_original += p.n_original == 0;
    empty_edited += p.n_edited == 0;
    // Recomputed from counts so the corpus-level rule governs empty sets.
    auto scored = score_counts(p.n_original, p.n_preserved, p.n_edited, p.n_grounded, rule);
    recall_sum += scored.recall;
    precision_sum += scored.precision;
  }
  void merge(const Partial& o) {
    original += o.original;
    preserved += o.preserved;
    edited += o.edited;
    grounded += o.grounded;
    failures += o.failures;
    empty_original += o.empty_original;
    empty_edited += o.empty_edited;
    recall_sum += o.recall_sum;
    precision_sum += o.precision_sum;
  }
};

CorpusFactReport finish(const Partial& total, std::size_t n, EdgeRule rule) {
  // Pairs with an empty denominator set add nothing to the micro counts.
  auto r = report_from_flow(total.original, total.preserved, total.edited, total.grounded, rule);
  r.n_pairs = n;
  r.parse_failures = total.failures;
  r.empty_original_pairs = total.empty_original;
  r.empty_edited_pairs = total.empty_edited;
  r.macro_recall = total.recall_sum / static_cast<double>(n);
  r.macro_precision = total.precision_sum / static_cast<double>(n);
  r.macro_f1 = f1(r.macro_precision, r.macro_recall);
  return r;
}

constexpr std::size_t kBlock = 1024;

}  // namespace

CorpusFactReport score_corpus(std::span<const PairFactReport> pairs, EdgeRule rule) {
  if (pairs.empty()) throw Error("score_corpus needs at least one pair");
  const std::size_t n_blocks = (pairs.size() + kBlock - 1) / kBlock;
  std::vector<Partial> blocks(n_blocks);
  const auto nb = static_cast<std::int64_t>(n_blocks);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = std::min(pairs.size(), begin + kBlock);
    Partial& part = blocks[static_cast<std::size_t>(b)];
    for (std::size_t i = begin; i < end; ++i) part.add(pairs[i], rule);
  }
  Partial total;
  for (const auto& part : blocks) total.merge(part);
  return finish(total, pairs.size(), rule);
}

CorpusFactReport score_corpus_serial(std::span<const PairFactReport> pairs, EdgeRule rule) {
  if (pairs.empty()) throw Error("score_corpus needs at least one pair");
  // Same block partition as the parallel kernel, so the two agree bit for bit.
  Partial total;
  for (std::size_t begin = 0; begin < pairs.size(); begin += kBlock) {
    Partial part;
    for (std::size_t i = begin; i < std::min(pairs.size(), begin + kBlock); ++i) part.add(pairs[i], rule);
    total.merge(part);
  }
  return finish(total, pairs.size(), rule);
}

json to_json(const PairFactReport& p) {
  return {{"exchange_id", p.exchange_id}, {"edited_ref", p.edited_ref}, {"n_original", p.n_original},
          {"n_edited", p.n_edited},       {"n_preserved", p.n_preserved}, {"n_grounded", p.n_grounded},
          {"recall", p.recall},           {"precision", p.precision},   {"parse_failures", p.parse_failures}};
}

PairFactReport pair_report_from_json(const json& j) {
  try {
    PairFactReport p;
    p.exchange_id = j.at("exchange_id").get<std::string>();
    p.edited_ref = j.value("edited_ref", std::string());
    p.n_original = j.at("n_original").get<std::int64_t>();
    p.n_edited = j.at("n_edited").get<std::int64_t>();
    p.n_preserved = j.at("n_preserved").get<std::int64_t>();
    p.n_grounded = j.at("n_grounded").get<std::int64_t>();
    p.recall = j.at("recall").get<double>();
    p.precision = j.at("precision").get<double>();
    p.parse_failures = j.value("parse_failures", std::int64_t{0});
    return p;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed pair report: ") + e.what());
  }
}

namespace {
json ratio_json(const Ratio& r) { return {{"num", r.num}, {"den", r.den}, {"value", r.value()}}; }
Ratio ratio_from(const json& j) { return {j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>()}; }
}  // namespace

json to_json(const CorpusFactReport& r) {
  return {{"n_pairs", r.n_pairs},
          {"edge_rule", to_string(r.edge_rule)},
          {"flow",
           {{"original", r.flow.original},
            {"preserved", r.flow.preserved},
            {"edited", r.flow.edited},
            {"grounded", r.flow.grounded},
            {"new", r.flow.new_facts}}},
          {"micro_recall", ratio_json(r.micro_recall)},
          {"micro_precision", ratio_json(r.micro_precision)},
          {"micro_f1", r.micro_f1},
          {"macro_recall", r.macro_recall},
          {"macro_precision", r.macro_precision},
          {"macro_f1", r.macro_f1},
          {"loss_rate", ratio_json(r.loss_rate)},
          {"hallucination_rate", ratio_json(r.hallucination_rate)},
          {"parse_failures", r.parse_failures},
          {"empty_original_pairs", r.empty_original_pairs},
          {"empty_edited_pairs", r.empty_edited_pairs},
          {"edge_note",
           "macro applies the edge rule per pair; micro counts skip empty sets"}};
}

CorpusFactReport corpus_report_from_json(const json& j) {
  try {
    CorpusFactReport r;
    r.n_pairs = j.at("n_pairs").get<std::size_t>();
    r.edge_rule = parse_edge_rule(j.at("edge_rule").get<std::string>());
    const auto& f = j.at("flow");
    r.flow = {f.at("original").get<std::int64_t>(), f.at("preserved").get<std::int64_t>(),
              f.at("edited").get<std::int64_t>(), f.at("grounded").get<std::int64_t>(),
              f.at("new").get<std::int64_t>()};
    r.micro_recall = ratio_from(j.at("micro_recall"));
    r.micro_precision = ratio_from(j.at("micro_precision"));
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.loss_rate = ratio_from(j.at("loss_rate"));
    r.hallucination_rate = ratio_from(j.at("hallucination_rate"));
    r.parse_failures = j.value("parse_failures", std::int64_t{0});
    r.empty_original_pairs = j.value("empty_original_pairs", std::size_t{0});
    r.empty_edited_pairs = j.value("empty_edited_pairs", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed fact report: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("malformed fact report: ") + e.what());
  }
}

}  // namespace emfact
