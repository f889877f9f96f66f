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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Uses the mock backend only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emfact/artifacts.hpp"
#include "emfact/editor.hpp"
#include "emfact/emranker.hpp"
#include "emfact/factcheck.hpp"
#include "emfact/gateway.hpp"
#include "emfact/pipeline.hpp"
#include "emfact/reporting.hpp"
#include "emfact/text.hpp"
#include "emfact/validation.hpp"
#include "helpers.hpp"

using namespace emfact;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 4) { return text::fixed(v, decimals); }

// ---------------------------------------------------------------------------

Outcome metric_arithmetic() {
  Outcome o;
  auto t0 = Clock::now();
  auto r = report_from_flow(934, 855, 1194, 1081);
  double elapsed = seconds_since(t0);
  o.expect(std::abs(r.micro_recall.value() - 0.915) <= 0.001, "micro_recall " + fmt(r.micro_recall.value()));
  o.expect(std::abs(r.micro_precision.value() - 0.905) <= 0.001, "micro_precision " + fmt(r.micro_precision.value()));
  o.expect(std::abs(100 * r.loss_rate.value() - 8.5) <= 0.1, "loss_rate " + format_rate(r.loss_rate));
  o.expect(std::abs(100 * r.hallucination_rate.value() - 9.5) <= 0.1,
           "hallucination_rate " + format_rate(r.hallucination_rate));
  o.expect(r.flow.new_facts == 113, "new " + std::to_string(r.flow.new_facts));
  o.expect(elapsed < 1.0, "runtime " + fmt(elapsed, 3) + "s");
  o.detail = "R " + fmt(r.micro_recall.value(), 3) + ", P " + fmt(r.micro_precision.value(), 3) + ", loss " +
             format_rate(r.loss_rate) + ", halluc " + format_rate(r.hallucination_rate) + ", new " +
             std::to_string(r.flow.new_facts);
  return o;
}

std::vector<PairFactReport> random_pairs(std::mt19937_64& rng, std::size_t n, int max_facts) {
  std::uniform_int_distribution<int> count(0, max_facts);
  std::vector<PairFactReport> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    int o = count(rng), e = count(rng);
    std::uniform_int_distribution<int> po(0, o), pe(0, e);
    pairs.push_back(score_counts(o, po(rng), e, pe(rng)));
  }
  return pairs;
}

Outcome identities() {
  Outcome o;
  auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> size(1, 400);
  for (int corpus = 0; corpus < 1000; ++corpus) {
    auto pairs = random_pairs(rng, size(rng), 15);
    auto r = score_corpus(pairs);
    std::int64_t orig = 0, pres = 0, ed = 0, gr = 0;
    for (const auto& p : pairs) {
      orig += p.n_original;
      pres += p.n_preserved;
      ed += p.n_edited;
      gr += p.n_grounded;
    }
    auto tag = "corpus " + std::to_string(corpus);
    o.expect(r.hallucination_rate == r.micro_precision.complement(), tag + ": hallucination != 1 - precision");
    o.expect(r.loss_rate == r.micro_recall.complement(), tag + ": loss != 1 - recall");
    if (orig > 0) o.expect(r.loss_rate == Ratio{orig - pres, orig}, tag + ": loss count");
    if (ed > 0) o.expect(r.hallucination_rate == Ratio{ed - gr, ed}, tag + ": hallucination count");
    o.expect(r.flow.new_facts == ed - gr, tag + ": new facts");
  }
  double elapsed = seconds_since(t0);
  o.expect(elapsed < 10.0, "runtime " + fmt(elapsed, 2) + "s");
  o.detail = "1000 corpora in " + fmt(elapsed, 2) + "s";
  return o;
}

Outcome micro_macro() {
  Outcome o;
  std::mt19937_64 rng(77);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int c = 1 + trial % 11, e = 1 + (trial * 7) % 13;
    std::uniform_int_distribution<int> pc(0, c), pe(0, e);
    std::vector<PairFactReport> pairs;
    for (int i = 0; i < 250; ++i) pairs.push_back(score_counts(c, pc(rng), e, pe(rng)));
    auto r = score_corpus(pairs);
    double dr = std::abs(r.micro_recall.value() - r.macro_recall);
    double dp = std::abs(r.micro_precision.value() - r.macro_precision);
    worst = std::max({worst, dr, dp});
    o.expect(dr <= 1e-12 && dp <= 1e-12, "uniform trial " + std::to_string(trial));
  }
  // Nonuniform: brute force over one flat list of per-fact verdicts.
  std::bernoulli_distribution entailed(0.75);
  std::uniform_int_distribution<int> n(0, 14);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> recall_flat, precision_flat;
    std::vector<PairFactReport> pairs;
    for (int i = 0; i < 150; ++i) {
      int c = n(rng), e = n(rng), pres = 0, gr = 0;
      for (int k = 0; k < c; ++k) {
        recall_flat.push_back(entailed(rng));
        pres += recall_flat.back();
      }
      for (int k = 0; k < e; ++k) {
        precision_flat.push_back(entailed(rng));
        gr += precision_flat.back();
      }
      pairs.push_back(score_counts(c, pres, e, gr));
    }
    auto r = score_corpus(pairs);
    std::int64_t rn = 0, pn = 0;
    for (int v : recall_flat) rn += v;
    for (int v : precision_flat) pn += v;
    o.expect(r.micro_recall.num == rn && r.micro_recall.den == static_cast<std::int64_t>(recall_flat.size()),
             "flat recall trial " + std::to_string(trial));
    o.expect(r.micro_precision.num == pn && r.micro_precision.den == static_cast<std::int64_t>(precision_flat.size()),
             "flat precision trial " + std::to_string(trial));
  }
  o.detail = "max |micro - macro| on uniform corpora " + text::fixed(worst * 1e15, 2) + "e-15";
  return o;
}

Outcome edge_rules() {
  Outcome o;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> k(1, 12);
  for (int trial = 0; trial < 100; ++trial) {
    int a = k(rng), b = k(rng);
    std::uniform_int_distribution<int> pa(0, a), pb(0, b);
    int ga = pa(rng), pb_ = pb(rng);
    auto zz = score_counts(0, 0, 0, 0);
    auto zk = score_counts(0, 0, a, ga);
    auto kz = score_counts(b, pb_, 0, 0);
    o.expect(zz.recall == 1.0 && zz.precision == 1.0, "(0,0)");
    o.expect(zk.recall == 0.0 && zk.precision == double(ga) / a, "(0,k)");
    o.expect(kz.recall == double(pb_) / b && kz.precision == 0.0, "(k,0)");

    auto base = random_pairs(rng, 40, 8);
    std::int64_t orig = 0, pres = 0, ed = 0, gr = 0;
    for (const auto& p : base) {
      orig += p.n_original;
      pres += p.n_preserved;
      ed += p.n_edited;
      gr += p.n_grounded;
    }
    auto with_edges = base;
    with_edges.insert(with_edges.end(), {zz, zk, kz});
    auto r = score_corpus(with_edges);
    // Empty sets add nothing; the nonempty side of a one-sided pair counts as usual.
    o.expect(r.micro_recall.den == orig + b && r.micro_recall.num == pres + pb_, "micro recall denominators");
    o.expect(r.micro_precision.den == ed + a && r.micro_precision.num == gr + ga, "micro precision denominators");
    double macro_r = 0;
    for (const auto& p : with_edges) macro_r += p.recall;
    o.expect(std::abs(r.macro_recall - macro_r / with_edges.size()) < 1e-12, "macro includes edge values");
  }
  o.detail = "(0,0)->(1,1), (0,k)->(0,P), (k,0)->(R,0) over 100 trials";
  return o;
}

Outcome end_to_end() {
  Outcome o;
  emfact::testing::TempDir dir;
  save_corpus_jsonl(emfact::testing::synthetic_corpus(163, 2025), dir / "corpus.jsonl");
  RunConfig c;
  c.corpus = dir / "corpus.jsonl";
  c.artifact_dir = dir / "artifacts";
  c.cache_dir = dir / "cache";
  c.mock_script = emfact::testing::fixture("identity_mock.json");
  c.parallelism = 4;
  c.classify_model = "classifier";
  c.edit_model = "editor";
  c.generate_model = "generator";
  c.judge_models = {"judge-a", "judge-b"};
  c.fact_model = "fact-model";
  c.sweep_levels = {EmpathyLevel::high, EmpathyLevel::extreme};
  const std::vector<Stage> all{Stage::ingest, Stage::stats,     Stage::classify, Stage::edit,  Stage::generate,
                               Stage::rank,   Stage::factcheck, Stage::sweep,    Stage::report};

  auto t0 = Clock::now();
  run_pipeline(c, all);
  double cold = seconds_since(t0);
  auto cold_md = read_text(c.artifact_dir / "report.md");
  c.report_format = "json";
  run_pipeline(c, {Stage::report});
  auto cold_json = read_text(c.artifact_dir / "report.json");

  auto doc = read_json(c.artifact_dir / artifact::kFactReport);
  o.expect(doc["reports"].size() == 3, "expected 3 fact reports");
  for (const auto& e : doc["reports"]) {
    auto entry = fact_entry_from_json(e);
    o.expect(entry.report.n_pairs == 163, entry.edited + ": pairs " + std::to_string(entry.report.n_pairs));
    o.expect(entry.report.micro_recall == Ratio{1, 1} && entry.report.micro_precision == Ratio{1, 1},
             entry.edited + ": recall/precision not 1");
    o.expect(entry.report.macro_recall == 1.0 && entry.report.macro_precision == 1.0, entry.edited + ": macro not 1");
  }

  fs::remove_all(c.artifact_dir);
  c.report_format = "md";
  t0 = Clock::now();
  run_pipeline(c, all);
  double warm = seconds_since(t0);
  c.report_format = "json";
  run_pipeline(c, {Stage::report});
  o.expect(read_text(c.artifact_dir / "report.md") == cold_md, "markdown reports differ");
  o.expect(read_text(c.artifact_dir / "report.json") == cold_json, "json reports differ");
  o.expect(cold < 30.0, "cold run " + fmt(cold, 1) + "s");
  o.detail = "163 exchanges, cold " + fmt(cold, 2) + "s, warm " + fmt(warm, 2) + "s, R = P = 1";
  return o;
}

EmpathyJudgment fixture_judgment(int i, EmpathyLabel label) {
  EmpathyJudgment j;
  j.exchange_id = "ex" + std::to_string(i);
  j.comparison = comparison_name("physician:human", "direct_ai:gemini");
  j.side_a = j.exchange_id + "/physician:human";
  j.side_b = j.exchange_id + "/direct_ai:gemini";
  j.judge_model = "qwen3";
  j.orders = {PresentationOrder::ab, PresentationOrder::ba};
  j.order_labels = {label, label};
  j.label = label;
  j.raw_replies = {{"r"}, {"r"}};
  return j;
}

Outcome ranker_aggregation() {
  Outcome o;
  emfact::testing::TempDir dir;
  std::vector<nlohmann::json> js;
  for (int i = 0; i < 163; ++i) js.push_back(to_json(fixture_judgment(i, i < 158 ? EmpathyLabel::b_more : EmpathyLabel::equal)));
  write_jsonl(dir / artifact::kJudgments, js);
  auto report = build_report(dir.path());
  o.expect(report.comparisons.size() == 1, "one comparison row");
  if (!report.comparisons.empty()) {
    const auto& s = report.comparisons[0];
    o.expect(format_pct(s.pct_a_more) == "0.0" && format_pct(s.pct_b_more) == "96.9",
             "cell " + format_pct(s.pct_a_more) + "/" + format_pct(s.pct_b_more));
  }
  auto md = render_markdown(report);
  o.expect(md.find("| physician (A) vs direct_ai (B) | gemini | 0.0 | 96.9 |") != std::string::npos,
           "markdown row missing");

  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> c(0, 500);
  double worst = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<std::size_t> counts{c(rng), c(rng), c(rng), c(rng)};
    if (trial % 3 == 0) counts[trial % 4] = 0;
    if (counts[0] + counts[1] + counts[2] + counts[3] == 0) continue;
    auto p = round_percentages(counts);
    double sum = p[0] + p[1] + p[2] + p[3];
    worst = std::max(worst, std::abs(sum - 100.0));
  }
  o.expect(worst <= 0.1, "percentages sum off by " + fmt(worst));
  o.detail = "0.0/96.9 cell, max |sum - 100| = " + fmt(worst, 6);
  return o;
}

// Independent decision table for the order swap.
EmpathyLabel table(EmpathyLabel ab, EmpathyLabel ba) {
  using L = EmpathyLabel;
  static const L t[4][4] = {
      //            a_more        b_more        equal     unclassified
      /* a_more */ {L::a_more, L::equal, L::equal, L::a_more},
      /* b_more */ {L::equal, L::b_more, L::equal, L::b_more},
      /* equal  */ {L::equal, L::equal, L::equal, L::equal},
      /* uncl.  */ {L::a_more, L::b_more, L::equal, L::unclassified},
  };
  return t[static_cast<int>(ab)][static_cast<int>(ba)];
}

Outcome debiasing() {
  Outcome o;
  auto kit = PromptKit::load(PromptKit::default_dir());
  auto corpus = emfact::testing::synthetic_corpus(200, 31);

  Gateway position(std::make_shared<FunctionBackend>("position", [](const ChatRequest&) { return std::string("Response 1"); }),
                   std::nullopt, emfact::testing::fast_settings(4));
  std::size_t equal = 0;
  for (const auto& ex : corpus) {
    ResponseVariant a = physician_variant(ex);
    ResponseVariant b{ex.id, Provenance{ProvenanceKind::direct_ai, EmpathyLevel::standard}, "gen",
                      ex.patient_question, "v", {}};
    equal += compare_debiased(ex.patient_question, a, b, "j", position, kit).label == EmpathyLabel::equal;
  }
  o.expect(equal == corpus.size(), "position judge equal on " + std::to_string(equal) + "/200");

  Gateway content(load_mock_script(emfact::testing::fixture("identity_mock.json")), std::nullopt,
                  emfact::testing::fast_settings(4));
  std::size_t agree = 0;
  for (const auto& ex : corpus) {
    ResponseVariant a = physician_variant(ex);
    ResponseVariant b{ex.id, Provenance{ProvenanceKind::direct_ai, EmpathyLevel::standard}, "gen",
                      ex.patient_question, "v", {}};
    auto j = compare_debiased(ex.patient_question, a, b, "j", content, kit);
    agree += j.order_labels.size() == 2 && j.order_labels[0] == j.order_labels[1] && j.label == j.order_labels[0];
  }
  o.expect(agree == corpus.size(), "content judge consistent on " + std::to_string(agree) + "/200");

  const EmpathyLabel all[] = {EmpathyLabel::a_more, EmpathyLabel::b_more, EmpathyLabel::equal,
                              EmpathyLabel::unclassified};
  int cells = 0;
  for (auto ab : all)
    for (auto ba : all) {
      ++cells;
      o.expect(combine_orders(ab, ba) == table(ab, ba), "table cell " + to_string(ab) + "/" + to_string(ba));
    }
  o.detail = "position judge 200/200 equal, content judge 200/200 order-stable, " + std::to_string(cells) +
             " table cells";
  return o;
}

Outcome alignment() {
  Outcome o;
  using L = EmpathyLabel;
  std::vector<AlignmentRecord> fixture;
  for (int i = 0; i < 100; ++i)
    fixture.push_back({"e" + std::to_string(i), i % 3 == 0 ? L::equal : L::a_more,
                       i < 57 ? (i % 3 == 0 ? L::equal : L::a_more) : L::b_more});
  double s = alignment_score(fixture);
  o.expect(s == 0.57, "57/100 scored " + fmt(s, 6));

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 2);
  const L labels[] = {L::a_more, L::b_more, L::equal};
  std::vector<EmpathyJudgment> judgments;
  std::vector<HumanLabel> humans;
  for (int i = 0; i < 500; ++i) {
    auto j = fixture_judgment(i, labels[pick(rng)]);
    humans.push_back({j.exchange_id, "self", j.label, ""});
    judgments.push_back(j);
  }
  double self = alignment_score(join_alignment(judgments, humans).records);
  o.expect(self == 1.0, "self alignment " + fmt(self));

  std::vector<AlignmentRecord> random;
  for (int i = 0; i < 10000; ++i) random.push_back({"r" + std::to_string(i), labels[pick(rng)], labels[pick(rng)]});
  double chance = alignment_score(random);
  o.expect(std::abs(chance - 1.0 / 3) <= 0.02, "uniform random " + fmt(chance));
  o.detail = "0.57, self 1.0, uniform random " + fmt(chance, 3);
  return o;
}

Outcome validation_tallies_check() {
  Outcome o;
  std::vector<FlagRecord> flags;
  auto add = [&](FlagDirection d, int flagged, int confirmed) {
    for (int i = 0; i < flagged; ++i)
      flags.push_back({"v" + std::to_string(i), "fact " + std::to_string(i), d, i < confirmed, "reviewer"});
  };
  add(FlagDirection::added, 262, 219);
  add(FlagDirection::not_preserved, 191, 139);
  auto t = validation_tallies(flags);
  std::string added, not_preserved;
  double np_exact = 0;
  for (const auto& x : t) {
    (x.direction == FlagDirection::added ? added : not_preserved) = format_pct(100 * x.precision());
    if (x.direction == FlagDirection::not_preserved) np_exact = 100 * x.precision();
  }
  o.expect(added == "83.6", "added precision " + added);
  o.expect(not_preserved == "72.7", "not_preserved precision " + not_preserved + " (139/191 = " +
                                        text::fixed(np_exact, 3) + "%, which rounds to 72.8, not 72.7)");

  const std::pair<FabricationCategory, std::pair<int, int>> rows[] = {
      {FabricationCategory::follow_up_recommendation, {13, 12}}, {FabricationCategory::clinical_assumption, {7, 7}},
      {FabricationCategory::clinical_inaccuracy, {4, 3}},        {FabricationCategory::unnecessary_advice, {4, 4}},
      {FabricationCategory::unnecessary_doubt_fear, {2, 2}},     {FabricationCategory::false_assurance, {2, 1}}};
  std::vector<ExpertFlag> expert;
  std::vector<MappedFact> mapped;
  int id = 0;
  for (const auto& [cat, counts] : rows)
    for (int i = 0; i < counts.first; ++i) {
      auto rid = "resp" + std::to_string(id++);
      expert.push_back({rid, cat});
      if (i < counts.second) mapped.push_back({rid, cat, "mapped fact"});
    }
  auto cov = category_coverage(expert, mapped);
  auto overall = text::fixed(100 * cov.overall(), 2);
  o.expect(overall == "90.62", "coverage " + overall);
  o.expect(cov.total == 32 && cov.detected == 29, "coverage counts");
  o.detail = "added " + added + "%, not preserved " + not_preserved + "%, coverage " + overall + "%";
  return o;
}

Outcome parsers() {
  Outcome o;
  auto facts = split_facts(
      "The chest X-ray shows pneumonia. // The pneumonia is in the right lung. // Start antibiotics. // Take "
      "antibiotics twice daily. // Continue antibiotics for 7 days.");
  o.expect(facts.size() == 5, "example yields " + std::to_string(facts.size()) + " facts");
  o.expect(parse_entailment_reply("{\"entailment_prediction\": 1}") == 1, "bare JSON");
  o.expect(parse_entailment_reply("```json\n{\"entailment_prediction\": 0}\n```") == 0, "fenced JSON");
  o.expect(parse_entailment_reply("```\n{\"entailment_prediction\": 1}\n```") == 1, "fenced JSON without language");
  for (auto garbage : {"", "entailed", "{\"entailment_prediction\": \"maybe\"}", "{{{", "prediction: 1"})
    o.expect(!parse_entailment_reply(garbage), std::string("garbage accepted: ") + garbage);

  auto kit = PromptKit::load(PromptKit::default_dir());
  Gateway gw(std::make_shared<FunctionBackend>("garbage", [](const ChatRequest&) { return std::string("not sure"); }),
             std::nullopt, emfact::testing::fast_settings(1));
  auto v = check_entailment("premise", "hypothesis", gw, kit, "m");
  o.expect(v.prediction == 0 && v.parse_failed, "garbage reply must fall back to 0 and be marked");
  o.detail = std::to_string(facts.size()) + " facts; bare and fenced accepted; garbage -> 0 (flagged)";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "metric arithmetic", metric_arithmetic},
      {2, "rate identities", identities},
      {3, "micro/macro collapse", micro_macro},
      {4, "edge rules", edge_rules},
      {5, "end-to-end determinism", end_to_end},
      {6, "ranker aggregation", ranker_aggregation},
      {7, "order debiasing", debiasing},
      {8, "alignment", alignment},
      {9, "validation tallies", validation_tallies_check},
      {10, "parsers", parsers},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.failures.push_back(std::string("exception: ") + e.what());
    }
    std::printf("%s %2d %-24s %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str());
    for (const auto& f : out.failures) std::printf("       - %s\n", f.c_str());
    failed += !out.pass;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
