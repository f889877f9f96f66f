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

#include <doctest.h>

#include <algorithm>
#include <random>

#include "emfact/editor.hpp"
#include "emfact/factcheck.hpp"
#include "emfact/gateway.hpp"
#include "helpers.hpp"

using namespace emfact;

namespace {

// Linear-interpolated percentile on a sorted copy.
double oracle_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

TEST_CASE("split_facts") {
  CHECK(split_facts("A // a // A ") == std::vector<std::string>{"A"});
  CHECK(split_facts("A // a // A ", false) == std::vector<std::string>{"A", "a", "A"});
  CHECK(split_facts(" //  // x//y ") == std::vector<std::string>{"x", "y"});
  CHECK(split_facts("").empty());
  auto example = split_facts(
      "The chest X-ray shows pneumonia. // The pneumonia is in the right lung. // Start antibiotics. // Take "
      "antibiotics twice daily. // Continue antibiotics for 7 days.");
  CHECK(example.size() == 5);
  CHECK(example.back() == "Continue antibiotics for 7 days.");
}

TEST_CASE("refusal detection") {
  CHECK(looks_like_refusal("I'm sorry, I cannot help with that."));
  CHECK(looks_like_refusal("None"));
  CHECK(looks_like_refusal("There are no medical facts in this response."));
  CHECK_FALSE(looks_like_refusal("None of the results are concerning."));
  CHECK_FALSE(looks_like_refusal("I cannot rule out infection. // Take fluids."));
}

TEST_CASE("entailment reply parsing") {
  CHECK(parse_entailment_reply("{\"entailment_prediction\": 1}") == 1);
  CHECK(parse_entailment_reply("```json\n{\"entailment_prediction\": 0}\n```") == 0);
  CHECK(parse_entailment_reply("Here you go: {'entailment_prediction': 1} done") == 1);
  CHECK(parse_entailment_reply("{\"other\": {\"x\": 2}} then {\"entailment_prediction\": 1}") == 1);
  CHECK_FALSE(parse_entailment_reply("yes it is entailed"));
  CHECK_FALSE(parse_entailment_reply("{\"entailment_prediction\": 3}"));
  CHECK_FALSE(parse_entailment_reply("{broken"));
}

TEST_CASE("unparseable entailment falls back to 0 after one retry") {
  int calls = 0;
  Gateway gw(std::make_shared<FunctionBackend>("fn",
                                               [&](const ChatRequest&) {
                                                 ++calls;
                                                 return std::string("no idea");
                                               }),
             std::nullopt, emfact::testing::fast_settings(1));
  auto kit = PromptKit::load(PromptKit::default_dir());
  auto v = check_entailment("p", "h", gw, kit, "m");
  CHECK(v.prediction == 0);
  CHECK(v.parse_failed);
  CHECK(calls == 2);
}

TEST_CASE("score_counts edge rules") {
  auto both_empty = score_counts(0, 0, 0, 0);
  CHECK(both_empty.recall == 1.0);
  CHECK(both_empty.precision == 1.0);
  auto no_original = score_counts(0, 0, 3, 1);
  CHECK(no_original.recall == 0.0);
  CHECK(no_original.precision == doctest::Approx(1.0 / 3));
  auto no_edit = score_counts(4, 0, 0, 0);
  CHECK(no_edit.recall == 0.0);
  CHECK(no_edit.precision == 0.0);
  CHECK(score_counts(0, 0, 3, 1, EdgeRule::vacuous).recall == 1.0);
  CHECK(score_counts(4, 0, 0, 0, EdgeRule::vacuous).precision == 1.0);
  CHECK_THROWS(score_counts(2, 3, 0, 0));
  CHECK_THROWS(score_counts(-1, 0, 0, 0));
}

TEST_CASE("report_from_flow matches the hand-computed rates") {
  auto r = report_from_flow(934, 855, 1194, 1081);
  CHECK(r.micro_recall == Ratio{855, 934});
  CHECK(r.micro_precision == Ratio{1081, 1194});
  CHECK(r.flow.new_facts == 113);
  CHECK(r.loss_rate == Ratio{79, 934});
  CHECK(r.hallucination_rate == Ratio{113, 1194});
  CHECK(std::round(r.micro_recall.value() * 1000) == 915);
  CHECK(std::round(r.micro_precision.value() * 1000) == 905);
  CHECK(std::round(r.loss_rate.value() * 1000) == 85);
  CHECK(std::round(r.hallucination_rate.value() * 1000) == 95);
}

TEST_CASE("micro scores equal a flat concatenation of fact verdicts") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> n(0, 12);
  std::bernoulli_distribution entailed(0.8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PairFactReport> pairs;
    std::vector<bool> flat_recall, flat_precision;
    for (int i = 0; i < 300; ++i) {
      int o = n(rng), e = n(rng), pres = 0, gr = 0;
      for (int k = 0; k < o; ++k) {
        bool b = entailed(rng);
        flat_recall.push_back(b);
        pres += b;
      }
      for (int k = 0; k < e; ++k) {
        bool b = entailed(rng);
        flat_precision.push_back(b);
        gr += b;
      }
      pairs.push_back(score_counts(o, pres, e, gr));
    }
    auto r = score_corpus(pairs);
    auto count = [](const std::vector<bool>& v) { return std::count(v.begin(), v.end(), true); };
    CHECK(r.micro_recall.num == count(flat_recall));
    CHECK(r.micro_recall.den == static_cast<std::int64_t>(flat_recall.size()));
    CHECK(r.micro_precision.num == count(flat_precision));
    CHECK(r.micro_precision.den == static_cast<std::int64_t>(flat_precision.size()));
    // Exact identities.
    CHECK(r.flow.new_facts == r.flow.edited - r.flow.grounded);
    CHECK(r.loss_rate == Ratio{r.flow.original - r.flow.preserved, r.flow.original});
    CHECK(r.hallucination_rate == Ratio{r.flow.new_facts, r.flow.edited});
    auto serial = score_corpus_serial(pairs);
    CHECK(serial.macro_recall == r.macro_recall);
    CHECK(serial.macro_precision == r.macro_precision);
  }
}

TEST_CASE("micro equals macro when every pair has the same fact counts") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    int o = 1 + trial % 7, e = 1 + trial % 5;
    std::vector<PairFactReport> pairs;
    for (int i = 0; i < 200; ++i) {
      std::uniform_int_distribution<int> po(0, o), pe(0, e);
      pairs.push_back(score_counts(o, po(rng), e, pe(rng)));
    }
    auto r = score_corpus(pairs);
    CHECK(r.micro_recall.value() == doctest::Approx(r.macro_recall).epsilon(1e-12));
    CHECK(r.micro_precision.value() == doctest::Approx(r.macro_precision).epsilon(1e-12));
  }
}

TEST_CASE("macro scores apply the edge rule per pair") {
  std::vector<PairFactReport> pairs{score_counts(0, 0, 0, 0), score_counts(2, 1, 2, 2), score_counts(0, 0, 2, 0)};
  auto lit = score_corpus(pairs);
  CHECK(lit.macro_recall == doctest::Approx((1.0 + 0.5 + 0.0) / 3));
  CHECK(lit.micro_recall == Ratio{1, 2});
  CHECK(lit.empty_original_pairs == 2);
  auto vac = score_corpus(pairs, EdgeRule::vacuous);
  CHECK(vac.macro_recall == doctest::Approx((1.0 + 0.5 + 1.0) / 3));
  CHECK(f1(0.5, 1.0) == doctest::Approx(2.0 / 3));
  CHECK(f1(0.0, 0.0) == 0.0);
}

TEST_CASE("corpus report JSON round-trip") {
  std::vector<PairFactReport> pairs{score_counts(3, 2, 4, 3), score_counts(5, 5, 5, 4)};
  auto r = score_corpus(pairs);
  auto back = corpus_report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("length bands group pairs like a manual filter") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> len(20, 800);
  std::uniform_int_distribution<int> n(0, 10);
  std::vector<PairFactReport> pairs;
  std::map<std::string, double> lengths;
  for (int i = 0; i < 400; ++i) {
    int o = n(rng), e = n(rng);
    auto p = score_counts(o, o / 2, e, e / 2);
    p.exchange_id = "e" + std::to_string(i);
    lengths[p.exchange_id] = i == 0 ? 231.0 : i == 1 ? 393.0 : len(rng);
    pairs.push_back(p);
  }
  auto a = fact_ratio_analysis(pairs, lengths, kReferenceTertiles);
  REQUIRE(a.bands.size() == 3);
  std::size_t excluded = 0;
  for (const auto& b : a.bands) {
    std::vector<double> prec, ratio;
    std::size_t ex = 0;
    for (const auto& p : pairs) {
      double l = lengths[p.exchange_id];
      auto band = l < 231.0 ? LengthBand::short_ : l <= 393.0 ? LengthBand::medium : LengthBand::long_;
      if (band != b.band) continue;
      prec.push_back(p.precision);
      if (p.n_original == 0) ++ex;
      else ratio.push_back(double(p.n_edited) / double(p.n_original));
    }
    CHECK(b.n_pairs == prec.size());
    CHECK(b.ratio_excluded == ex);
    excluded += ex;
    CHECK(b.precision.median == doctest::Approx(oracle_percentile(prec, 0.5)));
    CHECK(b.fact_ratio.q1 == doctest::Approx(oracle_percentile(ratio, 0.25)));
    CHECK(b.fact_ratio.q3 == doctest::Approx(oracle_percentile(ratio, 0.75)));
  }
  CHECK(a.ratio_excluded == excluded);
  CHECK(a.fact_ratios.size() == pairs.size());
  lengths.erase("e5");
  CHECK_THROWS(fact_ratio_analysis(pairs, lengths, kReferenceTertiles));
}

TEST_CASE("identity edits score perfect recall and precision") {
  emfact::testing::TempDir dir;
  auto gw = emfact::testing::identity_gateway(dir / "cache", 2);
  auto kit = PromptKit::load(PromptKit::default_dir());
  auto corpus = emfact::testing::synthetic_corpus(12, 4);
  VariantStore store;
  for (const auto& ex : corpus) {
    store.upsert(physician_variant(ex), true);
    if (ex.id != "ex1011") store.upsert(edit_response(ex, EditMode::simple, EmpathyLevel::standard, *gw, kit, "m"), true);
  }
  FactcheckOptions opt;
  opt.model = "fx";
  auto run = run_factcheck(corpus, store, VariantSpec::parse("physician"), VariantSpec::parse("edited_simple:m"), *gw,
                           kit, opt);
  CHECK(run.pairs.size() == 11);
  CHECK(run.missing == std::vector<std::string>{"ex1011"});
  CHECK(run.report.micro_recall == Ratio{1, 1});
  CHECK(run.report.micro_precision == Ratio{1, 1});
  CHECK(run.report.flow.new_facts == 0);
  for (const auto& p : run.pairs) CHECK(p.n_original == p.n_edited);
  CHECK(run.verdicts.size() == static_cast<std::size_t>(run.report.flow.original + run.report.flow.edited));
}

TEST_CASE("fact set records round-trip") {
  AtomicFactSet f{"e1/physician:human", {"a", "b"}, "fx", "a // b", false};
  CHECK(to_json(fact_set_from_json(to_json(f))) == to_json(f));
  EntailmentVerdict v{"e1/x:y", "a", 1, false, "{}"};
  CHECK(to_json(verdict_from_json(to_json(v))) == to_json(v));
  CHECK(parse_edge_rule(to_string(EdgeRule::vacuous)) == EdgeRule::vacuous);
}
