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

#include <numeric>
#include <random>

#include "emfact/editor.hpp"
#include "emfact/emranker.hpp"
#include "emfact/gateway.hpp"
#include "helpers.hpp"

using namespace emfact;
using L = EmpathyLabel;

namespace {

ResponseVariant variant(const std::string& ex, const std::string& spec, const std::string& text) {
  auto s = VariantSpec::parse(spec);
  return {ex, s.provenance, s.model_id, text, "v", {}};
}

EmpathyJudgment judgment(const std::string& ex, L label, const std::string& judge = "j") {
  EmpathyJudgment j;
  j.exchange_id = ex;
  j.comparison = comparison_name("physician:human", "direct_ai:gen");
  j.side_a = ex + "/physician:human";
  j.side_b = ex + "/direct_ai:gen";
  j.judge_model = judge;
  j.label = label;
  return j;
}

// Written out from the decision table, independent of the implementation.
L expected_combination(L ab, L ba) {
  if (ab == L::unclassified) return ba;
  if (ba == L::unclassified) return ab;
  if (ab == ba) return ab;
  return L::equal;
}

}  // namespace

TEST_CASE("judge reply parsing") {
  CHECK(parse_judge_reply("Response 1") == RawJudgeLabel::r1_more);
  CHECK(parse_judge_reply("response 2 is more empathetic.") == RawJudgeLabel::r2_more);
  CHECK(parse_judge_reply(" 2 ") == RawJudgeLabel::r2_more);
  CHECK(parse_judge_reply("They are equally empathetic") == RawJudgeLabel::equal);
  CHECK(parse_judge_reply("Both responses show empathy") == RawJudgeLabel::equal);
  CHECK_FALSE(parse_judge_reply("they're both fine"));
  CHECK_FALSE(parse_judge_reply("Response 1 and Response 2 differ"));
  CHECK_FALSE(parse_judge_reply(""));
}

TEST_CASE("orientation") {
  CHECK(orient(RawJudgeLabel::r1_more, PresentationOrder::ab) == L::a_more);
  CHECK(orient(RawJudgeLabel::r1_more, PresentationOrder::ba) == L::b_more);
  CHECK(orient(RawJudgeLabel::r2_more, PresentationOrder::ba) == L::a_more);
  CHECK(orient(RawJudgeLabel::equal, PresentationOrder::ba) == L::equal);
  CHECK(orient(RawJudgeLabel::unclassified, PresentationOrder::ab) == L::unclassified);
}

TEST_CASE("combine_orders over all 16 pairs") {
  const L all[] = {L::a_more, L::b_more, L::equal, L::unclassified};
  for (L ab : all)
    for (L ba : all) {
      CAPTURE(to_string(ab));
      CAPTURE(to_string(ba));
      CHECK(combine_orders(ab, ba) == expected_combination(ab, ba));
      CHECK(combine_orders(ab, ba) == combine_orders(ba, ab));
    }
}

TEST_CASE("a judge that always picks the first position yields all equal") {
  Gateway gw(std::make_shared<FunctionBackend>("first", [](const ChatRequest&) { return std::string("Response 1"); }),
             std::nullopt, emfact::testing::fast_settings(1));
  auto kit = PromptKit::load(PromptKit::default_dir());
  for (int i = 0; i < 20; ++i) {
    auto ex = "e" + std::to_string(i);
    auto j = compare_debiased("q", variant(ex, "physician", "a" + std::to_string(i)),
                              variant(ex, "direct_ai:gen", "bb"), "judge", gw, kit);
    CHECK(j.label == L::equal);
    REQUIRE(j.order_labels.size() == 2);
    CHECK(j.order_labels[0] == L::a_more);
    CHECK(j.order_labels[1] == L::b_more);
  }
  auto single = compare_debiased("q", variant("x", "physician", "a"), variant("x", "direct_ai:gen", "b"), "judge", gw,
                                 kit, false);
  CHECK(single.orders.size() == 1);
  CHECK(single.label == L::a_more);
}

TEST_CASE("ambiguous replies are retried once") {
  Gateway gw(std::make_shared<FunctionBackend>("fn",
                                               [](const ChatRequest& r) {
                                                 return std::string(r.attempt == 0 ? "hmm" : "Response 2");
                                               }),
             std::nullopt, emfact::testing::fast_settings(1));
  auto kit = PromptKit::load(PromptKit::default_dir());
  auto p = judge_pair("q", "a", "b", "j", gw, kit);
  CHECK(p.label == RawJudgeLabel::r2_more);
  CHECK(p.raw_replies == std::vector<std::string>{"hmm", "Response 2"});

  Gateway never(std::make_shared<FunctionBackend>("fn", [](const ChatRequest&) { return std::string("hmm"); }),
                std::nullopt, emfact::testing::fast_settings(1));
  auto u = judge_pair("q", "a", "b", "j", never, kit);
  CHECK(u.label == RawJudgeLabel::unclassified);
  CHECK(u.raw_replies.size() == 2);
}

TEST_CASE("percentages sum to 100 and stay within 0.1") {
  CHECK(round_percentages({0, 158, 5, 0}) == std::vector<double>{0.0, 96.9, 3.1, 0.0});
  std::mt19937 rng(5);
  std::uniform_int_distribution<std::size_t> d(0, 400);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> c{d(rng), d(rng), d(rng), d(rng)};
    auto n = std::accumulate(c.begin(), c.end(), std::size_t{0});
    if (n == 0) continue;
    auto p = round_percentages(c);
    double sum = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(std::abs(p[i] - 100.0 * c[i] / n) <= 0.1 + 1e-9);
      CHECK(std::abs(p[i] * 10 - std::round(p[i] * 10)) < 1e-9);
      sum += p[i];
    }
    CHECK(std::abs(sum - 100.0) < 1e-9);
  }
}

TEST_CASE("summaries") {
  std::vector<EmpathyJudgment> js;
  for (int i = 0; i < 158; ++i) js.push_back(judgment("e" + std::to_string(i), L::b_more));
  for (int i = 158; i < 163; ++i) js.push_back(judgment("e" + std::to_string(i), L::equal));
  auto s = summarize(js, "Physician", "Direct AI");
  CHECK(s.n == 163);
  CHECK(s.pct_a_more == 0.0);
  CHECK(s.pct_b_more == 96.9);
  CHECK(s.edit_model == "gen");
  auto back = summary_from_json(to_json(s));
  CHECK(back.pct_b_more == s.pct_b_more);
  CHECK(back.count_equal == 5);
  js.push_back(judgment("x", L::equal, "other-judge"));
  CHECK_THROWS_AS(summarize(js, "a", "b"), Error);
}

TEST_CASE("majority and human aggregation") {
  CHECK(majority_label({L::a_more, L::a_more, L::equal}) == L::a_more);
  CHECK(majority_label({L::a_more, L::b_more}) == L::equal);
  CHECK(majority_label({L::unclassified, L::b_more}) == L::b_more);
  CHECK(majority_label({L::unclassified}) == L::unclassified);
  CHECK(majority_label({}) == L::unclassified);

  std::vector<HumanLabel> labels{{"e2", "h1", L::a_more, ""}, {"e2", "h2", L::a_more, ""},
                                 {"e2", "h3", L::equal, ""},  {"e1", "h1", L::b_more, ""},
                                 {"e1", "h2", L::a_more, ""}};
  auto agg = aggregate_human_labels(labels);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0] == std::pair<std::string, L>{"e1", L::equal});
  CHECK(agg[1] == std::pair<std::string, L>{"e2", L::a_more});
}

TEST_CASE("alignment") {
  std::vector<AlignmentRecord> r;
  for (int i = 0; i < 100; ++i) r.push_back({"e" + std::to_string(i), L::a_more, i < 57 ? L::a_more : L::b_more});
  CHECK(alignment_score(r) == doctest::Approx(0.57));

  std::vector<EmpathyJudgment> js{judgment("e1", L::a_more), judgment("e2", L::unclassified),
                                  judgment("e3", L::equal)};
  std::vector<HumanLabel> hs{{"e1", "h", L::a_more, ""}, {"e2", "h", L::b_more, ""}};
  auto join = join_alignment(js, hs);
  CHECK(join.records.size() == 1);
  CHECK(join.skipped_unclassified == 1);
  CHECK(join.skipped_unlabeled == 1);
  CHECK(alignment_score(join.records) == 1.0);
}

TEST_CASE("judgment and label records round-trip") {
  auto j = judgment("e1", L::b_more);
  j.orders = {PresentationOrder::ab, PresentationOrder::ba};
  j.order_labels = {L::b_more, L::equal};
  j.raw_replies = {{"Response 2"}, {"hmm", "equal"}};
  auto back = judgment_from_json(to_json(j));
  CHECK(to_json(back) == to_json(j));
  HumanLabel h{"e1", "ann", L::equal, "x vs y"};
  CHECK(to_json(human_label_from_json(to_json(h))) == to_json(h));
  CHECK_THROWS(parse_empathy_label("sideways"));
}
