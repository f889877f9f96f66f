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

#include "emfact/emranker.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include "emfact/editor.hpp"
#include "emfact/error.hpp"
#include "emfact/gateway.hpp"
#include "emfact/prompts.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RawJudgeLabel l) {
  switch (l) {
    case RawJudgeLabel::r1_more: return "r1_more";
    case RawJudgeLabel::r2_more: return "r2_more";
    case RawJudgeLabel::equal: return "equal";
    case RawJudgeLabel::unclassified: return "unclassified";
  }
  return "unclassified";
}

std::string to_string(EmpathyLabel l) {
  switch (l) {
    case EmpathyLabel::a_more: return "a_more";
    case EmpathyLabel::b_more: return "b_more";
    case EmpathyLabel::equal: return "equal";
    case EmpathyLabel::unclassified: return "unclassified";
  }
  return "unclassified";
}

std::string to_string(PresentationOrder o) { return o == PresentationOrder::ab ? "ab" : "ba"; }

EmpathyLabel parse_empathy_label(const std::string& s) {
  if (s == "a_more") return EmpathyLabel::a_more;
  if (s == "b_more") return EmpathyLabel::b_more;
  if (s == "equal") return EmpathyLabel::equal;
  if (s == "unclassified") return EmpathyLabel::unclassified;
  throw ArtifactError("unknown empathy label '" + s + "'");
}

PresentationOrder parse_presentation_order(const std::string& s) {
  if (s == "ab") return PresentationOrder::ab;
  if (s == "ba") return PresentationOrder::ba;
  throw ArtifactError("unknown presentation order '" + s + "'");
}

std::optional<RawJudgeLabel> parse_judge_reply(const std::string& reply) {
  auto t = text::trim(reply);
  if (t == "1") return RawJudgeLabel::r1_more;
  if (t == "2") return RawJudgeLabel::r2_more;
  auto lower = text::to_lower(t);
  if (lower.find("equal") != std::string::npos || lower.find("both responses") != std::string::npos)
    return RawJudgeLabel::equal;
  bool one = lower.find("response 1") != std::string::npos;
  bool two = lower.find("response 2") != std::string::npos;
  if (one && !two) return RawJudgeLabel::r1_more;
  if (two && !one) return RawJudgeLabel::r2_more;
  return std::nullopt;
}

PairJudgment judge_pair(const std::string& patient_question, const std::string& r1, const std::string& r2,
                        const std::string& judge_model, Gateway& gateway, const PromptKit& prompts) {
  if (text::trim(r1).empty() || text::trim(r2).empty()) throw Error("judge_pair needs two nonempty responses");
  auto prompt = prompts.render(TemplateName::emrank3, {{"PQ", patient_question}, {"R1", r1}, {"R2", r2}});
  PairJudgment out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto req = gateway.make_request(judge_model, "rank", prompt);
    req.attempt = attempt;
    auto reply = gateway.complete(req).text;
    out.raw_replies.push_back(reply);
    if (auto label = parse_judge_reply(reply)) {
      out.label = *label;
      return out;
    }
  }
  out.label = RawJudgeLabel::unclassified;
  return out;
}

EmpathyLabel orient(RawJudgeLabel raw, PresentationOrder order) {
  switch (raw) {
    case RawJudgeLabel::r1_more: return order == PresentationOrder::ab ? EmpathyLabel::a_more : EmpathyLabel::b_more;
    case RawJudgeLabel::r2_more: return order == PresentationOrder::ab ? EmpathyLabel::b_more : EmpathyLabel::a_more;
    case RawJudgeLabel::equal: return EmpathyLabel::equal;
    case RawJudgeLabel::unclassified: return EmpathyLabel::unclassified;
  }
  return EmpathyLabel::unclassified;
}

EmpathyLabel combine_orders(EmpathyLabel ab, EmpathyLabel ba) {
  if (ab == EmpathyLabel::unclassified) return ba;
  if (ba == EmpathyLabel::unclassified) return ab;
  if (ab == ba) return ab;
  return EmpathyLabel::equal;
}

std::string comparison_name(const std::string& a_spec, const std::string& b_spec) { return a_spec + " vs " + b_spec; }

EmpathyJudgment compare_debiased(const std::string& patient_question, const ResponseVariant& a,
                                 const ResponseVariant& b, const std::string& judge_model, Gateway& gateway,
                                 const PromptKit& prompts, bool debias) {
  if (a.exchange_id != b.exchange_id)
    throw Error("compared variants belong to different exchanges: " + a.ref() + ", " + b.ref());
  EmpathyJudgment j;
  j.exchange_id = a.exchange_id;
  j.comparison = comparison_name(a.spec().str(), b.spec().str());
  j.side_a = a.ref();
  j.side_b = b.ref();
  j.judge_model = judge_model;

  auto ab = judge_pair(patient_question, a.text, b.text, judge_model, gateway, prompts);
  j.orders.push_back(PresentationOrder::ab);
  j.order_labels.push_back(orient(ab.label, PresentationOrder::ab));
  j.raw_replies.push_back(ab.raw_replies);
  if (!debias) {
    j.label = j.order_labels.front();
    return j;
  }
  auto ba = judge_pair(patient_question, b.text, a.text, judge_model, gateway, prompts);
  j.orders.push_back(PresentationOrder::ba);
  j.order_labels.push_back(orient(ba.label, PresentationOrder::ba));
  j.raw_replies.push_back(ba.raw_replies);
  j.label = combine_orders(j.order_labels[0], j.order_labels[1]);
  return j;
}

EmpathyLabel majority_label(const std::vector<EmpathyLabel>& votes) {
  std::map<EmpathyLabel, std::size_t> counts;
  for (auto v : votes)
    if (v != EmpathyLabel::unclassified) ++counts[v];
  if (counts.empty()) return EmpathyLabel::unclassified;
  std::size_t best = 0;
  for (const auto& [_, c] : counts) best = std::max(best, c);
  std::vector<EmpathyLabel> leaders;
  for (const auto& [l, c] : counts)
    if (c == best) leaders.push_back(l);
  return leaders.size() == 1 ? leaders.front() : EmpathyLabel::equal;
}

EmpathyLabel ensemble_judge(const std::string& patient_question, const ResponseVariant& a, const ResponseVariant& b,
                            const std::vector<std::string>& judge_models, Gateway& gateway, const PromptKit& prompts) {
  if (judge_models.empty()) throw ConfigError("ensemble judging needs at least one judge model");
  std::vector<EmpathyLabel> votes;
  for (const auto& m : judge_models) votes.push_back(compare_debiased(patient_question, a, b, m, gateway, prompts).label);
  return majority_label(votes);
}

json to_json(const EmpathyJudgment& j) {
  json orders = json::array();
  for (std::size_t i = 0; i < j.orders.size(); ++i)
    orders.push_back({{"order", to_string(j.orders[i])},
                      {"label", to_string(j.order_labels[i])},
                      {"raw_replies", j.raw_replies[i]}});
  std::string raw = j.raw_replies.empty() || j.raw_replies.front().empty() ? "" : j.raw_replies.front().back();
  return {{"exchange_id", j.exchange_id}, {"comparison", j.comparison}, {"side_a", j.side_a},
          {"side_b", j.side_b},           {"judge_model", j.judge_model}, {"label", to_string(j.label)},
          {"raw_reply", raw},             {"orders", orders}};
}

EmpathyJudgment judgment_from_json(const json& in) {
  try {
    EmpathyJudgment j;
    j.exchange_id = in.at("exchange_id").get<std::string>();
    j.comparison = in.at("comparison").get<std::string>();
    j.side_a = in.value("side_a", std::string());
    j.side_b = in.value("side_b", std::string());
    j.judge_model = in.at("judge_model").get<std::string>();
    j.label = parse_empathy_label(in.at("label").get<std::string>());
    if (in.contains("orders"))
      for (const auto& o : in["orders"]) {
        j.orders.push_back(parse_presentation_order(o.at("order").get<std::string>()));
        j.order_labels.push_back(parse_empathy_label(o.at("label").get<std::string>()));
        j.raw_replies.push_back(o.value("raw_replies", std::vector<std::string>{}));
      }
    return j;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed judgment record: ") + e.what());
  }
}

std::vector<double> round_percentages(const std::vector<std::size_t>& counts) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<double> out(counts.size(), 0.0);
  if (n == 0) return out;
  // Work in tenths of a percent: 1000 units in total.
  std::vector<std::size_t> units(counts.size());
  std::vector<std::size_t> rem(counts.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    units[i] = counts[i] * 1000 / n;
    rem[i] = counts[i] * 1000 % n;
    assigned += units[i];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return rem[x] > rem[y]; });
  for (std::size_t k = 0; assigned < 1000; ++k, ++assigned) ++units[order[k]];
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(units[i]) / 10.0;
  return out;
}

namespace {
std::string model_of_ref(const std::string& ref) {
  auto colon = ref.rfind(':');
  return colon == std::string::npos ? std::string() : ref.substr(colon + 1);
}
}  // namespace

ComparisonSummary summarize(const std::vector<EmpathyJudgment>& judgments, const std::string& a_name,
                            const std::string& b_name) {
  if (judgments.empty()) throw Error("cannot summarize an empty judgment list");
  ComparisonSummary s;
  s.comparison = judgments.front().comparison;
  s.judge_model = judgments.front().judge_model;
  s.a_name = a_name;
  s.b_name = b_name;
  for (const auto& j : judgments) {
    if (j.comparison != s.comparison || j.judge_model != s.judge_model)
      throw Error("summarize: judgments mix comparisons or judges (" + j.comparison + " / " + j.judge_model + ")");
    switch (j.label) {
      case EmpathyLabel::a_more: ++s.count_a_more; break;
      case EmpathyLabel::b_more: ++s.count_b_more; break;
      case EmpathyLabel::equal: ++s.count_equal; break;
      case EmpathyLabel::unclassified: ++s.count_unclassified; break;
    }
  }
  s.n = judgments.size();
  auto model_a = model_of_ref(judgments.front().side_a);
  auto model_b = model_of_ref(judgments.front().side_b);
  s.edit_model = model_b != kHumanModel ? model_b : model_a;
  auto pct = round_percentages({s.count_a_more, s.count_b_more, s.count_equal, s.count_unclassified});
  s.pct_a_more = pct[0];
  s.pct_b_more = pct[1];
  s.pct_equal = pct[2];
  s.pct_unclassified = pct[3];
  return s;
}

json to_json(const ComparisonSummary& s) {
  return {{"comparison", s.comparison},
          {"a", s.a_name},
          {"b", s.b_name},
          {"edit_model", s.edit_model},
          {"judge_model", s.judge_model},
          {"n", s.n},
          {"counts",
           {{"a_more", s.count_a_more}, {"b_more", s.count_b_more}, {"equal", s.count_equal},
            {"unclassified", s.count_unclassified}}},
          {"pct_a_more", s.pct_a_more},
          {"pct_b_more", s.pct_b_more},
          {"pct_equal", s.pct_equal},
          {"pct_unclassified", s.pct_unclassified}};
}

ComparisonSummary summary_from_json(const json& j) {
  try {
    ComparisonSummary s;
    s.comparison = j.at("comparison").get<std::string>();
    s.a_name = j.at("a").get<std::string>();
    s.b_name = j.at("b").get<std::string>();
    s.edit_model = j.at("edit_model").get<std::string>();
    s.judge_model = j.at("judge_model").get<std::string>();
    s.n = j.at("n").get<std::size_t>();
    const auto& c = j.at("counts");
    s.count_a_more = c.at("a_more").get<std::size_t>();
    s.count_b_more = c.at("b_more").get<std::size_t>();
    s.count_equal = c.at("equal").get<std::size_t>();
    s.count_unclassified = c.at("unclassified").get<std::size_t>();
    s.pct_a_more = j.at("pct_a_more").get<double>();
    s.pct_b_more = j.at("pct_b_more").get<double>();
    s.pct_equal = j.at("pct_equal").get<double>();
    s.pct_unclassified = j.at("pct_unclassified").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed comparison summary: ") + e.what());
  }
}

double alignment_score(const std::vector<AlignmentRecord>& records) {
  if (records.empty()) throw Error("alignment score of an empty record list");
  std::size_t matches = 0;
  for (const auto& r : records) {
    if (r.human_label == EmpathyLabel::unclassified || r.model_label == EmpathyLabel::unclassified)
      throw Error("alignment records must carry a_more/b_more/equal labels (" + r.exchange_id + ")");
    if (r.human_label == r.model_label) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(records.size());
}

json to_json(const HumanLabel& h) {
  json j = {{"exchange_id", h.exchange_id}, {"annotator_id", h.annotator_id}, {"label", to_string(h.label)}};
  if (!h.comparison.empty()) j["comparison"] = h.comparison;
  return j;
}

HumanLabel human_label_from_json(const json& j) {
  try {
    HumanLabel h;
    h.exchange_id = j.at("exchange_id").get<std::string>();
    h.annotator_id = j.at("annotator_id").get<std::string>();
    h.label = parse_empathy_label(j.at("label").get<std::string>());
    if (h.label == EmpathyLabel::unclassified) throw ArtifactError("human labels must be a_more, b_more or equal");
    h.comparison = j.value("comparison", std::string());
    return h;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed human label record: ") + e.what());
  }
}

std::vector<std::pair<std::string, EmpathyLabel>> aggregate_human_labels(const std::vector<HumanLabel>& labels) {
  std::map<std::string, std::vector<EmpathyLabel>> by_item;
  for (const auto& h : labels) by_item[h.exchange_id].push_back(h.label);
  std::vector<std::pair<std::string, EmpathyLabel>> out;
  for (const auto& [id, votes] : by_item) out.emplace_back(id, majority_label(votes));
  return out;
}

AlignmentJoin join_alignment(const std::vector<EmpathyJudgment>& judgments, const std::vector<HumanLabel>& labels) {
  std::map<std::string, EmpathyLabel> human;
  for (const auto& [id, l] : aggregate_human_labels(labels)) human[id] = l;
  AlignmentJoin out;
  for (const auto& j : judgments) {
    auto it = human.find(j.exchange_id);
    if (it == human.end()) {
      ++out.skipped_unlabeled;
      continue;
    }
    if (j.label == EmpathyLabel::unclassified) {
      ++out.skipped_unclassified;
      continue;
    }
    out.records.push_back({j.exchange_id, it->second, j.label});
  }
  return out;
}

namespace {
template <typename T, typename Fn>
std::vector<T> load_jsonl(const fs::path& path, Fn parse) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ArtifactError& e) {
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}
}  // namespace

std::vector<EmpathyJudgment> load_judgments(const fs::path& path) {
  return load_jsonl<EmpathyJudgment>(path, judgment_from_json);
}

std::vector<HumanLabel> load_human_labels(const fs::path& path) {
  return load_jsonl<HumanLabel>(path, human_label_from_json);
}

}  // namespace emfact
