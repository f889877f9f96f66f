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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emfact {

class Gateway;
class PromptKit;
struct ResponseVariant;

// Judge verdict in presentation terms.
enum class RawJudgeLabel { r1_more, r2_more, equal, unclassified };
// Judge verdict in comparison terms (side A vs side B).
enum class EmpathyLabel { a_more, b_more, equal, unclassified };
enum class PresentationOrder { ab, ba };

std::string to_string(RawJudgeLabel l);
std::string to_string(EmpathyLabel l);
std::string to_string(PresentationOrder o);
EmpathyLabel parse_empathy_label(const std::string& s);
PresentationOrder parse_presentation_order(const std::string& s);

// Case-insensitive reading of a 3EM-Ranker reply:
//   mentions "equal" or "both responses"          -> equal
//   mentions exactly one of "response 1"/"response 2" -> that response
//   a bare "1" or "2"                              -> that response
// Anything else is ambiguous (nullopt).
std::optional<RawJudgeLabel> parse_judge_reply(const std::string& reply);

struct PairJudgment {
  RawJudgeLabel label = RawJudgeLabel::unclassified;
  std::vector<std::string> raw_replies;  // one per attempt
};

// One presentation: R1 shown first. Ambiguous replies are retried once.
PairJudgment judge_pair(const std::string& patient_question, const std::string& r1, const std::string& r2,
                        const std::string& judge_model, Gateway& gateway, const PromptKit& prompts);

// Maps a presentation-level label back to sides.
EmpathyLabel orient(RawJudgeLabel raw, PresentationOrder order);

// Order-swap decision table:
//   equal labels agree          -> that label
//   a_more vs b_more            -> equal
//   directional vs equal        -> equal
//   one side unclassified       -> the other label
//   both unclassified           -> unclassified
EmpathyLabel combine_orders(EmpathyLabel ab, EmpathyLabel ba);

struct EmpathyJudgment {
  std::string exchange_id;
  std::string comparison;  // "<spec A> vs <spec B>"
  std::string side_a;      // variant refs
  std::string side_b;
  std::string judge_model;
  std::vector<PresentationOrder> orders;
  std::vector<EmpathyLabel> order_labels;  // oriented label per order
  EmpathyLabel label = EmpathyLabel::unclassified;
  std::vector<std::vector<std::string>> raw_replies;  // per order, per attempt
};

nlohmann::json to_json(const EmpathyJudgment& j);
EmpathyJudgment judgment_from_json(const nlohmann::json& j);

std::string comparison_name(const std::string& a_spec, const std::string& b_spec);

// Runs both presentation orders and combines them; single order when !debias.
EmpathyJudgment compare_debiased(const std::string& patient_question, const ResponseVariant& a,
                                 const ResponseVariant& b, const std::string& judge_model, Gateway& gateway,
                                 const PromptKit& prompts, bool debias = true);

// Majority over per-judge labels, ignoring unclassified votes. Ties -> equal;
// no classified votes -> unclassified.
EmpathyLabel majority_label(const std::vector<EmpathyLabel>& votes);

EmpathyLabel ensemble_judge(const std::string& patient_question, const ResponseVariant& a, const ResponseVariant& b,
                            const std::vector<std::string>& judge_models, Gateway& gateway, const PromptKit& prompts);

struct ComparisonSummary {
  std::string comparison;
  std::string a_name;
  std::string b_name;
  std::string edit_model;
  std::string judge_model;
  std::size_t n = 0;
  std::size_t count_a_more = 0, count_b_more = 0, count_equal = 0, count_unclassified = 0;
  // One-decimal percentages by largest-remainder rounding: each is within 0.1
  // of 100*count/n and together they sum to exactly 100.0.
  double pct_a_more = 0, pct_b_more = 0, pct_equal = 0, pct_unclassified = 0;
};

nlohmann::json to_json(const ComparisonSummary& s);
ComparisonSummary summary_from_json(const nlohmann::json& j);

// Rounds the shares of `counts` to one decimal (in percent) so that they sum to 100.
std::vector<double> round_percentages(const std::vector<std::size_t>& counts);

ComparisonSummary summarize(const std::vector<EmpathyJudgment>& judgments, const std::string& a_name,
                            const std::string& b_name);

struct AlignmentRecord {
  std::string exchange_id;
  EmpathyLabel human_label = EmpathyLabel::equal;
  EmpathyLabel model_label = EmpathyLabel::equal;
};

double alignment_score(const std::vector<AlignmentRecord>& records);

struct HumanLabel {
  std::string exchange_id;
  std::string annotator_id;
  EmpathyLabel label = EmpathyLabel::equal;
  std::string comparison;  // optional
};

nlohmann::json to_json(const HumanLabel& h);
HumanLabel human_label_from_json(const nlohmann::json& j);

// Per-exchange majority over annotators; ties -> equal. Output sorted by exchange id.
std::vector<std::pair<std::string, EmpathyLabel>> aggregate_human_labels(const std::vector<HumanLabel>& labels);

// Joins model judgments to aggregated human labels on exchange id. Items with
// an unclassified model label or no human label are skipped and counted.
struct AlignmentJoin {
  std::vector<AlignmentRecord> records;
  std::size_t skipped_unclassified = 0;
  std::size_t skipped_unlabeled = 0;
};
AlignmentJoin join_alignment(const std::vector<EmpathyJudgment>& judgments, const std::vector<HumanLabel>& labels);

std::vector<EmpathyJudgment> load_judgments(const std::filesystem::path& path);
std::vector<HumanLabel> load_human_labels(const std::filesystem::path& path);

}  // namespace emfact
