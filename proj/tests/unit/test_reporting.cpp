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

#include "emfact/artifacts.hpp"
#include "emfact/reporting.hpp"
#include "emfact/validation.hpp"
#include "helpers.hpp"

using namespace emfact;
using emfact::testing::TempDir;

namespace {

EmpathyJudgment judgment(int i, EmpathyLabel label, const std::string& judge) {
  EmpathyJudgment j;
  j.exchange_id = "e" + std::to_string(i);
  j.comparison = comparison_name("physician:human", "direct_ai:gemini");
  j.side_a = j.exchange_id + "/physician:human";
  j.side_b = j.exchange_id + "/direct_ai:gemini";
  j.judge_model = judge;
  j.orders = {PresentationOrder::ab, PresentationOrder::ba};
  j.order_labels = {label, label};
  j.label = label;
  j.raw_replies = {{"x"}, {"y"}};
  return j;
}

void populate(const std::filesystem::path& dir) {
  std::vector<nlohmann::json> js;
  for (int i = 0; i < 163; ++i) js.push_back(to_json(judgment(i, i < 158 ? EmpathyLabel::b_more : EmpathyLabel::equal, "qwen3")));
  write_jsonl(dir / artifact::kJudgments, js);

  FactReportEntry e;
  e.original = "physician:human";
  e.edited = "edited_simple:gemini";
  e.model = "fx";
  e.report = report_from_flow(934, 855, 1194, 1081);
  e.length_analysis = nullptr;
  upsert_fact_reports(dir / artifact::kFactReport, {e},
                      {{"prompts", {{"entail", {{"sha256", "abc"}}}}}, {"gateway", {{"backend", "mock"}}}});

  std::vector<ExpertFlag> expert;
  std::vector<MappedFact> mapped;
  for (int i = 0; i < 32; ++i) {
    expert.push_back({"r" + std::to_string(i), FabricationCategory::clinical_assumption});
    if (i < 29) mapped.push_back({"r" + std::to_string(i), FabricationCategory::clinical_assumption, "f"});
  }
  write_json(dir / artifact::kValidation, {{"coverage", to_json(category_coverage(expert, mapped))}});
}

}  // namespace

TEST_CASE("format helpers") {
  CHECK(format_pct(96.875) == "96.9");
  CHECK(format_rate(Ratio{79, 934}) == "8.5%");
  CHECK(format_rate(Ratio{113, 1194}) == "9.5%");
  CHECK(format_metric(855.0 / 934) == "0.92");
}

TEST_CASE("markdown carries the comparison cell and the fact-flow row") {
  TempDir dir;
  populate(dir.path());
  auto r = build_report(dir.path());
  REQUIRE(r.comparisons.size() == 1);
  CHECK(r.comparisons[0].pct_a_more == 0.0);
  CHECK(r.comparisons[0].pct_b_more == 96.9);
  auto md = render_markdown(r);
  CHECK(md.find("| 0.0 | 96.9 |") != std::string::npos);
  CHECK(md.find("| 934 | 855 | 1194 | 1081 | 113 | 8.5% | 9.5% |") != std::string::npos);
  CHECK(md.find("| Overall | 32 | 29 | 3 | 90.62 |") != std::string::npos);
  CHECK(r.backend["backend"] == "mock");
  CHECK(r.run_id.size() == 16);

  auto csv = render_fact_metrics_csv(r);
  CHECK(csv.rfind("model,edited,metric,value\n", 0) == 0);
  CHECK(csv.find("gemini,edited_simple:gemini,new,113") != std::string::npos);
  auto cmp = render_comparisons_csv(r);
  CHECK(cmp.find(",163,0.0,96.9,3.1,0.0") != std::string::npos);
}

TEST_CASE("missing sections become notes") {
  TempDir dir;
  auto r = build_report(dir.path());
  CHECK(r.comparisons.empty());
  CHECK(std::find(r.notes.begin(), r.notes.end(), "no judgments: empathy section omitted") != r.notes.end());
  auto md = render_markdown(r);
  CHECK(md.find("no judgments: empathy section omitted") != std::string::npos);
  CHECK_THROWS_AS(build_report(dir / "absent"), ArtifactError);
}

TEST_CASE("report JSON reloads to an identical export") {
  TempDir dir;
  populate(dir.path());
  auto r = build_report(dir.path());
  auto first = render_json(r);
  auto back = run_report_from_json(nlohmann::json::parse(first));
  CHECK(render_json(back) == first);
  CHECK(render_markdown(back) == render_markdown(r));
  CHECK(render_comparisons_csv(back) == render_comparisons_csv(r));
  // Building twice from unchanged files gives the same bytes.
  CHECK(render_json(build_report(dir.path())) == first);
}

TEST_CASE("export writes the requested files") {
  TempDir dir;
  populate(dir.path());
  auto r = build_report(dir.path());
  auto csv = export_report(r, ReportFormat::csv, dir / "out");
  CHECK(csv.size() == 2);
  CHECK(std::filesystem::exists(dir / "out" / "comparisons.csv"));
  auto md = export_report(r, parse_report_format("md"), dir / "r.md");
  CHECK(read_text(md.at(0)) == render_markdown(r));
  CHECK_THROWS(parse_report_format("pdf"));
}

TEST_CASE("fact report upserts replace by key") {
  TempDir dir;
  FactReportEntry e;
  e.original = "physician:human";
  e.edited = "edited_simple:m";
  e.model = "fx";
  e.report = report_from_flow(10, 9, 10, 9);
  upsert_fact_reports(dir / "f.json", {e}, {});
  e.report = report_from_flow(10, 5, 10, 9);
  upsert_fact_reports(dir / "f.json", {e}, {});
  e.model = "other";
  upsert_fact_reports(dir / "f.json", {e}, {});
  auto doc = read_json(dir / "f.json");
  REQUIRE(doc["reports"].size() == 2);
  CHECK(fact_entry_from_json(doc["reports"][0]).report.flow.preserved == 5);
  CHECK(e.label() == "m (edited_simple)");
}
