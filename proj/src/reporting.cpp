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

#include "emfact/reporting.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "emfact/artifacts.hpp"
#include "emfact/corpus.hpp"
#include "emfact/error.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_pct(double percent) { return text::fixed(percent, 1); }
std::string format_rate(const Ratio& r) { return text::fixed(100.0 * r.value(), 1) + "%"; }
std::string format_metric(double value) { return text::fixed(value, 2); }

namespace {

std::string spec_model(const std::string& spec) {
  auto colon = spec.find(':');
  return colon == std::string::npos ? std::string() : spec.substr(colon + 1);
}

std::string spec_provenance(const std::string& spec) { return spec.substr(0, spec.find(':')); }

}  // namespace

std::string FactReportEntry::edit_model() const { return spec_model(edited); }
std::string FactReportEntry::label() const { return edit_model() + " (" + spec_provenance(edited) + ")"; }

json to_json(const FactReportEntry& e) {
  json j = {{"original", e.original},
            {"edited", e.edited},
            {"model", e.model},
            {"report", to_json(e.report)},
            {"length_analysis", e.length_analysis}};
  if (e.level) j["level"] = *e.level;
  return j;
}

FactReportEntry fact_entry_from_json(const json& j) {
  try {
    FactReportEntry e;
    e.original = j.at("original").get<std::string>();
    e.edited = j.at("edited").get<std::string>();
    e.model = j.at("model").get<std::string>();
    if (j.contains("level")) e.level = j["level"].get<std::string>();
    e.report = corpus_report_from_json(j.at("report"));
    e.length_analysis = j.value("length_analysis", json());
    return e;
  } catch (const json::exception& ex) {
    throw ArtifactError(std::string("malformed fact report entry: ") + ex.what());
  }
}

void upsert_fact_reports(const fs::path& file, const std::vector<FactReportEntry>& entries, const json& metadata) {
  json doc = fs::exists(file) ? read_json(file) : json{{"reports", json::array()}};
  if (!doc.contains("reports") || !doc["reports"].is_array()) throw ArtifactError(file.string() + ": no reports array");
  auto& reports = doc["reports"];
  for (const auto& e : entries) {
    auto j = to_json(e);
    bool replaced = false;
    for (auto& existing : reports) {
      if (existing.value("original", "") == e.original && existing.value("edited", "") == e.edited &&
          existing.value("model", "") == e.model) {
        existing = j;
        replaced = true;
        break;
      }
    }
    if (!replaced) reports.push_back(j);
  }
  doc["metadata"] = metadata;
  write_json(file, doc);
}

// ---------------------------------------------------------------------------

RunReport build_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ArtifactError("artifact directory not found: " + dir.string());
  RunReport r;
  r.prompt_checksums = json::object();
  r.backend = json::object();
  r.config = json::object();

  if (fs::exists(dir / artifact::kCorpus)) {
    r.corpus_checksum = corpus_checksum(load_corpus(dir / artifact::kCorpus, CorpusFormat::jsonl));
  } else {
    r.notes.push_back("corpus.jsonl absent: corpus checksum omitted");
  }
  if (fs::exists(dir / artifact::kRunConfig)) r.config = read_json(dir / artifact::kRunConfig);

  if (fs::exists(dir / artifact::kStats)) r.stats = read_json(dir / artifact::kStats);
  else r.notes.push_back("stats.json absent: dataset statistics omitted");

  if (fs::exists(dir / artifact::kClassify)) {
    std::map<std::string, std::size_t> counts{{"general", 0}, {"ehr_dependent", 0}, {"unclassified", 0}};
    std::size_t n = 0;
    for (const auto& rec : read_jsonl(dir / artifact::kClassify)) {
      auto label = rec.at("label").get<std::string>();
      parse_question_category(label);
      ++counts[label];
      ++n;
    }
    json c = {{"n", n}, {"counts", counts}};
    json prop = json::object();
    for (const auto& [k, v] : counts) prop[k] = n ? static_cast<double>(v) / static_cast<double>(n) : 0.0;
    c["proportions"] = prop;
    r.classification = c;
  }

  std::vector<EmpathyJudgment> judgments;
  if (fs::exists(dir / artifact::kJudgments)) judgments = load_judgments(dir / artifact::kJudgments);
  if (judgments.empty()) {
    r.notes.push_back("no judgments: empathy section omitted");
  } else {
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<EmpathyJudgment>> groups;
    for (auto& j : judgments) {
      auto key = std::make_pair(j.comparison, j.judge_model);
      if (!groups.count(key)) keys.push_back(key);
      groups[key].push_back(std::move(j));
    }
    for (const auto& key : keys) {
      const auto& name = key.first;
      auto sep = name.find(" vs ");
      if (sep == std::string::npos) throw ArtifactError("malformed comparison name '" + name + "'");
      r.comparisons.push_back(summarize(groups[key], name.substr(0, sep), name.substr(sep + 4)));
    }
  }

  if (fs::exists(dir / artifact::kFactReport)) {
    auto doc = read_json(dir / artifact::kFactReport);
    for (const auto& e : doc.at("reports")) r.fact_reports.push_back(fact_entry_from_json(e));
    if (doc.contains("metadata")) {
      const auto& m = doc["metadata"];
      if (m.contains("prompts")) r.prompt_checksums = m["prompts"];
      if (m.contains("gateway")) r.backend = m["gateway"];
    }
  }
  if (r.fact_reports.empty()) r.notes.push_back("no fact reports: factuality section omitted");

  if (fs::exists(dir / artifact::kAlignment)) r.alignment = read_json(dir / artifact::kAlignment);
  if (fs::exists(dir / artifact::kValidation)) r.validation = read_json(dir / artifact::kValidation);

  auto body = to_json(r);
  body.erase("run_id");
  r.run_id = text::sha256_hex(body.dump()).substr(0, 16);
  return r;
}

json to_json(const RunReport& r) {
  json comparisons = json::array();
  for (const auto& c : r.comparisons) comparisons.push_back(to_json(c));
  json facts = json::array();
  for (const auto& f : r.fact_reports) facts.push_back(to_json(f));
  return {{"run_id", r.run_id},
          {"corpus_checksum", r.corpus_checksum},
          {"prompt_checksums", r.prompt_checksums},
          {"backend", r.backend},
          {"config", r.config},
          {"stats", r.stats ? *r.stats : json()},
          {"classification", r.classification ? *r.classification : json()},
          {"comparisons", comparisons},
          {"fact_reports", facts},
          {"alignment", r.alignment ? *r.alignment : json()},
          {"validation", r.validation ? *r.validation : json()},
          {"notes", r.notes}};
}

RunReport run_report_from_json(const json& j) {
  try {
    RunReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.corpus_checksum = j.at("corpus_checksum").get<std::string>();
    r.prompt_checksums = j.at("prompt_checksums");
    r.backend = j.at("backend");
    r.config = j.at("config");
    if (!j.at("stats").is_null()) r.stats = j["stats"];
    if (!j.at("classification").is_null()) r.classification = j["classification"];
    for (const auto& c : j.at("comparisons")) r.comparisons.push_back(summary_from_json(c));
    for (const auto& f : j.at("fact_reports")) r.fact_reports.push_back(fact_entry_from_json(f));
    if (!j.at("alignment").is_null()) r.alignment = j["alignment"];
    if (!j.at("validation").is_null()) r.validation = j["validation"];
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed run report: ") + e.what());
  }
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "md" || s == "markdown") return ReportFormat::markdown;
  throw ConfigError("unknown report format '" + s + "' (expected md, csv or json)");
}

std::string render_json(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

namespace {

std::string ms(const json& j) {
  return text::fixed(j.at("mean").get<double>(), 1) + " ± " + text::fixed(j.at("stddev").get<double>(), 1);
}

void table_row(std::ostringstream& md, const std::vector<std::string>& cells) {
  md << "|";
  for (const auto& c : cells) md << ' ' << c << " |";
  md << '\n';
}

void table_header(std::ostringstream& md, const std::vector<std::string>& cells) {
  table_row(md, cells);
  md << "|";
  for (std::size_t i = 0; i < cells.size(); ++i) md << (i == 0 ? " --- |" : " ---: |");
  md << '\n';
}

}  // namespace

std::string render_markdown(const RunReport& r) {
  std::ostringstream md;
  md << "# Evaluation report\n\n";
  md << "- Run: `" << r.run_id << "`\n";
  if (!r.corpus_checksum.empty()) md << "- Corpus sha256: `" << r.corpus_checksum << "`\n";
  if (r.backend.is_object() && r.backend.contains("backend"))
    md << "- Backend: `" << r.backend["backend"].get<std::string>() << "`, temperature "
       << r.backend.value("temperature", 0.0) << "\n";
  md << '\n';

  if (r.stats) {
    const auto& s = *r.stats;
    md << "## Dataset\n\n";
    md << "N = " << s.at("n_exchanges").get<std::size_t>() << "\n\n";
    table_header(md, {"Field", "Words (mean ± sd)", "Sentences (mean ± sd)"});
    table_row(md, {"Patient question", ms(s["patient_question"]["words"]), ms(s["patient_question"]["sentences"])});
    table_row(md, {"Physician response", ms(s["physician_response"]["words"]),
                   ms(s["physician_response"]["sentences"])});
    const auto& t = s["response_length_tertiles"];
    md << "\nResponse length bands (" << t.value("mode", "") << "): Short < " << text::fixed(t["low"].get<double>(), 1)
       << " <= Medium <= " << text::fixed(t["high"].get<double>(), 1) << " < Long characters\n\n";
  }

  if (r.classification) {
    const auto& c = *r.classification;
    md << "## Question types\n\n";
    table_header(md, {"Label", "Count", "Share (%)"});
    for (const char* k : {"general", "ehr_dependent", "unclassified"})
      table_row(md, {k, std::to_string(c["counts"][k].get<std::size_t>()),
                     format_pct(100.0 * c["proportions"][k].get<double>())});
    md << '\n';
  }

  if (!r.comparisons.empty()) {
    md << "## Empathy comparisons (three-way ranking)\n\n";
    // Table-1 shape: one row per (comparison kind, edit model), two columns per judge.
    std::vector<std::string> judges;
    std::vector<std::pair<std::string, std::string>> rows;
    std::map<std::pair<std::string, std::string>, std::map<std::string, const ComparisonSummary*>> cells;
    for (const auto& c : r.comparisons) {
      if (std::find(judges.begin(), judges.end(), c.judge_model) == judges.end()) judges.push_back(c.judge_model);
      auto kind = spec_provenance(c.a_name) + " (A) vs " + spec_provenance(c.b_name) + " (B)";
      auto key = std::make_pair(kind, c.edit_model);
      if (!cells.count(key)) rows.push_back(key);
      cells[key][c.judge_model] = &c;
    }
    std::vector<std::string> header{"Comparison (A vs B)", "Model"};
    for (const auto& j : judges) {
      header.push_back(j + " A > B (%)");
      header.push_back(j + " B > A (%)");
    }
    table_header(md, header);
    for (const auto& key : rows) {
      std::vector<std::string> row{key.first, key.second};
      for (const auto& j : judges) {
        auto it = cells[key].find(j);
        row.push_back(it == cells[key].end() ? "" : format_pct(it->second->pct_a_more));
        row.push_back(it == cells[key].end() ? "" : format_pct(it->second->pct_b_more));
      }
      table_row(md, row);
    }
    md << "\nEqual and unclassified shares:\n\n";
    table_header(md, {"Comparison", "Judge", "n", "Equal (%)", "Unclassified (%)"});
    for (const auto& c : r.comparisons)
      table_row(md, {c.comparison, c.judge_model, std::to_string(c.n), format_pct(c.pct_equal),
                     format_pct(c.pct_unclassified)});
    md << '\n';
  }

  if (!r.fact_reports.empty()) {
    md << "## Factuality\n\n";
    table_header(md, {"Model", "Micro R", "Micro P", "Micro F1", "Macro R", "Macro P", "Macro F1"});
    for (const auto& e : r.fact_reports) {
      const auto& f = e.report;
      table_row(md, {e.label(), format_metric(f.micro_recall.value()), format_metric(f.micro_precision.value()),
                     format_metric(f.micro_f1), format_metric(f.macro_recall), format_metric(f.macro_precision),
                     format_metric(f.macro_f1)});
    }
    md << "\n### Fact flow\n\n";
    table_header(md, {"Model", "Original", "Preserved", "Edited", "Grounded", "New", "Loss Rate", "Halluc. Rate"});
    for (const auto& e : r.fact_reports) {
      const auto& f = e.report.flow;
      table_row(md, {e.label(), std::to_string(f.original), std::to_string(f.preserved), std::to_string(f.edited),
                     std::to_string(f.grounded), std::to_string(f.new_facts), format_rate(e.report.loss_rate),
                     format_rate(e.report.hallucination_rate)});
    }
    md << "\nMacro metrics apply the edge rule per pair; micro metrics add nothing for empty fact sets.\n";
    bool any_failures = false;
    for (const auto& e : r.fact_reports) any_failures |= e.report.parse_failures > 0;
    if (any_failures) {
      md << "\nEntailment parse failures (counted as not entailed):\n\n";
      for (const auto& e : r.fact_reports) md << "- " << e.label() << ": " << e.report.parse_failures << "\n";
    }
    md << '\n';
  }

  if (r.alignment) {
    md << "## Alignment with human labels\n\n";
    table_header(md, {"Comparison", "Judge", "n", "Score"});
    for (const auto& a : r.alignment->at("results"))
      table_row(md, {a.at("comparison").get<std::string>(), a.at("judge_model").get<std::string>(),
                     std::to_string(a.at("n").get<std::size_t>()), format_metric(a.at("score").get<double>())});
    md << '\n';
  }

  if (r.validation) {
    const auto& v = *r.validation;
    md << "## Fact flag validation\n\n";
    if (v.contains("flags")) {
      table_header(md, {"Direction", "Flagged", "Confirmed", "Precision (%)"});
      for (const auto& f : v["flags"])
        table_row(md, {f.at("direction").get<std::string>(), std::to_string(f.at("flagged").get<std::size_t>()),
                       std::to_string(f.at("confirmed").get<std::size_t>()),
                       format_pct(100.0 * f.at("precision").get<double>())});
      md << '\n';
    }
    if (v.contains("coverage")) {
      const auto& c = v["coverage"];
      table_header(md, {"Pattern", "Total", "Detected", "Missed", "Coverage (%)"});
      for (const auto& row : c.at("categories"))
        table_row(md, {row.at("pattern").get<std::string>(), std::to_string(row.at("total").get<std::size_t>()),
                       std::to_string(row.at("detected").get<std::size_t>()),
                       std::to_string(row.at("missed").get<std::size_t>()),
                       format_pct(100.0 * row.at("coverage").get<double>())});
      auto total = c.at("total").get<std::size_t>();
      auto detected = c.at("detected").get<std::size_t>();
      table_row(md, {"Overall", std::to_string(total), std::to_string(detected), std::to_string(total - detected),
                     text::fixed(100.0 * c.at("overall").get<double>(), 2)});
      md << '\n';
    }
  }

  if (!r.notes.empty()) {
    md << "## Notes\n\n";
    for (const auto& n : r.notes) md << "- " << n << "\n";
  }
  return md.str();
}

std::string render_comparisons_csv(const RunReport& r) {
  std::ostringstream out;
  out << "comparison,a,b,edit_model,judge_model,n,pct_a_more,pct_b_more,pct_equal,pct_unclassified\n";
  for (const auto& c : r.comparisons)
    out << csv_escape(c.comparison) << ',' << csv_escape(c.a_name) << ',' << csv_escape(c.b_name) << ','
        << csv_escape(c.edit_model) << ',' << csv_escape(c.judge_model) << ',' << c.n << ','
        << format_pct(c.pct_a_more) << ',' << format_pct(c.pct_b_more) << ',' << format_pct(c.pct_equal) << ','
        << format_pct(c.pct_unclassified) << '\n';
  return out.str();
}

std::string render_fact_metrics_csv(const RunReport& r) {
  std::ostringstream out;
  out << "model,edited,metric,value\n";
  for (const auto& e : r.fact_reports) {
    const auto& f = e.report;
    auto row = [&](const char* metric, const std::string& value) {
      out << csv_escape(e.edit_model()) << ',' << csv_escape(e.edited) << ',' << metric << ',' << value << '\n';
    };
    row("micro_recall", format_metric(f.micro_recall.value()));
    row("micro_precision", format_metric(f.micro_precision.value()));
    row("micro_f1", format_metric(f.micro_f1));
    row("macro_recall", format_metric(f.macro_recall));
    row("macro_precision", format_metric(f.macro_precision));
    row("macro_f1", format_metric(f.macro_f1));
    row("original", std::to_string(f.flow.original));
    row("preserved", std::to_string(f.flow.preserved));
    row("edited", std::to_string(f.flow.edited));
    row("grounded", std::to_string(f.flow.grounded));
    row("new", std::to_string(f.flow.new_facts));
    row("loss_rate_pct", format_pct(100.0 * f.loss_rate.value()));
    row("hallucination_rate_pct", format_pct(100.0 * f.hallucination_rate.value()));
  }
  return out.str();
}

std::vector<fs::path> export_report(const RunReport& r, ReportFormat format, const fs::path& out) {
  switch (format) {
    case ReportFormat::json:
      write_text_atomic(out, render_json(r));
      return {out};
    case ReportFormat::markdown:
      write_text_atomic(out, render_markdown(r));
      return {out};
    case ReportFormat::csv: {
      fs::create_directories(out);
      write_text_atomic(out / "comparisons.csv", render_comparisons_csv(r));
      write_text_atomic(out / "fact_metrics.csv", render_fact_metrics_csv(r));
      return {out / "comparisons.csv", out / "fact_metrics.csv"};
    }
  }
  return {};
}

}  // namespace emfact
