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

#include "emfact/pipeline.hpp"

#include <algorithm>
#include <set>

#include "emfact/artifacts.hpp"
#include "emfact/backends.hpp"
#include "emfact/emranker.hpp"
#include "emfact/gateway.hpp"
#include "emfact/reporting.hpp"
#include "emfact/text.hpp"
#include "emfact/validation.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path RunConfig::effective_cache_dir() const { return cache_dir.empty() ? artifact_dir / "cache" : cache_dir; }

VariantSpec RunConfig::edit_spec() const { return {Provenance::for_edit(edit_mode, level), edit_model}; }

// ---------------------------------------------------------------------------
// RunConfig serialization

json to_json(const RunConfig& c) {
  json levels = json::array();
  for (auto l : c.sweep_levels) levels.push_back(to_string(l));
  json j = {{"corpus", c.corpus.string()},
            {"corpus_format", c.corpus_format ? json(*c.corpus_format == CorpusFormat::csv ? "csv" : "jsonl") : json()},
            {"artifact_dir", c.artifact_dir.string()},
            {"cache_dir", c.effective_cache_dir().string()},
            {"template_dir", c.template_dir.string()},
            {"backend", c.backend},
            {"mock_script", c.mock_script.string()},
            {"api_base", c.api_base},
            {"parallelism", c.parallelism},
            {"temperature", c.temperature},
            {"stage_temperature", c.stage_temperature},
            {"max_tokens", c.max_tokens},
            {"max_retries", c.max_retries},
            {"seed", c.seed},
            {"classify_model", c.classify_model},
            {"edit_model", c.edit_model},
            {"generate_model", c.generate_model},
            {"judge_models", c.judge_models},
            {"fact_model", c.fact_model},
            {"entail_model", c.entail_model},
            {"edit_mode", to_string(c.edit_mode)},
            {"level", to_string(c.level)},
            {"force", c.force},
            {"rank_a", c.rank_a},
            {"rank_b", c.rank_b},
            {"debias", c.debias},
            {"fact_original", c.fact_original},
            {"fact_edited", c.fact_edited},
            {"sweep_levels", levels},
            {"fixed_tertiles", c.fixed_tertiles},
            {"tertiles", {c.tertiles.low, c.tertiles.high}},
            {"dedup", c.dedup},
            {"edge_rule", to_string(c.edge_rule)},
            {"judgments", c.judgments.string()},
            {"human_labels", c.human_labels.string()},
            {"flags", c.flags.string()},
            {"expert_flags", c.expert_flags.string()},
            {"mapped_facts", c.mapped_facts.string()},
            {"report_format", c.report_format},
            {"report_out", c.report_out.string()}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> k;
    const json defaults = to_json(RunConfig{});
    for (const auto& [key, _] : defaults.items()) k.insert(key);
    return k;
  }();
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown run config key '" + key + "'");

  RunConfig c;
  try {
    auto path = [&](const char* key, fs::path& out) {
      if (j.contains(key)) out = j[key].get<std::string>();
    };
    auto get = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j[key].get<std::remove_reference_t<decltype(out)>>();
    };
    path("corpus", c.corpus);
    if (j.contains("corpus_format") && !j["corpus_format"].is_null())
      c.corpus_format = parse_corpus_format(j["corpus_format"].get<std::string>());
    path("artifact_dir", c.artifact_dir);
    path("cache_dir", c.cache_dir);
    path("template_dir", c.template_dir);
    get("backend", c.backend);
    path("mock_script", c.mock_script);
    get("api_base", c.api_base);
    get("parallelism", c.parallelism);
    get("temperature", c.temperature);
    get("stage_temperature", c.stage_temperature);
    get("max_tokens", c.max_tokens);
    get("max_retries", c.max_retries);
    get("seed", c.seed);
    get("classify_model", c.classify_model);
    get("edit_model", c.edit_model);
    get("generate_model", c.generate_model);
    get("judge_models", c.judge_models);
    get("fact_model", c.fact_model);
    get("entail_model", c.entail_model);
    if (j.contains("edit_mode")) c.edit_mode = parse_edit_mode(j["edit_mode"].get<std::string>());
    if (j.contains("level")) c.level = parse_empathy_level(j["level"].get<std::string>());
    get("force", c.force);
    get("rank_a", c.rank_a);
    get("rank_b", c.rank_b);
    get("debias", c.debias);
    get("fact_original", c.fact_original);
    get("fact_edited", c.fact_edited);
    if (j.contains("sweep_levels")) {
      c.sweep_levels.clear();
      for (const auto& l : j["sweep_levels"]) c.sweep_levels.push_back(parse_empathy_level(l.get<std::string>()));
    }
    get("fixed_tertiles", c.fixed_tertiles);
    if (j.contains("tertiles")) {
      const auto& t = j["tertiles"];
      if (!t.is_array() || t.size() != 2) throw ConfigError("tertiles must be [low, high]");
      c.tertiles = {t[0].get<double>(), t[1].get<double>()};
    }
    get("dedup", c.dedup);
    if (j.contains("edge_rule")) c.edge_rule = parse_edge_rule(j["edge_rule"].get<std::string>());
    path("judgments", c.judgments);
    path("human_labels", c.human_labels);
    path("flags", c.flags);
    path("expert_flags", c.expert_flags);
    path("mapped_facts", c.mapped_facts);
    get("report_format", c.report_format);
    path("report_out", c.report_out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ArtifactError& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Stages

namespace {
struct StageInfo {
  Stage stage;
  const char* name;
  bool uses_llm;
};
constexpr StageInfo kStages[] = {
    {Stage::ingest, "ingest", false},     {Stage::stats, "stats", false},         {Stage::classify, "classify", true},
    {Stage::edit, "edit", true},          {Stage::generate, "generate", true},    {Stage::rank, "rank", true},
    {Stage::factcheck, "factcheck", true}, {Stage::sweep, "sweep", true},         {Stage::align, "align", false},
    {Stage::validate, "validate", false}, {Stage::report, "report", false},
};
}  // namespace

std::string to_string(Stage s) {
  for (const auto& info : kStages)
    if (info.stage == s) return info.name;
  return "unknown";
}

Stage parse_stage(const std::string& s) {
  for (const auto& info : kStages)
    if (s == info.name) return info.stage;
  throw ConfigError("unknown stage '" + s + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> all = [] {
    std::vector<Stage> v;
    for (const auto& info : kStages) v.push_back(info.stage);
    return v;
  }();
  return all;
}

std::vector<Stage> parse_stages(const std::string& csv) {
  std::set<Stage> chosen;
  for (const auto& part : text::split(csv, ",")) {
    auto name = text::trimmed(part);
    if (name.empty()) continue;
    if (name == "all") {
      chosen.insert(all_stages().begin(), all_stages().end());
      continue;
    }
    chosen.insert(parse_stage(name));
  }
  if (chosen.empty()) throw ConfigError("no stages selected");
  return {chosen.begin(), chosen.end()};
}

PromptKit load_prompts(const RunConfig& config) {
  return PromptKit::load(config.template_dir.empty() ? PromptKit::default_dir() : config.template_dir);
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& config) {
  if (config.parallelism == 0) throw ConfigError("parallelism must be at least 1");
  std::shared_ptr<ChatBackend> backend;
  if (config.backend == "mock") {
    if (config.mock_script.empty()) throw ConfigError("the mock backend needs --mock-script");
    backend = load_mock_script(config.mock_script);
  } else if (config.backend == "http") {
    auto http = HttpBackendConfig::from_env();
    if (!config.api_base.empty()) http.base_url = config.api_base;
    if (http.base_url.empty()) throw ConfigError("the http backend needs LLM_API_BASE");
    backend = std::make_shared<HttpBackend>(http);
  } else {
    throw ConfigError("unknown backend '" + config.backend + "' (expected http or mock)");
  }
  GatewaySettings settings;
  settings.parallelism = config.parallelism;
  settings.default_temperature = config.temperature;
  settings.stage_temperature = config.stage_temperature;
  settings.default_max_tokens = config.max_tokens;
  settings.retry.max_retries = config.max_retries;
  return std::make_unique<Gateway>(backend, ResponseCache(config.effective_cache_dir()), settings);
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Settings each requested stage needs, checked before anything runs.
void validate_config(const RunConfig& c, const std::vector<Stage>& stages) {
  auto has = [&](Stage s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };
  if (has(Stage::ingest)) require(!c.corpus.empty(), "ingest needs a corpus path");
  if (has(Stage::classify)) require(!c.classify_model.empty(), "classify needs a model");
  if (has(Stage::edit) || has(Stage::sweep)) require(!c.edit_model.empty(), "edit needs a model");
  if (has(Stage::edit)) (void)c.edit_spec();
  if (has(Stage::generate)) require(!c.generate_model.empty() || !c.edit_model.empty(), "generate needs a model");
  if (has(Stage::rank)) {
    require(!c.judge_models.empty(), "rank needs at least one judge model");
    require(!c.rank_b.empty() || !c.edit_model.empty(), "rank needs a B side (--b or an edit model)");
    (void)VariantSpec::parse(c.rank_a);
    if (!c.rank_b.empty()) (void)VariantSpec::parse(c.rank_b);
  }
  if (has(Stage::factcheck) || has(Stage::sweep)) {
    require(!c.fact_model.empty(), "factcheck needs a model");
    (void)VariantSpec::parse(c.fact_original);
  }
  if (has(Stage::factcheck)) {
    require(!c.fact_edited.empty() || !c.edit_model.empty(), "factcheck needs an edited side");
    if (!c.fact_edited.empty()) (void)VariantSpec::parse(c.fact_edited);
  }
  if (has(Stage::sweep)) require(!c.sweep_levels.empty(), "sweep needs at least one level");
  if (has(Stage::report)) (void)parse_report_format(c.report_format);
}

class Runner {
 public:
  Runner(const RunConfig& config, Gateway* gateway) : cfg_(config), gw_(gateway), dir_(config.artifact_dir) {}

  StageResult run(Stage stage) {
    stage_ = stage;
    switch (stage) {
      case Stage::ingest: return ingest();
      case Stage::stats: return stats();
      case Stage::classify: return classify();
      case Stage::edit: return edit();
      case Stage::generate: return generate();
      case Stage::rank: return rank();
      case Stage::factcheck: return factcheck();
      case Stage::sweep: return sweep();
      case Stage::align: return align();
      case Stage::validate: return validate();
      case Stage::report: return report();
    }
    throw StageError(stage, "unknown stage");
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw StageError(stage_, message); }

  Gateway& gateway() {
    if (!gw_) fail("no gateway configured");
    return *gw_;
  }

  const PromptKit& prompts() {
    if (!kit_) kit_ = load_prompts(cfg_);
    return *kit_;
  }

  const Corpus& corpus() {
    if (!corpus_) {
      auto path = dir_ / artifact::kCorpus;
      if (!fs::exists(path)) fail(std::string(artifact::kCorpus) + " not found in " + dir_.string() + "; run ingest first");
      corpus_ = load_corpus(path, CorpusFormat::jsonl);
    }
    return *corpus_;
  }

  std::vector<ResponseVariant> find_side(const VariantSpec& spec, const VariantStore& store) {
    std::vector<ResponseVariant> out;
    for (const auto& ex : corpus()) {
      if (spec.provenance.kind == ProvenanceKind::physician) out.push_back(physician_variant(ex));
      else if (auto* v = store.find(ex.id, spec)) out.push_back(*v);
    }
    return out;
  }

  json metadata() {
    return {{"config", to_json(cfg_)},
            {"gateway", gateway().describe()},
            {"prompts", prompts().checksums()},
            {"reply_cleanup", "trim; drop a leading line ending in ':'; strip code fences; strip one pair of "
                              "wrapping quotes"}};
  }

  StageResult ingest() {
    auto format = cfg_.corpus_format.value_or(cfg_.corpus.extension() == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl);
    auto loaded = load_corpus(cfg_.corpus, format);
    auto out = dir_ / artifact::kCorpus;
    save_corpus_jsonl(loaded, out);
    corpus_ = std::move(loaded);
    return {stage_, {out}, std::to_string(corpus_->size()) + " exchanges"};
  }

  StageResult stats() {
    auto s = compute_stats(corpus(), cfg_.fixed_tertiles ? std::optional<Tertiles>(cfg_.tertiles) : std::nullopt);
    auto out = dir_ / artifact::kStats;
    write_json(out, to_json(s));
    return {stage_, {out}, std::to_string(s.n_exchanges) + " exchanges"};
  }

  StageResult classify() {
    const auto& c = corpus();
    std::vector<ClassificationResult> results(c.size());
    gateway().parallel_for(c.size(), [&](std::size_t i) {
      results[i] = classify_question(c[i], gateway(), prompts(), cfg_.classify_model);
    });
    std::vector<json> records;
    std::size_t unclassified = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      records.push_back({{"exchange_id", c[i].id},
                         {"label", to_string(results[i].label)},
                         {"model", cfg_.classify_model},
                         {"raw_replies", results[i].raw_replies}});
      unclassified += results[i].label == QuestionCategory::unclassified;
    }
    auto out = dir_ / artifact::kClassify;
    write_jsonl(out, records);
    return {stage_, {out}, std::to_string(c.size()) + " classified, " + std::to_string(unclassified) + " unclassified"};
  }

  // Edits every exchange lacking a variant of `spec` (all of them when force).
  std::size_t ensure_edits(const VariantSpec& spec, bool force, bool direct) {
    auto path = dir_ / artifact::kVariants;
    auto store = VariantStore::load(path);
    const auto& c = corpus();
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (force || !store.find(c[i].id, spec)) todo.push_back(i);
    if (todo.empty()) return 0;

    std::vector<ResponseVariant> made(todo.size());
    auto mode = spec.provenance.kind == ProvenanceKind::edited_refined ? EditMode::refined : EditMode::simple;
    gateway().parallel_for(todo.size(), [&](std::size_t k) {
      const auto& ex = c[todo[k]];
      made[k] = direct ? generate_direct(ex, gateway(), prompts(), spec.model_id)
                       : edit_response(ex, mode, spec.provenance.level, gateway(), prompts(), spec.model_id);
    });
    for (auto& v : made) store.upsert(std::move(v), true);
    store.save(path);
    return todo.size();
  }

  StageResult edit() {
    auto spec = cfg_.edit_spec();
    auto n = ensure_edits(spec, cfg_.force, false);
    return {stage_, {dir_ / artifact::kVariants}, std::to_string(n) + " " + spec.str() + " variants written"};
  }

  StageResult generate() {
    VariantSpec spec{{ProvenanceKind::direct_ai, EmpathyLevel::standard},
                     cfg_.generate_model.empty() ? cfg_.edit_model : cfg_.generate_model};
    auto n = ensure_edits(spec, cfg_.force, true);
    return {stage_, {dir_ / artifact::kVariants}, std::to_string(n) + " " + spec.str() + " variants written"};
  }

  StageResult rank() {
    auto a = VariantSpec::parse(cfg_.rank_a);
    auto b = cfg_.rank_b.empty() ? cfg_.edit_spec() : VariantSpec::parse(cfg_.rank_b);
    auto store = VariantStore::load(dir_ / artifact::kVariants);
    struct Pair {
      const QAExchange* ex;
      const ResponseVariant* a;
      const ResponseVariant* b;
    };
    std::vector<ResponseVariant> side_a = find_side(a, store), side_b = find_side(b, store);
    std::map<std::string, const ResponseVariant*> by_id_b;
    for (const auto& v : side_b) by_id_b[v.exchange_id] = &v;
    std::map<std::string, const ResponseVariant*> by_id_a;
    for (const auto& v : side_a) by_id_a[v.exchange_id] = &v;
    std::vector<Pair> pairs;
    for (const auto& ex : corpus()) {
      auto ia = by_id_a.find(ex.id);
      auto ib = by_id_b.find(ex.id);
      if (ia != by_id_a.end() && ib != by_id_b.end()) pairs.push_back({&ex, ia->second, ib->second});
    }
    if (pairs.empty()) fail("no exchange has both " + a.str() + " and " + b.str() + " variants; run edit/generate first");

    const auto& judges = cfg_.judge_models;
    std::vector<EmpathyJudgment> out(pairs.size() * judges.size());
    gateway().parallel_for(out.size(), [&](std::size_t k) {
      const auto& p = pairs[k / judges.size()];
      out[k] = compare_debiased(p.ex->patient_question, *p.a, *p.b, judges[k % judges.size()], gateway(), prompts(),
                                cfg_.debias);
    });

    std::vector<json> records;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::vector<EmpathyLabel> votes;
      for (std::size_t jdx = 0; jdx < judges.size(); ++jdx) {
        records.push_back(to_json(out[i * judges.size() + jdx]));
        votes.push_back(out[i * judges.size() + jdx].label);
      }
      if (judges.size() > 1) {
        EmpathyJudgment e = out[i * judges.size()];
        e.judge_model = "ensemble(" + text::join(judges, "+") + ")";
        e.orders.clear();
        e.order_labels.clear();
        e.raw_replies.clear();
        e.label = majority_label(votes);
        records.push_back(to_json(e));
      }
    }
    auto path = dir_ / artifact::kJudgments;
    upsert_jsonl(path, records, [](const json& r) {
      return r.at("exchange_id").get<std::string>() + "\n" + r.at("comparison").get<std::string>() + "\n" +
             r.at("judge_model").get<std::string>();
    });
    return {stage_, {path}, std::to_string(records.size()) + " judgments for " + comparison_name(a.str(), b.str())};
  }

  FactReportEntry check_pair(const VariantSpec& original, const VariantSpec& edited, std::optional<EmpathyLevel> level,
                             std::vector<std::string>& missing) {
    FactcheckOptions opt;
    opt.model = cfg_.fact_model;
    if (!cfg_.entail_model.empty()) opt.entail_model = cfg_.entail_model;
    opt.dedup = cfg_.dedup;
    opt.edge_rule = cfg_.edge_rule;
    auto store = VariantStore::load(dir_ / artifact::kVariants);
    FactcheckRun run;
    try {
      run = run_factcheck(corpus(), store, original, edited, gateway(), prompts(), opt);
    } catch (const ConfigError&) {
      throw;
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      fail(e.what());
    }
    missing = run.missing;
    const std::string entail_model = cfg_.entail_model.empty() ? cfg_.fact_model : cfg_.entail_model;

    std::vector<json> facts, verdicts, pairs;
    for (const auto& f : run.fact_sets) facts.push_back(to_json(f));
    for (const auto& v : run.verdicts) {
      auto j = to_json(v);
      j["model"] = entail_model;
      verdicts.push_back(j);
    }
    for (const auto& p : run.pairs) {
      auto j = to_json(p);
      j["original"] = original.str();
      j["model"] = cfg_.fact_model;
      pairs.push_back(j);
    }
    upsert_jsonl(dir_ / artifact::kFacts, facts, [](const json& r) {
      return r.at("variant_ref").get<std::string>() + "\n" + r.at("extraction_model").get<std::string>();
    });
    upsert_jsonl(dir_ / artifact::kEntailments, verdicts, [](const json& r) {
      return r.at("premise_ref").get<std::string>() + "\n" + r.at("hypothesis").get<std::string>() + "\n" +
             r.at("model").get<std::string>();
    });
    upsert_jsonl(dir_ / artifact::kFactPairs, pairs, [](const json& r) {
      return r.at("original").get<std::string>() + "\n" + r.at("edited_ref").get<std::string>() + "\n" +
             r.at("model").get<std::string>();
    });

    std::map<std::string, double> lengths;
    for (const auto& ex : corpus()) lengths[ex.id] = static_cast<double>(response_length(ex));
    auto tertiles = cfg_.fixed_tertiles ? cfg_.tertiles : compute_stats(corpus()).response_length_tertiles;

    FactReportEntry entry;
    entry.original = original.str();
    entry.edited = edited.str();
    entry.model = cfg_.fact_model;
    if (level) entry.level = to_string(*level);
    entry.report = run.report;
    entry.length_analysis = to_json(fact_ratio_analysis(run.pairs, lengths, tertiles));
    return entry;
  }

  StageResult factcheck() {
    auto original = VariantSpec::parse(cfg_.fact_original);
    auto edited = cfg_.fact_edited.empty() ? cfg_.edit_spec() : VariantSpec::parse(cfg_.fact_edited);
    std::vector<std::string> missing;
    auto entry = check_pair(original, edited, std::nullopt, missing);
    upsert_fact_reports(dir_ / artifact::kFactReport, {entry}, metadata());
    std::string summary = edited.str() + ": micro recall " + format_metric(entry.report.micro_recall.value()) +
                          ", micro precision " + format_metric(entry.report.micro_precision.value());
    if (!missing.empty()) summary += "; " + std::to_string(missing.size()) + " exchanges without an edit";
    return {stage_, fact_outputs(), summary};
  }

  StageResult sweep() {
    auto original = VariantSpec::parse(cfg_.fact_original);
    std::vector<FactReportEntry> entries;
    std::string summary;
    for (auto level : cfg_.sweep_levels) {
      VariantSpec spec{Provenance::for_edit(EditMode::simple, level), cfg_.edit_model};
      ensure_edits(spec, false, false);
      std::vector<std::string> missing;
      entries.push_back(check_pair(original, spec, level, missing));
      if (!summary.empty()) summary += ", ";
      summary += to_string(level) + " precision " + format_metric(entries.back().report.micro_precision.value());
    }
    upsert_fact_reports(dir_ / artifact::kFactReport, entries, metadata());
    auto written = fact_outputs();
    written.push_back(dir_ / artifact::kVariants);
    return {stage_, written, summary};
  }

  std::vector<fs::path> fact_outputs() const {
    return {dir_ / artifact::kFacts, dir_ / artifact::kEntailments, dir_ / artifact::kFactPairs,
            dir_ / artifact::kFactReport};
  }

  StageResult align() {
    auto jpath = cfg_.judgments.empty() ? dir_ / artifact::kJudgments : cfg_.judgments;
    if (!fs::exists(jpath)) fail(jpath.string() + " not found; run rank first");
    if (cfg_.human_labels.empty()) fail("no human label file given (--human)");
    if (!fs::exists(cfg_.human_labels)) fail("human label file not found: " + cfg_.human_labels.string());
    auto judgments = load_judgments(jpath);
    auto labels = load_human_labels(cfg_.human_labels);

    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<EmpathyJudgment>> groups;
    for (auto& j : judgments) {
      auto key = std::make_pair(j.comparison, j.judge_model);
      if (!groups.count(key)) keys.push_back(key);
      groups[key].push_back(std::move(j));
    }
    json results = json::array();
    for (const auto& key : keys) {
      std::vector<HumanLabel> relevant;
      for (const auto& h : labels)
        if (h.comparison.empty() || h.comparison == key.first) relevant.push_back(h);
      auto joined = join_alignment(groups[key], relevant);
      if (joined.records.empty()) continue;
      results.push_back({{"comparison", key.first},
                         {"judge_model", key.second},
                         {"n", joined.records.size()},
                         {"matches", std::count_if(joined.records.begin(), joined.records.end(),
                                                   [](const AlignmentRecord& r) { return r.human_label == r.model_label; })},
                         {"score", alignment_score(joined.records)},
                         {"skipped_unclassified", joined.skipped_unclassified},
                         {"skipped_unlabeled", joined.skipped_unlabeled}});
    }
    if (results.empty()) fail("no judgment overlaps the human labels");
    auto out = dir_ / artifact::kAlignment;
    write_json(out, {{"human_labels", cfg_.human_labels.string()}, {"results", results}});
    return {stage_, {out}, std::to_string(results.size()) + " alignment scores"};
  }

  StageResult validate() {
    json v = json::object();
    if (!cfg_.flags.empty()) {
      json tallies = json::array();
      for (const auto& t : validation_tallies(load_flags(cfg_.flags))) tallies.push_back(to_json(t));
      v["flags"] = tallies;
    }
    if (!cfg_.expert_flags.empty() || !cfg_.mapped_facts.empty()) {
      if (cfg_.expert_flags.empty() || cfg_.mapped_facts.empty())
        fail("coverage needs both expert flags and mapped facts");
      v["coverage"] = to_json(category_coverage(load_expert_flags(cfg_.expert_flags), load_mapped_facts(cfg_.mapped_facts)));
    }
    if (v.empty()) fail("nothing to validate: give flags and/or expert flags with mapped facts");
    auto out = dir_ / artifact::kValidation;
    write_json(out, v);
    return {stage_, {out}, "validation written"};
  }

  StageResult report() {
    auto format = parse_report_format(cfg_.report_format);
    auto out = cfg_.report_out;
    if (out.empty()) {
      out = dir_ / (format == ReportFormat::json ? "report.json"
                    : format == ReportFormat::csv ? "report_csv"
                                                  : "report.md");
    }
    auto written = export_report(build_report(dir_), format, out);
    return {stage_, written, "report written to " + out.string()};
  }

  const RunConfig& cfg_;
  Gateway* gw_;
  fs::path dir_;
  Stage stage_ = Stage::ingest;
  std::optional<PromptKit> kit_;
  std::optional<Corpus> corpus_;
};

std::vector<StageResult> run_stages(const RunConfig& config, const std::vector<Stage>& stages, Gateway* gateway) {
  std::vector<Stage> ordered;
  for (auto s : all_stages())
    if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);

  fs::create_directories(config.artifact_dir);
  bool only_report = std::all_of(ordered.begin(), ordered.end(), [](Stage s) { return s == Stage::report; });
  if (!only_report) write_json(config.artifact_dir / artifact::kRunConfig, to_json(config));

  Runner runner(config, gateway);
  std::vector<StageResult> results;
  for (auto s : ordered) {
    try {
      results.push_back(runner.run(s));
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(s, e.what());
    }
  }
  return results;
}

bool needs_llm(const std::vector<Stage>& stages) {
  for (const auto& info : kStages)
    if (info.uses_llm && std::find(stages.begin(), stages.end(), info.stage) != stages.end()) return true;
  return false;
}

}  // namespace

std::vector<StageResult> run_pipeline(const RunConfig& config, const std::vector<Stage>& stages) {
  validate_config(config, stages);
  std::unique_ptr<Gateway> gateway;
  if (needs_llm(stages)) gateway = make_gateway(config);
  return run_stages(config, stages, gateway.get());
}

std::vector<StageResult> run_pipeline(const RunConfig& config, const std::vector<Stage>& stages, Gateway& gateway) {
  validate_config(config, stages);
  return run_stages(config, stages, &gateway);
}

}  // namespace emfact
