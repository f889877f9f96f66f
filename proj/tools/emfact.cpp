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

// emfact: command-line entry point for every pipeline stage.
//
// Exit codes: 0 ok, 2 configuration error, 3 stage failure.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "emfact/annotation.hpp"
#include "emfact/annotation_server.hpp"
#include "emfact/artifacts.hpp"
#include "emfact/pipeline.hpp"
#include "emfact/text.hpp"

namespace fs = std::filesystem;
using namespace emfact;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Globals {
  std::string config;
  std::string backend;
  std::string mock_script;
  std::string cache_dir;
  std::size_t parallelism = 0;
  std::uint64_t seed = 0;
  double temperature = 0.0;
  std::string dir;
  std::string template_dir;
};

struct Options {
  // corpus
  std::string in, format, corpus, fixed_tertiles;
  // models and sides
  std::string model, entail_model, edit_model, mode, level, a, b, original, edited, edge_rule, levels;
  std::vector<std::string> judges;
  bool force = false, no_debias = false, no_dedup = false;
  // human inputs
  std::string judgments, human, flags, expert_flags, mapped_facts;
  // report
  std::string out;
  // run
  std::string stages;
  // prompts
  std::string prompt_name;
  std::string report_format;
  std::string export_kind;
  // annotate
  std::string tasks_dir, kind = "empathy_pair", static_dir, host = "127.0.0.1";
  int port = 8080;
};

AnnotationServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

Tertiles parse_tertiles(const std::string& s) {
  auto parts = text::split(s, ",");
  if (parts.size() != 2) throw ConfigError("--fixed-tertiles expects LOW,HIGH");
  try {
    return {std::stod(parts[0]), std::stod(parts[1])};
  } catch (const std::exception&) {
    throw ConfigError("--fixed-tertiles expects two numbers, got '" + s + "'");
  }
}

std::vector<EmpathyLevel> parse_levels(const std::string& s) {
  std::vector<EmpathyLevel> out;
  for (const auto& part : text::split(s, ",")) {
    auto name = text::trimmed(part);
    if (!name.empty()) out.push_back(parse_empathy_level(name));
  }
  if (out.empty()) throw ConfigError("--levels is empty");
  return out;
}

// Config file first, then any global flag given on the command line.
RunConfig base_config(const CLI::App& app, const Globals& g) {
  RunConfig c;
  if (!g.config.empty()) c = load_run_config(g.config);
  auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  if (given("--backend")) c.backend = g.backend;
  if (given("--mock-script")) c.mock_script = g.mock_script;
  if (given("--cache-dir")) c.cache_dir = g.cache_dir;
  if (given("--parallelism")) c.parallelism = g.parallelism;
  if (given("--seed")) c.seed = g.seed;
  if (given("--temperature")) c.temperature = g.temperature;
  if (given("--dir")) c.artifact_dir = g.dir;
  if (given("--template-dir")) c.template_dir = g.template_dir;
  return c;
}

// --corpus re-ingests when it points anywhere but the artifact copy.
void with_corpus(RunConfig& c, const Options& o, std::vector<Stage>& stages) {
  if (o.corpus.empty()) return;
  auto artifact_copy = c.artifact_dir / artifact::kCorpus;
  if (fs::exists(artifact_copy) && fs::equivalent(o.corpus, artifact_copy)) return;
  c.corpus = o.corpus;
  stages.insert(stages.begin(), Stage::ingest);
}

int run(const RunConfig& c, const std::vector<Stage>& stages) {
  for (const auto& r : run_pipeline(c, stages)) std::cout << to_string(r.stage) << ": " << r.summary << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM empathy-editing evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Run configuration JSON");
  app.add_option("--backend", g.backend, "Chat backend: http or mock");
  app.add_option("--mock-script", g.mock_script, "Mock backend script (JSON)");
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_option("--parallelism", g.parallelism, "Concurrent backend calls");
  app.add_option("--seed", g.seed, "Seed for task ordering");
  app.add_option("--temperature", g.temperature, "Default sampling temperature");
  app.add_option("--dir", g.dir, "Artifact directory");
  app.add_option("--template-dir", g.template_dir, "Prompt template directory");

  Options o;
  std::function<int()> action;
  auto bind = [&](CLI::App* sub, std::function<int()> fn) { sub->callback([&action, fn] { action = fn; }); };

  auto* ingest = app.add_subcommand("ingest", "Load a corpus into the artifact directory");
  ingest->add_option("--in", o.in, "Corpus file")->required();
  ingest->add_option("--format", o.format, "jsonl or csv (default: by extension)");
  bind(ingest, [&] {
    auto c = base_config(app, g);
    c.corpus = o.in;
    if (!o.format.empty()) c.corpus_format = parse_corpus_format(o.format);
    return run(c, {Stage::ingest});
  });

  auto* stats = app.add_subcommand("stats", "Dataset statistics and length tertiles");
  stats->add_option("--corpus", o.corpus, "Corpus file (re-ingested when given)");
  stats->add_option("--fixed-tertiles", o.fixed_tertiles, "Fixed band boundaries LOW,HIGH");
  bind(stats, [&] {
    auto c = base_config(app, g);
    if (!o.fixed_tertiles.empty()) {
      c.fixed_tertiles = true;
      c.tertiles = parse_tertiles(o.fixed_tertiles);
    }
    std::vector<Stage> st{Stage::stats};
    with_corpus(c, o, st);
    return run(c, st);
  });

  auto* classify = app.add_subcommand("classify", "Label questions as general or EHR-dependent");
  classify->add_option("--corpus", o.corpus, "Corpus file");
  classify->add_option("--model", o.model, "Classifier model")->required();
  bind(classify, [&] {
    auto c = base_config(app, g);
    c.classify_model = o.model;
    std::vector<Stage> st{Stage::classify};
    with_corpus(c, o, st);
    return run(c, st);
  });

  auto* edit = app.add_subcommand("edit", "Edit physician responses for empathy");
  edit->add_option("--corpus", o.corpus, "Corpus file");
  edit->add_option("--mode", o.mode, "simple or refined")->default_val("simple");
  edit->add_option("--level", o.level, "standard, high or extreme")->default_val("standard");
  edit->add_option("--model", o.model, "Editing model")->required();
  edit->add_flag("--force", o.force, "Regenerate existing variants");
  bind(edit, [&] {
    auto c = base_config(app, g);
    c.edit_model = o.model;
    c.edit_mode = parse_edit_mode(o.mode);
    c.level = parse_empathy_level(o.level);
    c.force = o.force;
    std::vector<Stage> st{Stage::edit};
    with_corpus(c, o, st);
    return run(c, st);
  });

  auto* generate = app.add_subcommand("generate", "Answer questions directly, without the physician response");
  generate->add_option("--corpus", o.corpus, "Corpus file");
  generate->add_option("--model", o.model, "Generating model")->required();
  generate->add_flag("--force", o.force, "Regenerate existing variants");
  bind(generate, [&] {
    auto c = base_config(app, g);
    c.generate_model = o.model;
    c.force = o.force;
    std::vector<Stage> st{Stage::generate};
    with_corpus(c, o, st);
    return run(c, st);
  });

  auto* rank = app.add_subcommand("rank", "Three-way empathy comparison of two response sets");
  rank->add_option("--corpus", o.corpus, "Corpus file");
  rank->add_option("--a", o.a, "Side A, provenance[:model]")->required();
  rank->add_option("--b", o.b, "Side B, provenance[:model]")->required();
  rank->add_option("--judge", o.judges, "Judge model (repeat for a majority-vote ensemble)")->required();
  rank->add_flag("--no-debias", o.no_debias, "Judge a single presentation order");
  bind(rank, [&] {
    auto c = base_config(app, g);
    c.rank_a = o.a;
    c.rank_b = o.b;
    c.judge_models = o.judges;
    c.debias = !o.no_debias;
    std::vector<Stage> st{Stage::rank};
    with_corpus(c, o, st);
    return run(c, st);
  });

  auto* align = app.add_subcommand("align", "Agreement between model judgments and human labels");
  align->add_option("--judgments", o.judgments, "judgments.jsonl (default: artifact directory)");
  align->add_option("--human", o.human, "human_labels.jsonl")->required();
  bind(align, [&] {
    auto c = base_config(app, g);
    c.judgments = o.judgments;
    c.human_labels = o.human;
    return run(c, {Stage::align});
  });

  auto* validate = app.add_subcommand("validate", "Precision of fact flags and category coverage");
  validate->add_option("--flags", o.flags, "Reviewed flags (flags.jsonl)");
  validate->add_option("--expert-flags", o.expert_flags, "Expert fabrication categories per response");
  validate->add_option("--mapped-facts", o.mapped_facts, "Flagged facts mapped to categories");
  bind(validate, [&] {
    auto c = base_config(app, g);
    c.flags = o.flags;
    c.expert_flags = o.expert_flags;
    c.mapped_facts = o.mapped_facts;
    return run(c, {Stage::validate});
  });

  auto* factcheck = app.add_subcommand("factcheck", "Fact decomposition and bidirectional entailment");
  factcheck->require_subcommand(0, 1);
  factcheck->add_option("--corpus", o.corpus, "Corpus file");
  factcheck->add_option("--original", o.original, "Original side")->default_val("physician");
  factcheck->add_option("--edited", o.edited, "Edited side, provenance:model");
  factcheck->add_option("--model", o.model, "Extraction and entailment model");
  factcheck->add_option("--entail-model", o.entail_model, "Separate entailment model");
  factcheck->add_option("--edge-rule", o.edge_rule, "literal or vacuous")->default_val("literal");
  factcheck->add_flag("--no-dedup", o.no_dedup, "Keep repeated facts");
  auto fact_config = [&] {
    auto c = base_config(app, g);
    c.fact_model = o.model;
    c.entail_model = o.entail_model;
    c.fact_original = o.original;
    c.edge_rule = parse_edge_rule(o.edge_rule);
    c.dedup = !o.no_dedup;
    return c;
  };
  auto* sweep = factcheck->add_subcommand("sweep", "Fact metrics across empathy levels");
  sweep->add_option("--levels", o.levels, "Comma-separated levels")->default_val("standard,high,extreme");
  sweep->add_option("--edit-model", o.edit_model, "Editing model")->required();
  factcheck->callback([&, sweep] {
    if (sweep->parsed()) return;
    action = [&] {
    auto c = fact_config();
    if (c.fact_model.empty()) throw ConfigError("factcheck needs --model");
    c.fact_edited = o.edited;
    std::vector<Stage> st{Stage::factcheck};
    with_corpus(c, o, st);
    return run(c, st);
    };
  });
  bind(sweep, [&] {
    auto c = fact_config();
    if (c.fact_model.empty()) throw ConfigError("factcheck sweep needs --model");
    c.edit_model = o.edit_model;
    c.sweep_levels = parse_levels(o.levels);
    std::vector<Stage> st{Stage::sweep};
    with_corpus(c, o, st);
    return run(c, st);
  });

  auto* report = app.add_subcommand("report", "Tables and exports from the artifact directory");
  report->add_option("--format", o.report_format, "md, csv or json")->default_val("md");
  report->add_option("--out", o.out, "Output file (directory for csv)");
  bind(report, [&] {
    auto c = base_config(app, g);
    c.report_format = o.report_format.empty() ? "md" : o.report_format;
    c.report_out = o.out;
    return run(c, {Stage::report});
  });

  auto* prompts = app.add_subcommand("prompts", "Inspect prompt templates");
  prompts->require_subcommand(1);
  bind(prompts->add_subcommand("list", "Template names and versions"), [&] {
    auto kit = load_prompts(base_config(app, g));
    for (auto n : kit.names()) std::cout << to_string(n) << "@" << kit.get(n).version << "\n";
    return 0;
  });
  auto* show = prompts->add_subcommand("show", "Print one template");
  show->add_option("name", o.prompt_name, "Template name")->required();
  bind(show, [&] {
    auto kit = load_prompts(base_config(app, g));
    TemplateName name;
    try {
      name = parse_template_name(o.prompt_name);
    } catch (const PromptError& e) {
      throw ConfigError(e.what());
    }
    std::cout << kit.get(name).body << "\n";
    return 0;
  });
  bind(prompts->add_subcommand("checksum", "Template checksums"), [&] {
    std::cout << load_prompts(base_config(app, g)).checksums().dump(2) << "\n";
    return 0;
  });

  auto* annotate = app.add_subcommand("annotate", "Human annotation service");
  annotate->require_subcommand(1);
  auto* serve = annotate->add_subcommand("serve", "Serve the annotation API");
  serve->add_option("--tasks", o.tasks_dir, "Task directory")->required();
  serve->add_option("--port", o.port, "Port")->default_val(8080);
  serve->add_option("--host", o.host, "Bind address")->default_val("127.0.0.1");
  serve->add_option("--static", o.static_dir, "Directory of UI assets served at /");
  bind(serve, [&] {
    AnnotationStore store(o.tasks_dir);
    std::optional<fs::path> assets;
    if (!o.static_dir.empty()) assets = o.static_dir;
    AnnotationServer server(store, assets);
    if (!server.bind(o.host, o.port)) throw ConfigError("cannot bind " + o.host + ":" + std::to_string(o.port));
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "serving " << store.tasks().size() << " tasks on http://" << o.host << ":" << o.port << std::endl;
    server.serve();
    g_server = nullptr;
    return 0;
  });
  auto* make_tasks = annotate->add_subcommand("make-tasks", "Build annotation tasks from artifacts");
  make_tasks->add_option("--tasks", o.tasks_dir, "Output task directory")->required();
  make_tasks->add_option("--kind", o.kind, "empathy_pair or fact_review")->default_val("empathy_pair");
  make_tasks->add_option("--a", o.a, "empathy_pair side A / fact_review original")->default_val("physician");
  make_tasks->add_option("--b", o.b, "empathy_pair side B / fact_review edited")->required();
  bind(make_tasks, [&] {
    auto c = base_config(app, g);
    auto corpus = load_corpus(c.artifact_dir / artifact::kCorpus, CorpusFormat::jsonl);
    auto variants = VariantStore::load(c.artifact_dir / artifact::kVariants);
    auto a = VariantSpec::parse(o.a);
    auto b = VariantSpec::parse(o.b);
    std::vector<AnnotationTask> tasks;
    if (parse_task_kind(o.kind) == TaskKind::empathy_pair) {
      tasks = make_empathy_tasks(corpus, variants, a, b, c.seed);
    } else {
      std::vector<AtomicFactSet> facts;
      for (const auto& r : read_jsonl(c.artifact_dir / artifact::kFacts)) facts.push_back(fact_set_from_json(r));
      std::vector<EntailmentVerdict> verdicts;
      for (const auto& r : read_jsonl(c.artifact_dir / artifact::kEntailments)) verdicts.push_back(verdict_from_json(r));
      tasks = make_fact_review_tasks(corpus, variants, facts, verdicts, a, b, c.seed);
    }
    fs::create_directories(o.tasks_dir);
    write_tasks(o.tasks_dir, tasks);
    std::cout << tasks.size() << " " << o.kind << " tasks written to " << o.tasks_dir << "\n";
    return 0;
  });
  auto* export_cmd = annotate->add_subcommand("export", "Write human labels or reviewed flags");
  export_cmd->add_option("--tasks", o.tasks_dir, "Task directory")->required();
  export_cmd->add_option("--kind", o.export_kind, "empathy or fact_review")->default_val("empathy");
  export_cmd->add_option("--out", o.out, "Output directory (default: task directory)");
  bind(export_cmd, [&] {
    AnnotationStore store(o.tasks_dir);
    for (const auto& p : write_export(store, parse_task_kind(o.export_kind), o.out.empty() ? o.tasks_dir : o.out))
      std::cout << p.string() << "\n";
    return 0;
  });

  auto* run_cmd = app.add_subcommand("run", "Run several stages from a configuration");
  run_cmd->add_option("--stages", o.stages, "Comma-separated stages, or all")->required();
  bind(run_cmd, [&] { return run(base_config(app, g), parse_stages(o.stages)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    return action ? action() : 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StageError& e) {
    std::cerr << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
}
