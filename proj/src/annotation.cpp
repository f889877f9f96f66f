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

#include "emfact/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <random>
#include <sstream>

#include "emfact/artifacts.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(TaskKind k) { return k == TaskKind::fact_review ? "fact_review" : "empathy_pair"; }

TaskKind parse_task_kind(const std::string& s) {
  if (s == "empathy_pair" || s == "empathy") return TaskKind::empathy_pair;
  if (s == "fact_review") return TaskKind::fact_review;
  throw ConfigError("unknown task kind '" + s + "' (expected empathy_pair or fact_review)");
}

int AnnotationError::http_status() const {
  switch (kind_) {
    case Kind::bad_request: return 400;
    case Kind::unauthorized: return 401;
    case Kind::forbidden: return 403;
    case Kind::not_found: return 404;
    case Kind::conflict: return 409;
  }
  return 500;
}

json to_json(const AnnotationTask& t) {
  json j = {{"id", t.id}, {"kind", to_string(t.kind)}, {"exchange_id", t.exchange_id}, {"seed", t.seed}};
  if (t.kind == TaskKind::empathy_pair) {
    j["comparison"] = t.comparison;
    j["side_a"] = t.side_a;
    j["side_b"] = t.side_b;
    j["question"] = t.question;
    j["text_a"] = t.text_a;
    j["text_b"] = t.text_b;
    j["order"] = to_string(t.order);
  } else {
    j["original_ref"] = t.original_ref;
    j["edited_ref"] = t.edited_ref;
    j["original_text"] = t.original_text;
    j["edited_text"] = t.edited_text;
    json facts = json::array();
    for (const auto& f : t.facts) facts.push_back({{"fact", f.fact}, {"direction", to_string(f.direction)}});
    j["facts"] = facts;
  }
  return j;
}

AnnotationTask task_from_json(const json& j) {
  try {
    AnnotationTask t;
    t.id = j.at("id").get<std::string>();
    t.kind = parse_task_kind(j.at("kind").get<std::string>());
    t.exchange_id = j.at("exchange_id").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    if (t.kind == TaskKind::empathy_pair) {
      t.comparison = j.at("comparison").get<std::string>();
      t.side_a = j.at("side_a").get<std::string>();
      t.side_b = j.at("side_b").get<std::string>();
      t.question = j.at("question").get<std::string>();
      t.text_a = j.at("text_a").get<std::string>();
      t.text_b = j.at("text_b").get<std::string>();
      t.order = parse_presentation_order(j.at("order").get<std::string>());
    } else {
      t.original_ref = j.at("original_ref").get<std::string>();
      t.edited_ref = j.at("edited_ref").get<std::string>();
      t.original_text = j.at("original_text").get<std::string>();
      t.edited_text = j.at("edited_text").get<std::string>();
      for (const auto& f : j.at("facts"))
        t.facts.push_back({f.at("fact").get<std::string>(), parse_flag_direction(f.at("direction").get<std::string>())});
    }
    return t;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed task record: ") + e.what());
  }
}

json public_payload(const AnnotationTask& t, const std::string& status) {
  json p = {{"task_id", t.id}, {"kind", to_string(t.kind)}, {"status", status}};
  if (t.kind == TaskKind::empathy_pair) {
    bool ab = t.order == PresentationOrder::ab;
    p["question"] = t.question;
    p["first_response"] = ab ? t.text_a : t.text_b;
    p["second_response"] = ab ? t.text_b : t.text_a;
  } else {
    p["original_response"] = t.original_text;
    p["edited_response"] = t.edited_text;
    json facts = json::array();
    for (std::size_t i = 0; i < t.facts.size(); ++i)
      facts.push_back({{"index", i}, {"fact", t.facts[i].fact}, {"flag", to_string(t.facts[i].direction)}});
    p["facts"] = facts;
    json cats = json::array();
    for (auto c : all_fabrication_categories()) cats.push_back({{"key", to_string(c)}, {"label", display_name(c)}});
    p["categories"] = cats;
  }
  return p;
}

std::uint64_t task_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

PresentationOrder draw_order(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return (rng() >> 63) ? PresentationOrder::ba : PresentationOrder::ab;
}

namespace {

std::string task_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "t%04zu", index + 1);
  return buf;
}

std::optional<ResponseVariant> lookup(const QAExchange& ex, const VariantStore& variants, const VariantSpec& spec) {
  if (spec.provenance.kind == ProvenanceKind::physician) return physician_variant(ex);
  if (auto* v = variants.find(ex.id, spec)) return *v;
  return std::nullopt;
}

std::string now_utc() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<AnnotationTask> make_empathy_tasks(const Corpus& corpus, const VariantStore& variants,
                                               const VariantSpec& a, const VariantSpec& b, std::uint64_t seed) {
  std::vector<AnnotationTask> out;
  for (const auto& ex : corpus) {
    auto va = lookup(ex, variants, a);
    auto vb = lookup(ex, variants, b);
    if (!va || !vb) continue;
    AnnotationTask t;
    t.id = task_id(out.size());
    t.kind = TaskKind::empathy_pair;
    t.exchange_id = ex.id;
    t.seed = task_seed(seed, out.size());
    t.comparison = comparison_name(a.str(), b.str());
    t.side_a = va->ref();
    t.side_b = vb->ref();
    t.question = ex.patient_question;
    t.text_a = va->text;
    t.text_b = vb->text;
    t.order = draw_order(t.seed);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<AnnotationTask> make_fact_review_tasks(const Corpus& corpus, const VariantStore& variants,
                                                   const std::vector<AtomicFactSet>& fact_sets,
                                                   const std::vector<EntailmentVerdict>& verdicts,
                                                   const VariantSpec& original, const VariantSpec& edited,
                                                   std::uint64_t seed) {
  std::map<std::string, const AtomicFactSet*> facts_by_ref;
  for (const auto& f : fact_sets) facts_by_ref[f.source_ref] = &f;
  std::map<std::pair<std::string, std::string>, int> verdict;
  for (const auto& v : verdicts) verdict[{v.premise_ref, v.hypothesis}] = v.prediction;

  std::vector<AnnotationTask> out;
  for (const auto& ex : corpus) {
    auto vo = lookup(ex, variants, original);
    auto ve = lookup(ex, variants, edited);
    if (!vo || !ve) continue;
    auto fo = facts_by_ref.find(vo->ref());
    auto fe = facts_by_ref.find(ve->ref());
    if (fo == facts_by_ref.end() || fe == facts_by_ref.end()) continue;

    AnnotationTask t;
    t.kind = TaskKind::fact_review;
    t.exchange_id = ex.id;
    t.original_ref = vo->ref();
    t.edited_ref = ve->ref();
    t.original_text = vo->text;
    t.edited_text = ve->text;
    auto unsupported = [&](const std::string& premise, const std::string& fact) {
      auto it = verdict.find({premise, fact});
      if (it == verdict.end()) throw ArtifactError("no verdict for '" + fact + "' against " + premise);
      return it->second == 0;
    };
    for (const auto& f : fo->second->facts)
      if (unsupported(t.edited_ref, f)) t.facts.push_back({f, FlagDirection::not_preserved});
    for (const auto& f : fe->second->facts)
      if (unsupported(t.original_ref, f)) t.facts.push_back({f, FlagDirection::added});
    if (t.facts.empty()) continue;
    t.id = task_id(out.size());
    t.seed = task_seed(seed, out.size());
    out.push_back(std::move(t));
  }
  return out;
}

EmpathyLabel unmap_label(const std::string& shown, PresentationOrder order) {
  if (shown == "equal") return EmpathyLabel::equal;
  bool first = shown == "first_shown";
  if (!first && shown != "second_shown")
    throw AnnotationError(AnnotationError::Kind::bad_request,
                          "label must be first_shown, second_shown or equal, got '" + shown + "'");
  bool a_first = order == PresentationOrder::ab;
  return first == a_first ? EmpathyLabel::a_more : EmpathyLabel::b_more;
}

Submission submission_from_json(const json& j) {
  auto bad = [](const std::string& msg) { return AnnotationError(AnnotationError::Kind::bad_request, msg); };
  if (!j.is_object()) throw bad("submission must be a JSON object");
  Submission s;
  auto str = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw bad(std::string("missing field '") + key + "'");
      return {};
    }
    if (!j[key].is_string()) throw bad(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  s.task_id = str("task_id", true);
  s.annotator_id = str("annotator_id", true);
  s.submitted_at = str("submitted_at", false);
  if (j.contains("label")) {
    auto label = str("label", true);
    if (label != "first_shown" && label != "second_shown" && label != "equal")
      throw bad("label must be first_shown, second_shown or equal, got '" + label + "'");
    s.label = label;
  }
  if (j.contains("facts")) {
    if (!j["facts"].is_array()) throw bad("'facts' must be an array");
    for (const auto& f : j["facts"]) {
      if (!f.is_object() || !f.contains("index") || !f["index"].is_number_unsigned())
        throw bad("each fact decision needs a nonnegative integer 'index'");
      FactDecision d;
      d.index = f["index"].get<std::size_t>();
      auto decision = f.value("decision", std::string());
      if (decision != "confirmed" && decision != "rejected")
        throw bad("fact decision must be confirmed or rejected, got '" + decision + "'");
      d.confirmed = decision == "confirmed";
      if (f.contains("category") && !f["category"].is_null()) {
        if (!f["category"].is_string()) throw bad("category must be a string");
        try {
          d.category = parse_fabrication_category(f["category"].get<std::string>());
        } catch (const ArtifactError& e) {
          throw bad(e.what());
        }
      }
      s.facts.push_back(d);
    }
  }
  if (s.label && !s.facts.empty()) throw bad("a submission carries either a label or fact decisions, not both");
  return s;
}

json to_json(const Submission& s) {
  json j = {{"task_id", s.task_id}, {"annotator_id", s.annotator_id}};
  if (s.label) j["label"] = *s.label;
  if (!s.facts.empty()) {
    json facts = json::array();
    for (const auto& d : s.facts) {
      json f = {{"index", d.index}, {"decision", d.confirmed ? "confirmed" : "rejected"}};
      if (d.category) f["category"] = to_string(*d.category);
      facts.push_back(f);
    }
    j["facts"] = facts;
  }
  if (!s.submitted_at.empty()) j["submitted_at"] = s.submitted_at;
  return j;
}

// ---------------------------------------------------------------------------

AnnotationStore::AnnotationStore(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::exists(dir_ / kTasksFile)) throw ArtifactError("no " + std::string(kTasksFile) + " in " + dir_.string());
  for (const auto& r : read_jsonl(dir_ / kTasksFile)) {
    auto t = task_from_json(r);
    if (task_index_.count(t.id)) throw ArtifactError("duplicate task id " + t.id);
    task_index_[t.id] = tasks_.size();
    tasks_.push_back(std::move(t));
  }
  if (fs::exists(dir_ / kAnnotatorsFile)) {
    auto j = read_json(dir_ / kAnnotatorsFile);
    if (!j.is_object()) throw ConfigError(std::string(kAnnotatorsFile) + " must map tokens to annotator ids");
    for (const auto& [token, id] : j.items()) {
      tokens_[token] = id.get<std::string>();
      annotators_.insert(id.get<std::string>());
    }
  }
  replay_journal();
}

std::optional<std::string> AnnotationStore::authenticate(const std::string& token) const {
  auto it = tokens_.find(token);
  if (it == tokens_.end()) return std::nullopt;
  return it->second;
}

bool AnnotationStore::known_annotator(const std::string& id) const { return annotators_.count(id) > 0; }

const AnnotationTask& AnnotationStore::task(const std::string& id) const {
  auto it = task_index_.find(id);
  if (it == task_index_.end()) throw AnnotationError(AnnotationError::Kind::not_found, "unknown task " + id);
  return tasks_[it->second];
}

void AnnotationStore::replay_journal() {
  auto path = dir_ / kJournalFile;
  if (!fs::exists(path)) return;
  auto content = read_text(path);
  std::size_t pos = 0, lineno = 0, valid_end = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) {
      // Unterminated tail: a write that never completed, so it was never acked.
      break;
    }
    auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (!text::trim(line).empty()) {
      Submission s;
      try {
        s = submission_from_json(json::parse(line));
      } catch (const std::exception& e) {
        throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      apply(s);
    }
    valid_end = pos;
  }
  if (valid_end < content.size()) fs::resize_file(path, valid_end);
}

json AnnotationStore::canonical(const Submission& s) const {
  auto j = to_json(s);
  j.erase("submitted_at");
  return j;
}

void AnnotationStore::apply(const Submission& s) {
  auto key = std::make_pair(s.task_id, s.annotator_id);
  by_key_[key] = entries_.size();
  entries_.push_back({s, canonical(s)});
  auto it = assigned_.find(s.annotator_id);
  if (it != assigned_.end() && it->second == s.task_id) assigned_.erase(it);
}

void AnnotationStore::append_journal(const json& record) {
  auto line = record.dump() + "\n";
  auto path = (dir_ / kJournalFile).string();
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw ArtifactError("cannot open " + path + ": " + std::strerror(errno));
  std::size_t off = 0;
  while (off < line.size()) {
    auto n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw ArtifactError("write to " + path + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw ArtifactError("fsync of " + path + " failed: " + std::strerror(errno));
  }
  ::close(fd);
}

bool AnnotationStore::completed(const std::string& task_id, const std::string& annotator) const {
  std::lock_guard lock(mu_);
  return by_key_.count({task_id, annotator}) > 0;
}

std::size_t AnnotationStore::submission_count() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::optional<AnnotationTask> AnnotationStore::next_task(const std::string& annotator) {
  std::lock_guard lock(mu_);
  if (!known_annotator(annotator))
    throw AnnotationError(AnnotationError::Kind::forbidden, "unknown annotator " + annotator);
  if (auto it = assigned_.find(annotator); it != assigned_.end()) return task(it->second);
  for (const auto& t : tasks_) {
    if (by_key_.count({t.id, annotator})) continue;
    assigned_[annotator] = t.id;
    return t;
  }
  return std::nullopt;
}

SubmitOutcome AnnotationStore::submit(const Submission& s) {
  using K = AnnotationError::Kind;
  std::lock_guard lock(mu_);
  if (!known_annotator(s.annotator_id)) throw AnnotationError(K::forbidden, "unknown annotator " + s.annotator_id);
  const auto& t = task(s.task_id);

  if (t.kind == TaskKind::empathy_pair) {
    if (!s.label) throw AnnotationError(K::bad_request, "empathy_pair submissions need a label");
  } else {
    if (s.label) throw AnnotationError(K::bad_request, "fact_review submissions take fact decisions, not a label");
    std::vector<bool> seen(t.facts.size(), false);
    for (const auto& d : s.facts) {
      if (d.index >= t.facts.size())
        throw AnnotationError(K::bad_request, "fact index " + std::to_string(d.index) + " out of range");
      if (seen[d.index]) throw AnnotationError(K::bad_request, "fact index " + std::to_string(d.index) + " repeated");
      seen[d.index] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw AnnotationError(K::bad_request, "no decision for fact index " + std::to_string(i));
  }

  if (auto it = by_key_.find({s.task_id, s.annotator_id}); it != by_key_.end()) {
    if (entries_[it->second].canonical == canonical(s)) return SubmitOutcome::duplicate;
    throw AnnotationError(K::conflict, "task " + s.task_id + " already submitted by " + s.annotator_id);
  }

  Submission stored = s;
  if (stored.submitted_at.empty()) stored.submitted_at = now_utc();
  append_journal(to_json(stored));
  apply(stored);
  return SubmitOutcome::accepted;
}

std::map<std::string, std::vector<json>> AnnotationStore::export_records(TaskKind kind) const {
  std::lock_guard lock(mu_);
  std::map<std::string, std::vector<json>> files;
  if (kind == TaskKind::empathy_pair) {
    auto& labels = files["human_labels.jsonl"];
    for (const auto& e : entries_) {
      const auto& t = task(e.submission.task_id);
      if (t.kind != TaskKind::empathy_pair) continue;
      HumanLabel h{t.exchange_id, e.submission.annotator_id, unmap_label(*e.submission.label, t.order), t.comparison};
      labels.push_back(to_json(h));
    }
  } else {
    auto& flags = files["flags.jsonl"];
    auto& mapped = files["mapped_facts.jsonl"];
    for (const auto& e : entries_) {
      const auto& t = task(e.submission.task_id);
      if (t.kind != TaskKind::fact_review) continue;
      for (const auto& d : e.submission.facts) {
        const auto& f = t.facts[d.index];
        flags.push_back(to_json(FlagRecord{t.edited_ref, f.fact, f.direction, d.confirmed, e.submission.annotator_id}));
        if (d.confirmed && d.category)
          mapped.push_back({{"response_id", t.edited_ref}, {"category", to_string(*d.category)}, {"fact", f.fact}});
      }
    }
  }
  return files;
}

void write_tasks(const fs::path& dir, const std::vector<AnnotationTask>& tasks) {
  std::vector<json> records;
  for (const auto& t : tasks) records.push_back(to_json(t));
  write_jsonl(dir / AnnotationStore::kTasksFile, records);
}

std::vector<fs::path> write_export(const AnnotationStore& store, TaskKind kind, const fs::path& out_dir) {
  std::vector<fs::path> paths;
  for (const auto& [name, records] : store.export_records(kind)) {
    write_jsonl(out_dir / name, records);
    paths.push_back(out_dir / name);
  }
  return paths;
}

}  // namespace emfact
