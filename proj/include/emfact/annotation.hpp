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

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emfact/corpus.hpp"
#include "emfact/editor.hpp"
#include "emfact/emranker.hpp"
#include "emfact/error.hpp"
#include "emfact/factcheck.hpp"
#include "emfact/validation.hpp"

namespace emfact {

enum class TaskKind { empathy_pair, fact_review };
std::string to_string(TaskKind k);
TaskKind parse_task_kind(const std::string& s);

struct ReviewFact {
  std::string fact;
  FlagDirection direction = FlagDirection::added;
};

// Full server-side task record. Only public_payload() is ever sent to annotators.
struct AnnotationTask {
  std::string id;  // "t0001", ...
  TaskKind kind = TaskKind::empathy_pair;
  std::string exchange_id;
  std::uint64_t seed = 0;

  // empathy_pair
  std::string comparison;
  std::string side_a;  // variant refs
  std::string side_b;
  std::string question;
  std::string text_a;
  std::string text_b;
  PresentationOrder order = PresentationOrder::ab;

  // fact_review
  std::string original_ref;
  std::string edited_ref;
  std::string original_text;
  std::string edited_text;
  std::vector<ReviewFact> facts;
};

nlohmann::json to_json(const AnnotationTask& t);
AnnotationTask task_from_json(const nlohmann::json& j);

// What the UI sees. Empathy payloads carry the two texts in display order and
// nothing that names a provenance or model.
nlohmann::json public_payload(const AnnotationTask& t, const std::string& status);

// Display order drawn from a per-task seed derived from (seed, task index).
std::uint64_t task_seed(std::uint64_t seed, std::size_t index);
PresentationOrder draw_order(std::uint64_t task_seed);

std::vector<AnnotationTask> make_empathy_tasks(const Corpus& corpus, const VariantStore& variants,
                                               const VariantSpec& a, const VariantSpec& b, std::uint64_t seed);

// One task per edited response with at least one unsupported fact: original
// facts not entailed by the edit (not_preserved) and edited facts not entailed
// by the original (added).
std::vector<AnnotationTask> make_fact_review_tasks(const Corpus& corpus, const VariantStore& variants,
                                                   const std::vector<AtomicFactSet>& fact_sets,
                                                   const std::vector<EntailmentVerdict>& verdicts,
                                                   const VariantSpec& original, const VariantSpec& edited,
                                                   std::uint64_t seed);

struct FactDecision {
  std::size_t index = 0;
  bool confirmed = false;
  std::optional<FabricationCategory> category;
};

struct Submission {
  std::string task_id;
  std::string annotator_id;
  std::optional<std::string> label;  // first_shown | second_shown | equal
  std::vector<FactDecision> facts;
  std::string submitted_at;          // journal only
};

// Throws AnnotationError(bad_request) on vocabulary or shape violations.
Submission submission_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Submission& s);

// first_shown/second_shown/equal back to side terms using the stored order.
EmpathyLabel unmap_label(const std::string& shown_label, PresentationOrder order);

class AnnotationError : public Error {
 public:
  enum class Kind { bad_request, unauthorized, forbidden, not_found, conflict };
  AnnotationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  int http_status() const;

 private:
  Kind kind_;
};

enum class SubmitOutcome { accepted, duplicate };

// Task directory layout:
//   tasks.jsonl      task records (written by make-tasks)
//   journal.jsonl    append-only submissions, fsynced before ack
//   annotators.json  {"<token>": "<annotator id>"}
class AnnotationStore {
 public:
  static inline const char* kTasksFile = "tasks.jsonl";
  static inline const char* kJournalFile = "journal.jsonl";
  static inline const char* kAnnotatorsFile = "annotators.json";

  explicit AnnotationStore(std::filesystem::path dir);

  // Annotator id for a bearer token; nullopt when unknown.
  std::optional<std::string> authenticate(const std::string& token) const;
  bool known_annotator(const std::string& id) const;

  // Task currently assigned to the annotator, else the first task they have not
  // completed. nullopt when everything is done.
  std::optional<AnnotationTask> next_task(const std::string& annotator);
  SubmitOutcome submit(const Submission& s);

  // Export files by name: empathy -> human_labels.jsonl;
  // fact_review -> flags.jsonl and mapped_facts.jsonl.
  std::map<std::string, std::vector<nlohmann::json>> export_records(TaskKind kind) const;

  const std::vector<AnnotationTask>& tasks() const { return tasks_; }
  std::size_t submission_count() const;
  bool completed(const std::string& task_id, const std::string& annotator) const;

 private:
  struct Entry {
    Submission submission;
    nlohmann::json canonical;
  };
  void replay_journal();
  void apply(const Submission& s);
  void append_journal(const nlohmann::json& record);
  const AnnotationTask& task(const std::string& id) const;
  nlohmann::json canonical(const Submission& s) const;

  std::filesystem::path dir_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::map<std::string, std::string> tokens_;
  std::set<std::string> annotators_;
  std::vector<Entry> entries_;  // journal order
  std::map<std::pair<std::string, std::string>, std::size_t> by_key_;
  std::map<std::string, std::string> assigned_;
  mutable std::mutex mu_;
};

void write_tasks(const std::filesystem::path& dir, const std::vector<AnnotationTask>& tasks);

// Writes the export files into `out_dir`; returns their paths.
std::vector<std::filesystem::path> write_export(const AnnotationStore& store, TaskKind kind,
                                                const std::filesystem::path& out_dir);

}  // namespace emfact
