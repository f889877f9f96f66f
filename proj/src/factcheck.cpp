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

#include "emfact/factcheck.hpp"

#include <algorithm>
#include <unordered_set>

#include "emfact/editor.hpp"
#include "emfact/error.hpp"
#include "emfact/gateway.hpp"
#include "emfact/prompts.hpp"
#include "emfact/text.hpp"

namespace emfact {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Decomposition

std::vector<std::string> split_facts(const std::string& reply, bool dedup) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (auto& piece : text::split(reply, "//")) {
    auto fact = text::trimmed(piece);
    if (fact.empty()) continue;
    if (dedup && !seen.insert(text::normalize(fact)).second) continue;
    out.push_back(std::move(fact));
  }
  return out;
}

bool looks_like_refusal(const std::string& reply) {
  auto t = text::to_lower(text::trim(reply));
  if (t.find("//") != std::string::npos) return false;
  static const char* kOpeners[] = {"i'm sorry", "i am sorry", "sorry,", "i cannot", "i can't", "i can not",
                                   "as an ai", "i'm unable", "i am unable", "there are no medical facts",
                                   "no medical facts"};
  if (t == "none" || t == "none.") return true;
  for (const char* o : kOpeners)
    if (t.rfind(o, 0) == 0) return true;
  return false;
}

AtomicFactSet decompose(const ResponseVariant& variant, Gateway& gateway, const PromptKit& prompts,
                        const std::string& extraction_model, bool dedup) {
  if (text::trim(variant.text).empty()) throw Error("cannot decompose empty variant " + variant.ref());
  AtomicFactSet out;
  out.source_ref = variant.ref();
  out.extraction_model = extraction_model;
  auto prompt = prompts.render(TemplateName::fact_extract, {{"text", variant.text}});
  out.raw_reply = gateway.complete(gateway.make_request(extraction_model, "extract", prompt)).text;
  if (looks_like_refusal(out.raw_reply)) {
    out.refusal = true;
    return out;
  }
  out.facts = split_facts(strip_reply(out.raw_reply), dedup);
  return out;
}

json to_json(const AtomicFactSet& f) {
  json j = {{"variant_ref", f.source_ref},
            {"facts", f.facts},
            {"extraction_model", f.extraction_model},
            {"raw_reply", f.raw_reply}};
  if (f.refusal) j["refusal"] = true;
  return j;
}

AtomicFactSet fact_set_from_json(const json& j) {
  try {
    AtomicFactSet f;
    f.source_ref = j.at("variant_ref").get<std::string>();
    f.facts = j.at("facts").get<std::vector<std::string>>();
    f.extraction_model = j.value("extraction_model", std::string());
    f.raw_reply = j.value("raw_reply", std::string());
    f.refusal = j.value("refusal", false);
    return f;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed fact set: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Entailment

namespace {

// End of the balanced {...} starting at `start`, honoring JSON string quoting.
std::size_t matching_brace(const std::string& s, std::size_t start) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '"' || c == '\'') quote = c;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::string::npos;
}

std::optional<int> prediction_of(const json& obj) {
  if (!obj.is_object() || !obj.contains("entailment_prediction")) return std::nullopt;
  const auto& v = obj["entailment_prediction"];
  if (v.is_number_integer() || v.is_number_unsigned()) {
    auto i = v.get<std::int64_t>();
    if (i == 0 || i == 1) return static_cast<int>(i);
  } else if (v.is_number_float()) {
    auto d = v.get<double>();
    if (d == 0.0 || d == 1.0) return static_cast<int>(d);
  } else if (v.is_string()) {
    auto s = text::trimmed(v.get<std::string>());
    if (s == "0" || s == "1") return s == "1" ? 1 : 0;
  } else if (v.is_boolean()) {
    return v.get<bool>() ? 1 : 0;
  }
  return std::nullopt;
}

}  // namespace

std::optional<int> parse_entailment_reply(const std::string& reply) {
  for (std::size_t pos = reply.find('{'); pos != std::string::npos; pos = reply.find('{', pos + 1)) {
    auto end = matching_brace(reply, pos);
    if (end == std::string::npos) break;
    auto candidate = reply.substr(pos, end - pos + 1);
    for (const auto& attempt : {candidate, text::replace_all(candidate, "'", "\"")}) {
      auto parsed = json::parse(attempt, nullptr, false);
      if (parsed.is_discarded()) continue;
      if (auto p = prediction_of(parsed)) return p;
    }
  }
  return std::nullopt;
}

EntailmentVerdict check_entailment(const std::string& premise, const std::string& hypothesis, Gateway& gateway,
                                   const PromptKit& prompts, const std::string& model) {
  if (text::trim(premise).empty() || text::trim(hypothesis).empty())
    throw Error("entailment needs a nonempty premise and hypothesis");
  auto prompt = prompts.render(TemplateName::entail, {{"premise", premise}, {"hypothesis", hypothesis}});
  EntailmentVerdict v;
  v.hypothesis = hypothesis;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto req = gateway.make_request(model, "entail", prompt);
    req.attempt = attempt;
    v.raw_reply = gateway.complete(req).text;
    if (auto p = parse_entailment_reply(v.raw_reply)) {
      v.prediction = *p;
      return v;
    }
  }
  v.prediction = 0;
  v.parse_failed = true;
  return v;
}

json to_json(const EntailmentVerdict& v) {
  return {{"premise_ref", v.premise_ref},
          {"hypothesis", v.hypothesis},
          {"prediction", v.prediction},
          {"parse_failed", v.parse_failed},
          {"raw_reply", v.raw_reply}};
}

EntailmentVerdict verdict_from_json(const json& j) {
  try {
    EntailmentVerdict v;
    v.premise_ref = j.at("premise_ref").get<std::string>();
    v.hypothesis = j.at("hypothesis").get<std::string>();
    v.prediction = j.at("prediction").get<int>();
    if (v.prediction != 0 && v.prediction != 1) throw ArtifactError("entailment prediction must be 0 or 1");
    v.parse_failed = j.value("parse_failed", false);
    v.raw_reply = j.value("raw_reply", std::string());
    return v;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed entailment record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Length analysis

Quartiles describe(std::vector<double> values) {
  Quartiles q;
  if (values.empty()) return q;
  double sum = 0;
  for (double v : values) sum += v;
  q.mean = sum / static_cast<double>(values.size());
  q.q1 = percentile(values, 0.25);
  q.median = percentile(values, 0.5);
  q.q3 = percentile(values, 0.75);
  return q;
}

FactRatioAnalysis fact_ratio_analysis(std::span<const PairFactReport> pairs,
                                      const std::map<std::string, double>& lengths, const Tertiles& tertiles) {
  FactRatioAnalysis out;
  out.tertiles = tertiles;
  struct Acc {
    std::vector<double> precision, recall, ratio;
    std::size_t excluded = 0;
  };
  std::map<LengthBand, Acc> acc{{LengthBand::short_, {}}, {LengthBand::medium, {}}, {LengthBand::long_, {}}};
  for (const auto& p : pairs) {
    auto it = lengths.find(p.exchange_id);
    if (it == lengths.end()) throw Error("no response length for exchange '" + p.exchange_id + "'");
    auto& a = acc[assign_band(it->second, tertiles)];
    a.precision.push_back(p.precision);
    a.recall.push_back(p.recall);
    if (p.n_original == 0) {
      out.fact_ratios.push_back(std::nullopt);
      ++a.excluded;
      ++out.ratio_excluded;
    } else {
      double r = static_cast<double>(p.n_edited) / static_cast<double>(p.n_original);
      out.fact_ratios.push_back(r);
      a.ratio.push_back(r);
    }
  }
  for (auto& [band, a] : acc) {
    BandStats s;
    s.band = band;
    s.n_pairs = a.precision.size();
    s.precision = describe(a.precision);
    s.recall = describe(a.recall);
    s.fact_ratio = describe(a.ratio);
    s.ratio_excluded = a.excluded;
    out.bands.push_back(s);
  }
  return out;
}

json to_json(const FactRatioAnalysis& a) {
  auto q = [](const Quartiles& x) {
    return json{{"mean", x.mean}, {"q1", x.q1}, {"median", x.median}, {"q3", x.q3}};
  };
  json bands = json::array();
  for (const auto& b : a.bands)
    bands.push_back({{"band", to_string(b.band)},
                     {"n_pairs", b.n_pairs},
                     {"precision", q(b.precision)},
                     {"recall", q(b.recall)},
                     {"fact_ratio", q(b.fact_ratio)},
                     {"ratio_excluded", b.ratio_excluded}});
  json ratios = json::array();
  for (const auto& r : a.fact_ratios) ratios.push_back(r ? json(*r) : json(nullptr));
  return {{"tertiles", {{"low", a.tertiles.low}, {"high", a.tertiles.high}}},
          {"bands", bands},
          {"fact_ratios", ratios},
          {"ratio_excluded", a.ratio_excluded}};
}

// ---------------------------------------------------------------------------
// Orchestration

FactcheckRun run_factcheck(const Corpus& corpus, const VariantStore& variants, const VariantSpec& original,
                           const VariantSpec& edited, Gateway& gateway, const PromptKit& prompts,
                           const FactcheckOptions& options) {
  if (options.model.empty()) throw ConfigError("factcheck needs an extraction model");
  const std::string entail_model = options.entail_model.value_or(options.model);

  struct PairInput {
    const QAExchange* ex;
    ResponseVariant orig;
    ResponseVariant edit;
  };
  FactcheckRun run;
  std::vector<PairInput> inputs;
  for (const auto& ex : corpus) {
    std::optional<ResponseVariant> orig;
    if (original.provenance.kind == ProvenanceKind::physician) orig = physician_variant(ex);
    else if (auto* v = variants.find(ex.id, original)) orig = *v;
    const ResponseVariant* edit = variants.find(ex.id, edited);
    if (!orig || !edit) {
      run.missing.push_back(ex.id);
      continue;
    }
    inputs.push_back({&ex, *orig, *edit});
  }
  if (inputs.empty()) throw Error("no exchange has both " + original.str() + " and " + edited.str() + " variants");

  // Decompose both sides of every pair.
  run.fact_sets.resize(inputs.size() * 2);
  gateway.parallel_for(run.fact_sets.size(), [&](std::size_t k) {
    const auto& in = inputs[k / 2];
    run.fact_sets[k] = decompose(k % 2 == 0 ? in.orig : in.edit, gateway, prompts, options.model, options.dedup);
  });

  // One entailment job per (pair, direction, fact).
  struct Job {
    std::size_t pair;
    const ResponseVariant* premise;
    const std::string* hypothesis;
  };
  std::vector<Job> jobs;
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    offsets.push_back(jobs.size());
    for (const auto& fact : run.fact_sets[2 * i].facts) jobs.push_back({i, &inputs[i].edit, &fact});
    for (const auto& fact : run.fact_sets[2 * i + 1].facts) jobs.push_back({i, &inputs[i].orig, &fact});
  }
  offsets.push_back(jobs.size());
  run.verdicts.resize(jobs.size());
  gateway.parallel_for(jobs.size(), [&](std::size_t k) {
    const auto& job = jobs[k];
    auto v = check_entailment(job.premise->text, *job.hypothesis, gateway, prompts, entail_model);
    v.premise_ref = job.premise->ref();
    run.verdicts[k] = std::move(v);
  });

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& c = run.fact_sets[2 * i];
    const auto& c_edit = run.fact_sets[2 * i + 1];
    std::span<const EntailmentVerdict> all(run.verdicts);
    auto recall = all.subspan(offsets[i], c.facts.size());
    auto precision = all.subspan(offsets[i] + c.facts.size(), c_edit.facts.size());
    run.pairs.push_back(score_pair(inputs[i].ex->id, c, c_edit, recall, precision, options.edge_rule));
  }
  run.report = score_corpus(run.pairs, options.edge_rule);
  return run;
}

}  // namespace emfact
