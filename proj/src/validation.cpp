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

#include "emfact/validation.hpp"

#include <fstream>
#include <set>

#include "emfact/error.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(FlagDirection d) { return d == FlagDirection::added ? "added" : "not_preserved"; }

FlagDirection parse_flag_direction(const std::string& s) {
  if (s == "added") return FlagDirection::added;
  if (s == "not_preserved") return FlagDirection::not_preserved;
  throw ArtifactError("unknown flag direction '" + s + "'");
}

json to_json(const FlagRecord& f) {
  json j = {{"variant_ref", f.variant_ref},
            {"fact", f.fact},
            {"direction", to_string(f.direction)},
            {"confirmed", f.confirmed}};
  if (!f.annotator_id.empty()) j["annotator_id"] = f.annotator_id;
  return j;
}

FlagRecord flag_from_json(const json& j) {
  try {
    FlagRecord f;
    f.variant_ref = j.value("variant_ref", std::string());
    f.fact = j.value("fact", std::string());
    f.direction = parse_flag_direction(j.at("direction").get<std::string>());
    f.confirmed = j.at("confirmed").get<bool>();
    f.annotator_id = j.value("annotator_id", std::string());
    return f;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed flag record: ") + e.what());
  }
}

std::vector<FlagPrecision> validation_tallies(const std::vector<FlagRecord>& flags) {
  std::vector<FlagPrecision> out{{FlagDirection::not_preserved, 0, 0}, {FlagDirection::added, 0, 0}};
  for (const auto& f : flags) {
    auto& t = out[f.direction == FlagDirection::added ? 1 : 0];
    ++t.flagged;
    t.confirmed += f.confirmed;
  }
  return out;
}

namespace {
struct CategoryInfo {
  FabricationCategory category;
  const char* key;
  const char* display;
};
constexpr CategoryInfo kCategories[] = {
    {FabricationCategory::follow_up_recommendation, "follow_up_recommendation", "Added follow-up recommendation"},
    {FabricationCategory::clinical_assumption, "clinical_assumption", "Clinical assumption/speculation"},
    {FabricationCategory::clinical_inaccuracy, "clinical_inaccuracy", "Clinical inaccuracy"},
    {FabricationCategory::unnecessary_advice, "unnecessary_advice", "Adds unnecessary advice"},
    {FabricationCategory::unnecessary_doubt_fear, "unnecessary_doubt_fear", "Adds unnecessary doubt/fear"},
    {FabricationCategory::false_assurance, "false_assurance", "False assurance"},
};
}  // namespace

std::string to_string(FabricationCategory c) {
  for (const auto& info : kCategories)
    if (info.category == c) return info.key;
  return "unknown";
}

std::string display_name(FabricationCategory c) {
  for (const auto& info : kCategories)
    if (info.category == c) return info.display;
  return "unknown";
}

FabricationCategory parse_fabrication_category(const std::string& s) {
  for (const auto& info : kCategories)
    if (s == info.key || s == info.display) return info.category;
  throw ArtifactError("unknown fabrication category '" + s + "'");
}

const std::vector<FabricationCategory>& all_fabrication_categories() {
  static const std::vector<FabricationCategory> all = [] {
    std::vector<FabricationCategory> v;
    for (const auto& info : kCategories) v.push_back(info.category);
    return v;
  }();
  return all;
}

CoverageReport category_coverage(const std::vector<ExpertFlag>& expert, const std::vector<MappedFact>& mapped) {
  std::set<std::pair<std::string, FabricationCategory>> instances;
  for (const auto& e : expert) instances.emplace(e.response_id, e.category);
  std::set<std::pair<std::string, FabricationCategory>> detected;
  for (const auto& m : mapped) detected.emplace(m.response_id, m.category);

  CoverageReport report;
  for (auto c : all_fabrication_categories()) report.categories.push_back({c, 0, 0});
  for (const auto& inst : instances) {
    auto& cc = report.categories[static_cast<std::size_t>(inst.second)];
    ++cc.total;
    if (detected.count(inst)) ++cc.detected;
  }
  for (const auto& cc : report.categories) {
    report.total += cc.total;
    report.detected += cc.detected;
  }
  return report;
}

json to_json(const FlagPrecision& p) {
  return {{"direction", to_string(p.direction)},
          {"flagged", p.flagged},
          {"confirmed", p.confirmed},
          {"precision", p.precision()}};
}

json to_json(const CoverageReport& r) {
  json cats = json::array();
  for (const auto& c : r.categories)
    cats.push_back({{"category", to_string(c.category)},
                    {"pattern", display_name(c.category)},
                    {"total", c.total},
                    {"detected", c.detected},
                    {"missed", c.missed()},
                    {"coverage", c.coverage()}});
  return {{"categories", cats}, {"total", r.total}, {"detected", r.detected}, {"overall", r.overall()}};
}

namespace {
template <typename Fn>
void for_each_record(const fs::path& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ArtifactError& e) {
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}
}  // namespace

std::vector<FlagRecord> load_flags(const fs::path& path) {
  std::vector<FlagRecord> out;
  for_each_record(path, [&](const json& j) { out.push_back(flag_from_json(j)); });
  return out;
}

std::vector<ExpertFlag> load_expert_flags(const fs::path& path) {
  std::vector<ExpertFlag> out;
  for_each_record(path, [&](const json& j) {
    out.push_back({j.at("response_id").get<std::string>(),
                   parse_fabrication_category(j.at("category").get<std::string>())});
  });
  return out;
}

std::vector<MappedFact> load_mapped_facts(const fs::path& path) {
  std::vector<MappedFact> out;
  for_each_record(path, [&](const json& j) {
    out.push_back({j.at("response_id").get<std::string>(),
                   parse_fabrication_category(j.at("category").get<std::string>()), j.value("fact", std::string())});
  });
  return out;
}

}  // namespace emfact
