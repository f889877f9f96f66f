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

#include "emfact/artifacts.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "emfact/error.hpp"
#include "emfact/text.hpp"

namespace emfact {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ArtifactError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out.push_back('\n');
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& records) { write_text_atomic(path, to_jsonl(records)); }

void upsert_jsonl(const fs::path& path, const std::vector<json>& records,
                  const std::function<std::string(const json&)>& key) {
  std::vector<json> merged = fs::exists(path) ? read_jsonl(path) : std::vector<json>{};
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < merged.size(); ++i) index[key(merged[i])] = i;
  for (const auto& r : records) {
    auto k = key(r);
    if (auto it = index.find(k); it != index.end()) {
      merged[it->second] = r;
    } else {
      index[k] = merged.size();
      merged.push_back(r);
    }
  }
  write_jsonl(path, merged);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

}  // namespace emfact
