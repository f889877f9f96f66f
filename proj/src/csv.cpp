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

#include "emfact/corpus.hpp"
#include "emfact/error.hpp"

namespace emfact {

std::vector<CsvRecord> parse_csv(const std::string& content) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_started = false;
  std::size_t line = 1;
  std::size_t quote_line = 0;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = CsvRecord{};
    record_started = false;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (!record_started) {
      current.line = line;
      record_started = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted)
          throw CorpusError("stray quote inside unquoted CSV field", line);
        in_quotes = true;
        field_was_quoted = true;
        quote_line = line;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < content.size() && content[i + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field_was_quoted) throw CorpusError("text after closing quote in CSV field", line);
        field.push_back(c);
    }
  }
  if (in_quotes) throw CorpusError("unterminated quoted CSV field", quote_line);
  if (record_started) end_record();
  return records;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace emfact
