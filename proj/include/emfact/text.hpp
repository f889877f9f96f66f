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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace emfact::text {

std::string_view trim(std::string_view s);
std::string trimmed(std::string_view s);

// ASCII casefold plus whitespace collapse; used as the dedup key for facts.
std::string normalize(std::string_view s);

std::string to_lower(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Whitespace tokenization.
std::size_t count_words(std::string_view s);

// Sentences end at '.', '!' or '?' followed by whitespace or end of text.
// Every nonempty (after trimming) segment counts, including an unterminated tail.
std::vector<std::string> split_sentences(std::string_view s);
std::size_t count_sentences(std::string_view s);

// Number of UTF-8 code points. Invalid continuation bytes are counted as-is.
std::size_t utf8_length(std::string_view s);

std::vector<std::string> split(std::string_view s, std::string_view delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

std::string sha256_hex(std::string_view bytes);

// printf-style fixed decimal formatting ("%.*f").
std::string fixed(double value, int decimals);

}  // namespace emfact::text
