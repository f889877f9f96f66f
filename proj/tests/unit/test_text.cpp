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

#include <doctest.h>

#include "emfact/text.hpp"

using namespace emfact;

TEST_CASE("trim and normalize") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::trim("   ").empty());
  CHECK(text::normalize("  The  Chest\tX-ray ") == "the chest x-ray");
}

TEST_CASE("word counts split on whitespace runs") {
  CHECK(text::count_words("") == 0);
  CHECK(text::count_words("one") == 1);
  CHECK(text::count_words("  one two\n\tthree  ") == 3);
}

TEST_CASE("sentence splitting") {
  auto s = text::split_sentences("Take it daily. Call us! Is it bad? ok");
  REQUIRE(s.size() == 4);
  CHECK(s[0] == "Take it daily.");
  CHECK(s[3] == "ok");
  // A period inside a token is not a boundary.
  CHECK(text::count_sentences("Dose is 2.5 mg. Done.") == 2);
  CHECK(text::count_sentences("   ") == 0);
  CHECK(text::count_sentences("No terminator") == 1);
}

TEST_CASE("utf8 length counts code points") {
  CHECK(text::utf8_length("abc") == 3);
  CHECK(text::utf8_length("caf\xC3\xA9") == 4);
  CHECK(text::utf8_length("\xE2\x80\x94") == 1);
}

TEST_CASE("split, join, replace") {
  auto parts = text::split("a // b //c", "//");
  REQUIRE(parts.size() == 3);
  CHECK(parts[2] == "c");
  CHECK(text::join({"x", "y"}, ", ") == "x, y");
  CHECK(text::replace_all("aXbXc", "X", "--") == "a--b--c");
}

TEST_CASE("sha256 known vector") {
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fixed decimals") {
  CHECK(text::fixed(96.93, 1) == "96.9");
  CHECK(text::fixed(0.9154, 2) == "0.92");
}
