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

// Shared fixtures for the unit and acceptance suites.
#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "emfact/backends.hpp"
#include "emfact/corpus.hpp"
#include "emfact/gateway.hpp"

namespace emfact::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(EMFACT_FIXTURE_DIR) / name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("emfact-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// Plain-sentence synthetic corpus. Sentences never contain "//" or the mock's
// prompt markers, so identity edits round-trip exactly.
inline Corpus synthetic_corpus(std::size_t n, std::uint64_t seed) {
  static const char* subjects[] = {"Your blood pressure", "The rash", "Your potassium level", "The scan",
                                   "Your cough",         "The biopsy", "Your thyroid panel",   "The swelling"};
  static const char* predicates[] = {"looks stable", "should improve within two weeks", "is slightly elevated",
                                     "needs a repeat check in one month", "does not need antibiotics",
                                     "is within the normal range", "may respond to ibuprofen",
                                     "warrants a visit if it worsens"};
  static const char* questions[] = {"Should I be worried about my results?", "Is it safe to keep exercising?",
                                    "Do I need to change my medication?", "When should I come back in?"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_sent(1, 9), pick(0, 7), q(0, 3);
  Corpus out;
  for (std::size_t i = 0; i < n; ++i) {
    QAExchange ex;
    ex.id = "ex" + std::to_string(1000 + i);
    ex.patient_question = std::string(questions[q(rng)]) + " I have had symptoms for " + std::to_string(i % 13 + 1) +
                          " days.";
    int k = n_sent(rng);
    for (int s = 0; s < k; ++s) {
      if (s) ex.physician_response += " ";
      ex.physician_response += std::string(subjects[pick(rng)]) + " " + predicates[pick(rng)] + " (item " +
                               std::to_string(s + 1) + ").";
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline GatewaySettings fast_settings(std::size_t parallelism = 4) {
  GatewaySettings s;
  s.parallelism = parallelism;
  s.retry.sleep = [](std::chrono::milliseconds) {};
  return s;
}

inline std::unique_ptr<Gateway> identity_gateway(const std::filesystem::path& cache_dir, std::size_t parallelism = 4) {
  return std::make_unique<Gateway>(load_mock_script(fixture("identity_mock.json")), ResponseCache(cache_dir),
                                   fast_settings(parallelism));
}

}  // namespace emfact::testing
