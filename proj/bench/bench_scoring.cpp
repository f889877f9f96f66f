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

// Serial vs OpenMP timings for the corpus scoring and statistics kernels.
//
//   bench_scoring [pairs] [exchanges] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "emfact/corpus.hpp"
#include "emfact/factcheck.hpp"

using namespace emfact;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<PairFactReport> random_pairs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(0, 40);
  std::vector<PairFactReport> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = size(rng), e = size(rng);
    auto p = c ? std::uniform_int_distribution<int>(0, c)(rng) : 0;
    auto g = e ? std::uniform_int_distribution<int>(0, e)(rng) : 0;
    auto r = score_counts(c, p, e, g);
    r.exchange_id = "x" + std::to_string(i);
    out.push_back(r);
  }
  return out;
}

Corpus random_corpus(std::size_t n, std::uint64_t seed) {
  static const char* words[] = {"the", "patient", "reports", "mild", "pain.", "Please", "call", "us", "if", "fever",
                                "persists.", "Results", "look", "normal!", "Any", "questions?"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(5, 120), w(0, 15);
  Corpus out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    QAExchange ex;
    ex.id = "q" + std::to_string(i);
    for (int k = len(rng); k > 0; --k) ex.patient_question += std::string(words[w(rng)]) + " ";
    for (int k = len(rng); k > 0; --k) ex.physician_response += std::string(words[w(rng)]) + " ";
    out.push_back(std::move(ex));
  }
  return out;
}

template <typename Fn>
double best_ms(int repeats, Fn fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n_pairs = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 2'000'000;
  std::size_t n_exchanges = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 50'000;
  int repeats = argc > 3 ? std::atoi(argv[3]) : 5;

  std::printf("threads: %d\n", omp_get_max_threads());

  auto pairs = random_pairs(n_pairs, 7);
  CorpusFactReport serial, parallel;
  double ts = best_ms(repeats, [&] { serial = score_corpus_serial(pairs); });
  double tp = best_ms(repeats, [&] { parallel = score_corpus(pairs); });
  bool same = serial.micro_recall == parallel.micro_recall && serial.micro_precision == parallel.micro_precision &&
              serial.macro_recall == parallel.macro_recall && serial.macro_precision == parallel.macro_precision;
  std::printf("score_corpus   %9zu pairs      serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx   identical %s\n",
              n_pairs, ts, tp, ts / tp, same ? "yes" : "NO");

  auto corpus = random_corpus(n_exchanges, 11);
  CorpusStats s1, s2;
  ts = best_ms(repeats, [&] { s1 = compute_stats_serial(corpus); });
  tp = best_ms(repeats, [&] { s2 = compute_stats(corpus); });
  same = s1.response_words.mean == s2.response_words.mean && s1.question_sentences.stddev == s2.question_sentences.stddev &&
         s1.response_length_tertiles.low == s2.response_length_tertiles.low;
  std::printf("compute_stats  %9zu exchanges  serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx   identical %s\n",
              n_exchanges, ts, tp, ts / tp, same ? "yes" : "NO");
  return same ? 0 : 1;
}
