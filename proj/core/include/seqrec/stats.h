// Copyright 2026 The seqrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/kv.h"

namespace seqrec {

using SymbolSequences = std::vector<std::vector<std::uint32_t>>;

struct StatsReport {
  std::size_t vocab = 0;
  std::size_t total = 0;
  double unigram_entropy = 0.0;  // bits
  double bigram_entropy = 0.0;   // H(next | current) in bits, within sequences
  double zipf_exponent = 0.0;    // minus the log-log slope over the top 80% of mass
  double singleton_bigram_fraction = 0.0;
  double repetition_rate = 0.0;
  std::array<std::size_t, 3> coverage{};  // symbols covering 50%, 90%, 99% of mass

  KeyValues to_key_values() const;  // `stats.*` keys
  static StatsReport from_key_values(const KeyValues& kv);
};

inline constexpr std::array<double, 3> kCoverageLevels{0.5, 0.9, 0.99};

// Throws UsageError when there are no symbols at all.
StatsReport corpus_statistics(std::span<const std::vector<std::uint32_t>> sequences);

// A ratio a/b; 0/0 is undefined and x/0 (x > 0) is infinite.
struct Ratio {
  double value = 1.0;
  bool defined = true;

  static Ratio of(double a, double b);
  std::string text() const;
};

struct ComparisonReport {
  StatsReport a;
  StatsReport b;
  Ratio entropy;
  Ratio vocab;
  Ratio singleton_bigram;
  std::string verdict;

  KeyValues to_key_values() const;
};

ComparisonReport compare_corpora(const StatsReport& a, const StatsReport& b);

enum class SymbolFormat {
  kInteractions,  // `user item [timestamp]` lines, one sequence per user
  kText,          // one sequence per non-blank line, whitespace-separated tokens
};

SymbolFormat parse_symbol_format(std::string_view text);
std::string_view to_string(SymbolFormat format);

// Reads plain or gzip input as symbol sequences; tokens are interned by
// first appearance.
SymbolSequences read_symbol_sequences(const std::filesystem::path& path, SymbolFormat format);
SymbolSequences parse_text_sequences(std::string_view text);

}  // namespace seqrec
