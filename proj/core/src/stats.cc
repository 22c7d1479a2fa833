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

#include "seqrec/stats.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "seqrec/corpus.h"
#include "seqrec/error.h"
#include "seqrec/interactions.h"

namespace seqrec {

namespace {

double entropy_bits(const std::vector<std::uint64_t>& counts, double total) {
  double h = 0.0;
  for (std::uint64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

// Least-squares slope of log(count) on log(rank) over the ranks that first
// reach 80% of the mass.
double zipf_exponent(const std::vector<std::uint64_t>& sorted_desc, double total) {
  std::vector<double> xs, ys;
  double mass = 0.0;
  for (std::size_t r = 0; r < sorted_desc.size(); ++r) {
    xs.push_back(std::log(static_cast<double>(r + 1)));
    ys.push_back(std::log(static_cast<double>(sorted_desc[r])));
    mass += static_cast<double>(sorted_desc[r]);
    if (mass >= 0.8 * total) break;
  }
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return -sxy / sxx;
}

}  // namespace

StatsReport corpus_statistics(std::span<const std::vector<std::uint32_t>> sequences) {
  std::unordered_map<std::uint32_t, std::uint64_t> unigram;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> bigram;
  std::unordered_map<std::uint32_t, std::uint64_t> context;  // first element of each pair
  std::uint64_t total = 0, pairs = 0, repeats = 0;
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      ++unigram[seq[t]];
      ++total;
      if (t == 0) continue;
      ++bigram[{seq[t - 1], seq[t]}];
      ++context[seq[t - 1]];
      ++pairs;
      if (seq[t - 1] == seq[t]) ++repeats;
    }
  }
  if (total == 0) throw UsageError("corpus_statistics: empty corpus");

  StatsReport r;
  r.vocab = unigram.size();
  r.total = total;
  std::vector<std::uint64_t> counts;
  counts.reserve(unigram.size());
  for (const auto& [symbol, c] : unigram) counts.push_back(c);
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const double n = static_cast<double>(total);
  r.unigram_entropy = entropy_bits(counts, n);
  r.zipf_exponent = zipf_exponent(counts, n);

  std::uint64_t covered = 0;
  std::size_t level = 0;
  for (std::size_t i = 0; i < counts.size() && level < kCoverageLevels.size(); ++i) {
    covered += counts[i];
    while (level < kCoverageLevels.size() && static_cast<double>(covered) >= kCoverageLevels[level] * n) {
      r.coverage[level++] = i + 1;
    }
  }

  if (pairs > 0) {
    // H(B|A) = sum p(a,b) log2(p(a) / p(a,b)) over within-sequence pairs.
    double h = 0.0;
    std::size_t singletons = 0;
    const double np = static_cast<double>(pairs);
    for (const auto& [ab, c] : bigram) {
      const double joint = static_cast<double>(c) / np;
      const double marginal = static_cast<double>(context[ab.first]) / np;
      h += joint * std::log2(marginal / joint);
      if (c == 1) ++singletons;
    }
    r.bigram_entropy = std::max(0.0, h);
    r.singleton_bigram_fraction = static_cast<double>(singletons) / static_cast<double>(bigram.size());
    r.repetition_rate = static_cast<double>(repeats) / np;
  }
  return r;
}

KeyValues StatsReport::to_key_values() const {
  KeyValues kv;
  kv.set("stats.vocab", std::to_string(vocab));
  kv.set("stats.total", std::to_string(total));
  kv.set("stats.unigram_entropy", format_double(unigram_entropy));
  kv.set("stats.bigram_entropy", format_double(bigram_entropy));
  kv.set("stats.zipf_exponent", format_double(zipf_exponent));
  kv.set("stats.singleton_bigram_fraction", format_double(singleton_bigram_fraction));
  kv.set("stats.repetition_rate", format_double(repetition_rate));
  kv.set("stats.coverage50", std::to_string(coverage[0]));
  kv.set("stats.coverage90", std::to_string(coverage[1]));
  kv.set("stats.coverage99", std::to_string(coverage[2]));
  return kv;
}

StatsReport StatsReport::from_key_values(const KeyValues& kv) {
  auto need = [&](std::string_view key) {
    const auto v = kv.get(key);
    if (!v) throw FormatError("stats report lacks `" + std::string(key) + "`");
    return *v;
  };
  StatsReport r;
  r.vocab = parse_uint(need("stats.vocab"), "stats.vocab");
  r.total = parse_uint(need("stats.total"), "stats.total");
  r.unigram_entropy = parse_double(need("stats.unigram_entropy"), "stats.unigram_entropy");
  r.bigram_entropy = parse_double(need("stats.bigram_entropy"), "stats.bigram_entropy");
  r.zipf_exponent = parse_double(need("stats.zipf_exponent"), "stats.zipf_exponent");
  r.singleton_bigram_fraction =
      parse_double(need("stats.singleton_bigram_fraction"), "stats.singleton_bigram_fraction");
  r.repetition_rate = parse_double(need("stats.repetition_rate"), "stats.repetition_rate");
  r.coverage[0] = parse_uint(need("stats.coverage50"), "stats.coverage50");
  r.coverage[1] = parse_uint(need("stats.coverage90"), "stats.coverage90");
  r.coverage[2] = parse_uint(need("stats.coverage99"), "stats.coverage99");
  return r;
}

Ratio Ratio::of(double a, double b) {
  if (b == 0.0) {
    if (a == 0.0) return Ratio{0.0, false};
    return Ratio{std::numeric_limits<double>::infinity(), true};
  }
  return Ratio{a / b, true};
}

std::string Ratio::text() const { return defined ? format_double(value) : "undefined"; }

KeyValues ComparisonReport::to_key_values() const {
  KeyValues kv;
  for (const auto& [k, v] : a.to_key_values().entries) kv.set("a." + k, v);
  for (const auto& [k, v] : b.to_key_values().entries) kv.set("b." + k, v);
  kv.set("ratio.unigram_entropy", entropy.text());
  kv.set("ratio.vocab", vocab.text());
  kv.set("ratio.singleton_bigram_fraction", singleton_bigram.text());
  kv.set("verdict", verdict);
  return kv;
}

ComparisonReport compare_corpora(const StatsReport& a, const StatsReport& b) {
  ComparisonReport c;
  c.a = a;
  c.b = b;
  c.entropy = Ratio::of(a.unigram_entropy, b.unigram_entropy);
  c.vocab = Ratio::of(static_cast<double>(a.vocab), static_cast<double>(b.vocab));
  c.singleton_bigram = Ratio::of(a.singleton_bigram_fraction, b.singleton_bigram_fraction);
  if (a.singleton_bigram_fraction > b.singleton_bigram_fraction) {
    c.verdict = "a is sparser (higher singleton-bigram fraction)";
  } else if (a.singleton_bigram_fraction < b.singleton_bigram_fraction) {
    c.verdict = "b is sparser (higher singleton-bigram fraction)";
  } else {
    c.verdict = "equally sparse";
  }
  return c;
}

SymbolFormat parse_symbol_format(std::string_view text) {
  if (text == "interactions") return SymbolFormat::kInteractions;
  if (text == "text") return SymbolFormat::kText;
  throw ConfigError("unknown stats input format `" + std::string(text) + "`");
}

std::string_view to_string(SymbolFormat format) {
  return format == SymbolFormat::kInteractions ? "interactions" : "text";
}

SymbolSequences parse_text_sequences(std::string_view text) {
  IdMap tokens;
  SymbolSequences out;
  std::istringstream in{std::string(text)};
  std::string line, token;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::vector<std::uint32_t> seq;
    while (words >> token) seq.push_back(tokens.intern(token));
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  return out;
}

SymbolSequences read_symbol_sequences(const std::filesystem::path& path, SymbolFormat format) {
  if (format == SymbolFormat::kText) return parse_text_sequences(read_text_file(path));
  const SequenceCorpus corpus = build_sequences(read_interactions_file(path));
  SymbolSequences out;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    auto symbols = corpus.of(u).symbols();
    if (!symbols.empty()) out.push_back(std::move(symbols));
  }
  return out;
}

}  // namespace seqrec
