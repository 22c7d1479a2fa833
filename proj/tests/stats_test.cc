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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "seqrec/stats.h"
#include "seqrec/synthetic.h"
#include "test_util.h"

namespace seqrec {
namespace {

using testing::TempDir;

std::filesystem::path samples_dir() {
  const char* env = std::getenv("SEQREC_SAMPLES");
  return env ? std::filesystem::path(env) : std::filesystem::path("data/samples");
}

SymbolSequences cycle_sequences(std::uint32_t period, std::size_t count, std::size_t length) {
  SymbolSequences out;
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<std::uint32_t> seq;
    for (std::size_t t = 0; t < length; ++t) seq.push_back(static_cast<std::uint32_t>((s + t) % period + 1));
    out.push_back(seq);
  }
  return out;
}

TEST(Statistics, UniformEntropyWithinOnePercent) {
  const auto seqs = uniform_symbol_sequences(64, 1000, 1000, 71);
  const auto r = corpus_statistics(seqs);
  EXPECT_EQ(r.total, 1000000u);
  EXPECT_EQ(r.vocab, 64u);
  EXPECT_NEAR(r.unigram_entropy, 6.0, 0.06);
  EXPECT_LE(r.unigram_entropy, 6.0 + 1e-12);
}

TEST(Statistics, SingleRepeatedSymbol) {
  const SymbolSequences seqs{{7, 7, 7, 7}, {7, 7}};
  const auto r = corpus_statistics(seqs);
  EXPECT_EQ(r.unigram_entropy, 0.0);
  EXPECT_EQ(r.bigram_entropy, 0.0);
  EXPECT_EQ(r.repetition_rate, 1.0);
  EXPECT_EQ(r.coverage, (std::array<std::size_t, 3>{1, 1, 1}));
}

TEST(Statistics, CycleHasZeroConditionalEntropy) {
  const auto r = corpus_statistics(cycle_sequences(3, 20, 30));
  EXPECT_EQ(r.bigram_entropy, 0.0);
  EXPECT_NEAR(r.unigram_entropy, std::log2(3.0), 1e-3);
  EXPECT_EQ(r.repetition_rate, 0.0);
}

TEST(Statistics, BigramsRespectSequenceBoundaries) {
  // Joined, "1 2 | 2 1" would contribute a 2->2 pair.
  const SymbolSequences seqs{{1, 2}, {2, 1}};
  const auto r = corpus_statistics(seqs);
  EXPECT_EQ(r.repetition_rate, 0.0);
  EXPECT_EQ(r.singleton_bigram_fraction, 1.0);
  EXPECT_EQ(r.bigram_entropy, 0.0);
}

TEST(Statistics, EmptyCorpusRejected) {
  const SymbolSequences none;
  EXPECT_THROW(corpus_statistics(none), UsageError);
  const SymbolSequences blanks{{}, {}};
  EXPECT_THROW(corpus_statistics(blanks), UsageError);
}

TEST(Statistics, HandCountedSmallCorpus) {
  // Unigrams a:3 b:2 c:1; pairs ab, ba, ab, ac with contexts a:3 b:1.
  const SymbolSequences seqs{{1, 2, 1, 2}, {1, 3}};
  const auto r = corpus_statistics(seqs);
  const double h1 = -(0.5 * std::log2(0.5) + (1.0 / 3) * std::log2(1.0 / 3) + (1.0 / 6) * std::log2(1.0 / 6));
  EXPECT_NEAR(r.unigram_entropy, h1, 1e-12);
  // H(next | a) over {b: 2/3, c: 1/3} weighted by 3/4; H(next | b) = 0.
  const double h2 = 0.75 * -((2.0 / 3) * std::log2(2.0 / 3) + (1.0 / 3) * std::log2(1.0 / 3));
  EXPECT_NEAR(r.bigram_entropy, h2, 1e-12);
  EXPECT_NEAR(r.singleton_bigram_fraction, 2.0 / 3.0, 1e-15);  // ba, ac out of {ab, ba, ac}
  EXPECT_EQ(r.coverage, (std::array<std::size_t, 3>{1, 3, 3}));
}

TEST(Statistics, ZipfExponentOfExactPowerLaw) {
  // Counts proportional to r^-1.2 at ranks 1..40, one symbol per token.
  SymbolSequences seqs(1);
  for (std::uint32_t r = 1; r <= 40; ++r) {
    const auto count = static_cast<std::size_t>(std::llround(1e5 * std::pow(r, -1.2)));
    for (std::size_t i = 0; i < count; ++i) seqs[0].push_back(r);
  }
  EXPECT_NEAR(corpus_statistics(seqs).zipf_exponent, 1.2, 1e-3);
}

TEST(Statistics, InvariantsOnRandomCorpora) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto log = skewed_corpus(200, 50, 30, 1.1, seed);
    const auto corpus = build_sequences(log);
    SymbolSequences seqs;
    for (UserId u = 1; u <= corpus.num_users; ++u) seqs.push_back(corpus.of(u).symbols());
    const auto r = corpus_statistics(seqs);
    EXPECT_LE(r.bigram_entropy, r.unigram_entropy);
    EXPECT_LE(r.unigram_entropy, std::log2(static_cast<double>(r.vocab)));
    EXPECT_LE(r.coverage[0], r.coverage[1]);
    EXPECT_LE(r.coverage[1], r.coverage[2]);
    EXPECT_GE(r.singleton_bigram_fraction, 0.0);
    EXPECT_LE(r.singleton_bigram_fraction, 1.0);

    // Only within-sequence order matters.
    SymbolSequences shuffled = seqs;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto again = corpus_statistics(shuffled);
    EXPECT_EQ(again.to_key_values().entries, r.to_key_values().entries);
  }
}

TEST(Compare, SelfComparisonHasUnitRatios) {
  const auto r = corpus_statistics(uniform_symbol_sequences(20, 50, 40, 72));
  const auto c = compare_corpora(r, r);
  EXPECT_EQ(c.entropy.value, 1.0);
  EXPECT_EQ(c.vocab.value, 1.0);
  EXPECT_EQ(c.singleton_bigram.value, 1.0);
  EXPECT_EQ(c.verdict, "equally sparse");
  const auto kv = c.to_key_values();
  EXPECT_EQ(kv.get("ratio.unigram_entropy"), "1");
  EXPECT_EQ(kv.get("ratio.vocab"), "1");
}

TEST(Compare, DegenerateDenominators) {
  const auto uniform = corpus_statistics(uniform_symbol_sequences(16, 100, 100, 73));
  const auto single = corpus_statistics(SymbolSequences{{1, 1, 1}});
  const auto c = compare_corpora(uniform, single);
  EXPECT_TRUE(std::isinf(c.entropy.value));
  EXPECT_EQ(c.to_key_values().get("ratio.unigram_entropy"), "inf");
  const auto zero = compare_corpora(single, single);
  EXPECT_FALSE(zero.entropy.defined);
  EXPECT_EQ(zero.to_key_values().get("ratio.unigram_entropy"), "undefined");
}

TEST(Report, KeyValuesRoundTrip) {
  const auto r = corpus_statistics(cycle_sequences(5, 10, 12));
  const auto back = StatsReport::from_key_values(r.to_key_values());
  EXPECT_EQ(back.to_key_values().entries, r.to_key_values().entries);
  KeyValues missing = r.to_key_values();
  missing.entries.pop_back();
  EXPECT_THROW(StatsReport::from_key_values(missing), FormatError);
}

TEST(Input, TextSequencesPerLine) {
  const auto seqs = parse_text_sequences("the cat sat\n\n  the   dog\n");
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0], (std::vector<std::uint32_t>{1, 2, 3}));
  EXPECT_EQ(seqs[1], (std::vector<std::uint32_t>{1, 4}));
  EXPECT_EQ(parse_symbol_format("text"), SymbolFormat::kText);
  EXPECT_THROW(parse_symbol_format("csv"), ConfigError);
}

TEST(Input, InteractionFileGivesOneSequencePerUser) {
  TempDir dir("stats");
  std::ofstream(dir / "log.txt") << "u1 a 2\nu2 b 1\nu1 b 1\n";
  const auto seqs = read_symbol_sequences(dir / "log.txt", SymbolFormat::kInteractions);
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0], (std::vector<std::uint32_t>{2, 1}));
}

TEST(Samples, ItemCorpusIsSparserThanText) {
  const auto items = corpus_statistics(read_symbol_sequences(samples_dir() / "items.tsv", SymbolFormat::kInteractions));
  const auto text = corpus_statistics(read_symbol_sequences(samples_dir() / "tokens.txt", SymbolFormat::kText));
  EXPECT_GT(items.singleton_bigram_fraction, text.singleton_bigram_fraction);
  EXPECT_EQ(compare_corpora(items, text).verdict.substr(0, 12), "a is sparser");
}

}  // namespace
}  // namespace seqrec
