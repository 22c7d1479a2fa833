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
#include <set>

#include "seqrec/sampling.h"
#include "seqrec/synthetic.h"
#include "test_util.h"

namespace seqrec {
namespace {

using testing::corpus_from_text;

SamplerSpec spec_of(SamplerStrategy strategy, double alpha = 1.0, std::uint64_t seed = 1) {
  return SamplerSpec{strategy, alpha, seed};
}

// Items a, b, c; u1 touched only a (its split keeps everything in training).
SequenceCorpus three_item_corpus() { return corpus_from_text("u1 a 1\nu2 b 1\nu2 c 2\n"); }

TEST(Spec, NamesAndValidation) {
  for (auto s : {SamplerStrategy::kUniformExcluding, SamplerStrategy::kUniformAll, SamplerStrategy::kPopularity}) {
    EXPECT_EQ(parse_sampler_strategy(to_string(s)), s);
  }
  EXPECT_THROW(parse_sampler_strategy("lucky"), ConfigError);
  EXPECT_THROW(spec_of(SamplerStrategy::kPopularity, -1.0).validate(), ConfigError);
}

TEST(Negatives, ExcludingNeverReturnsInteracted) {
  const auto corpus = three_item_corpus();
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kUniformExcluding));
  Rng rng(3);
  std::set<ItemId> seen;
  for (ItemId i : sampler.sample_negatives(1, 2000, rng)) seen.insert(i);
  EXPECT_EQ(seen, (std::set<ItemId>{2, 3}));
}

TEST(Negatives, NoSamplerReturnsPadding) {
  const auto corpus = build_sequences(skewed_corpus(12, 30, 8, 1.2, 4));
  for (auto s : {SamplerStrategy::kUniformExcluding, SamplerStrategy::kUniformAll, SamplerStrategy::kPopularity}) {
    const NegativeSampler sampler(corpus, spec_of(s));
    Rng rng(5);
    for (UserId u = 1; u <= 30; ++u) {
      for (ItemId i : sampler.sample_negatives(u, 50, rng)) {
        EXPECT_GE(i, 1u);
        EXPECT_LE(i, 12u);
        if (s == SamplerStrategy::kUniformExcluding) {
          EXPECT_FALSE(sampler.interacted(u, i));
        }
      }
    }
  }
}

TEST(Negatives, ExhaustedUserRejected) {
  const auto corpus = corpus_from_text("u1 a 1\nu1 b 2\n");
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kUniformExcluding));
  Rng rng(6);
  EXPECT_THROW(sampler.sample_negatives(1, 1, rng), UsageError);
  EXPECT_THROW(sampler.sample_negatives(1, 0, rng), UsageError);
}

TEST(Negatives, PopularityAlphaZeroIsUniformAll) {
  const auto corpus = build_sequences(skewed_corpus(10, 20, 10, 1.5, 7));
  const NegativeSampler flat(corpus, spec_of(SamplerStrategy::kPopularity, 0.0));
  const NegativeSampler all(corpus, spec_of(SamplerStrategy::kUniformAll));
  EXPECT_EQ(flat.target_distribution(1), all.target_distribution(1));
  for (std::size_t i = 1; i <= 10; ++i) EXPECT_DOUBLE_EQ(all.target_distribution(1)[i], 0.1);
}

TEST(Negatives, PopularityThreeToOne) {
  // Training counts a:3, b:1 (the last two events of each user are held out).
  const auto corpus = corpus_from_text(
      "u1 a 1\nu1 x 2\nu1 y 3\n"
      "u2 a 1\nu2 x 2\nu2 y 3\n"
      "u3 a 1\nu3 b 2\nu3 x 3\nu3 y 4\n");
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kPopularity, 1.0));
  const auto target = sampler.target_distribution(1);
  EXPECT_DOUBLE_EQ(target[1], 0.75);
  EXPECT_DOUBLE_EQ(target[4], 0.25);  // b is interned fourth
  Rng rng(8);
  std::vector<std::uint64_t> counts(5, 0);
  for (ItemId i : sampler.sample_negatives(1, 100000, rng)) ++counts[i];
  EXPECT_EQ(counts[2] + counts[3], 0u);
  const std::vector<std::uint64_t> observed{counts[1], counts[4]};
  const std::vector<double> expected{0.75, 0.25};
  EXPECT_GT(chi_square_test(observed, expected).p_value, 0.01);
  EXPECT_NEAR(static_cast<double>(counts[1]) / static_cast<double>(counts[4]), 3.0, 0.1);
}

TEST(Candidates, ClassicProtocolHas101WithTruthOnce) {
  const auto corpus = build_sequences(skewed_corpus(300, 10, 20, 1.0, 9));
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kUniformExcluding));
  Rng rng(10);
  const auto c = sampler.build_eval_candidates(1, 7, 100, rng);
  ASSERT_EQ(c.items.size(), 101u);
  EXPECT_EQ(c.items[c.truth_index], 7u);
  EXPECT_EQ(std::count(c.items.begin(), c.items.end(), 7u), 1);
  EXPECT_EQ(std::set<ItemId>(c.items.begin(), c.items.end()).size(), 101u);
}

TEST(Candidates, FullRankingIsEveryItem) {
  const auto corpus = build_sequences(skewed_corpus(5, 4, 6, 1.0, 11));
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kUniformExcluding));
  Rng rng(12);
  const auto c = sampler.build_eval_candidates(1, 3, std::nullopt, rng);
  EXPECT_EQ(c.items, (std::vector<ItemId>{1, 2, 3, 4, 5}));
  EXPECT_EQ(c.truth_index, 2u);
}

TEST(Candidates, SeededAndBounded) {
  const auto corpus = build_sequences(skewed_corpus(40, 5, 10, 1.0, 13));
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kUniformAll));
  Rng a(14), b(14);
  const auto ca = sampler.build_eval_candidates(2, 5, 20, a);
  const auto cb = sampler.build_eval_candidates(2, 5, 20, b);
  EXPECT_EQ(ca.items, cb.items);
  EXPECT_EQ(ca.truth_index, cb.truth_index);
  Rng c(15);
  EXPECT_THROW(sampler.build_eval_candidates(2, 5, 40, c), UsageError);
  EXPECT_THROW(sampler.build_eval_candidates(2, 0, 5, c), UsageError);
}

TEST(ChiSquare, MatchesClosedFormForTwoDegrees) {
  // Three equiprobable bins: statistic = sum (o - e)^2 / e; df = 2 has
  // survival function exp(-x / 2).
  const std::vector<std::uint64_t> observed{40, 30, 20};
  const std::vector<double> p{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto r = chi_square_test(observed, p);
  EXPECT_NEAR(r.statistic, (100.0 + 0.0 + 100.0) / 30.0, 1e-12);
  EXPECT_EQ(r.degrees_of_freedom, 2u);
  EXPECT_NEAR(r.p_value, std::exp(-r.statistic / 2.0), 1e-12);
}

TEST(ChiSquare, MassInImpossibleBinGivesZero) {
  const std::vector<std::uint64_t> observed{10, 1};
  const std::vector<double> p{1.0, 0.0};
  EXPECT_EQ(chi_square_test(observed, p).p_value, 0.0);
}

TEST(Audit, EveryStrategyPassesChiSquare) {
  const auto corpus = build_sequences(skewed_corpus(30, 60, 12, 1.1, 16));
  for (auto s : {SamplerStrategy::kUniformExcluding, SamplerStrategy::kUniformAll, SamplerStrategy::kPopularity}) {
    const auto report = audit_sampler(spec_of(s, 0.75, 17), corpus, 100000);
    EXPECT_GT(report.p_value, 0.01) << to_string(s);
    EXPECT_EQ(report.trials, 100000u);
  }
}

TEST(Audit, UniformAllIsCloseToUniform) {
  const auto corpus = build_sequences(skewed_corpus(10, 40, 10, 1.0, 18));
  const auto report = audit_sampler(spec_of(SamplerStrategy::kUniformAll), corpus, 100000);
  EXPECT_GT(report.p_value, 0.01);
  EXPECT_LT(report.empirical_tv_vs_uniform, 0.01);
  EXPECT_NEAR(report.target_tv_vs_uniform, 0.0, 1e-12);
}

TEST(Audit, ExclusionSkewVisibleOnSkewedCorpus) {
  const auto corpus = build_sequences(skewed_corpus(40, 80, 15, 1.3, 19));
  const auto report = audit_sampler(spec_of(SamplerStrategy::kUniformExcluding), corpus, 100000);
  EXPECT_GT(report.exclusion_skew_tv, 0.0);
  EXPECT_GT(report.target_tv_vs_uniform, 0.0);
  const auto kv = report.to_key_values();
  EXPECT_TRUE(kv.get("audit.exclusion_skew_tv").has_value());
  EXPECT_EQ(kv.get("audit.count.0"), std::nullopt);
}

TEST(Audit, ForcedSupportPutsWholeMassOnOneItem) {
  // u1 touched all but d; its exact draw distribution is a point mass.
  const auto corpus = corpus_from_text("u1 a 1\nu1 b 2\nu1 c 3\nu2 d 1\n");
  const NegativeSampler sampler(corpus, spec_of(SamplerStrategy::kUniformExcluding));
  const auto p = sampler.target_distribution(1);
  EXPECT_EQ(p, (std::vector<double>{0, 0, 0, 0, 1}));
  EXPECT_THROW(audit_sampler(spec_of(SamplerStrategy::kUniformAll), corpus, 10), UsageError);
}

}  // namespace
}  // namespace seqrec
