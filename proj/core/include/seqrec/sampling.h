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

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "seqrec/corpus.h"
#include "seqrec/kv.h"
#include "seqrec/rng.h"

namespace seqrec {

enum class SamplerStrategy {
  kUniformExcluding,  // uniform over items the user never interacted with
  kUniformAll,        // uniform over every real item
  kPopularity,        // P(i) proportional to train_count(i)^alpha
};

std::string_view to_string(SamplerStrategy strategy);
SamplerStrategy parse_sampler_strategy(std::string_view text);

struct SamplerSpec {
  SamplerStrategy strategy = SamplerStrategy::kUniformExcluding;
  double alpha = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalCandidates {
  std::vector<ItemId> items;
  std::size_t truth_index = 0;
};

// Precomputes per-user interaction sets and popularity weights from a
// corpus. Popularity counts come from training portions only.
class NegativeSampler {
 public:
  NegativeSampler(const SequenceCorpus& corpus, SamplerSpec spec);

  const SamplerSpec& spec() const { return spec_; }
  std::size_t num_items() const { return num_items_; }

  // i.i.d. draws with replacement. Throws UsageError for uniform_excluding
  // when the user interacted with every item.
  std::vector<ItemId> sample_negatives(UserId user, std::size_t count, Rng& rng) const;

  // `count` distinct negatives (never the truth) plus the truth inserted at
  // a random slot. std::nullopt means every real item (full ranking).
  EvalCandidates build_eval_candidates(UserId user, ItemId truth, std::optional<std::size_t> count,
                                       Rng& rng) const;

  // Exact draw distribution for one user, indexed by item id (entry 0 is 0).
  std::vector<double> target_distribution(UserId user) const;

  bool interacted(UserId user, ItemId item) const;

 private:
  ItemId draw(UserId user, Rng& rng) const;
  std::size_t support_size(UserId user) const;

  SamplerSpec spec_;
  std::size_t num_items_ = 0;
  std::vector<std::vector<ItemId>> interacted_;  // sorted, per user
  std::vector<double> cumulative_;               // popularity CDF over items 1..n
  std::size_t positive_weight_items_ = 0;
};

struct AuditReport {
  SamplerSpec spec;
  std::uint64_t trials = 0;
  std::vector<std::uint64_t> counts;      // empirical draws per item id
  std::vector<double> target;             // expected marginal per item id
  double chi_square = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
  double empirical_tv_vs_uniform = 0.0;   // measured marginal vs global uniform
  double target_tv_vs_uniform = 0.0;      // exact marginal vs global uniform
  double exclusion_skew_tv = 0.0;         // exact uniform_excluding marginal vs uniform

  KeyValues to_key_values() const;
};

// Each trial picks a user uniformly among users with interactions and draws
// one negative for them. Requires trials >= 10^4.
AuditReport audit_sampler(const SamplerSpec& spec, const SequenceCorpus& corpus, std::uint64_t trials);

// Pearson statistic over bins with positive expectation; p from the
// chi-square upper tail. Observed mass in a zero-expectation bin gives p = 0.
struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
};
ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed,
                                std::span<const double> expected_probability);

}  // namespace seqrec
