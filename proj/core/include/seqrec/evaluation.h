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
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "seqrec/corpus.h"
#include "seqrec/kv.h"
#include "seqrec/model.h"
#include "seqrec/sampling.h"

namespace seqrec {

enum class EvalSplit { kValidation, kTest };

std::string_view to_string(EvalSplit split);
EvalSplit parse_eval_split(std::string_view text);

struct EvalProtocol {
  std::optional<std::size_t> sampled;  // negatives per user; nullopt = full ranking
  std::vector<std::size_t> ks{1, 5, 10};
  EvalSplit split = EvalSplit::kTest;

  // Ks sorted ascending, positive, and no larger than the candidate count.
  void validate(std::size_t num_items) const;
  std::string candidates_text() const;  // "full" or the count
};

// Rank of the truth (1-based) among `scores`; ties go to the smaller id.
// An empty `ids` means ids equal indices.
template <typename T>
std::size_t truth_rank(std::span<const T> scores, std::span<const ItemId> ids, std::size_t truth_index);

struct RankMetrics {
  std::size_t rank = 0;
  std::vector<double> hr;
  std::vector<double> ndcg;
};

template <typename T>
RankMetrics rank_metrics(std::span<const T> scores, std::span<const ItemId> ids,
                         std::size_t truth_index, std::span<const std::size_t> ks);

struct EvalReport {
  EvalProtocol protocol;
  std::uint64_t seed = 0;
  std::size_t users = 0;
  std::vector<double> hr;    // aligned with protocol.ks
  std::vector<double> ndcg;

  double hr_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
  KeyValues to_key_values(std::string_view prefix = "eval") const;
};

// Input the model sees for a user under `split`: the training items, plus
// the validation item when evaluating on test. Truncated to the most recent
// max_len items; absolute-trick models get the left-padded window.
std::vector<ItemId> evaluation_input(const SequenceCorpus& corpus, UserId user, EvalSplit split,
                                     const ModelConfig& config);

// Leave-one-out ranking over all evaluable users. Candidate sets come from
// `sampler` with per-user seeds derived from `seed`; full ranking ignores it.
EvalReport evaluate(const SequenceModel<float>& model, const SequenceCorpus& corpus,
                    const EvalProtocol& protocol, const NegativeSampler& sampler, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Autoregressive rollout

struct DecodeSpec {
  enum class Kind { kGreedy, kTopK };
  Kind kind = Kind::kGreedy;
  std::size_t top_k = 1;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  std::string to_string() const;
};

// Appends `horizon` items, each chosen from a full-catalogue scoring of the
// current sequence with relative positions. Generated items may repeat.
std::vector<ItemId> autoregressive_rollout(const SequenceModel<float>& model,
                                           std::span<const ItemId> prefix, std::size_t horizon,
                                           const DecodeSpec& decode);

struct RolloutMetrics {
  std::vector<double> per_step;  // 1 where generated_t == suffix_t
  double set_recall = 0.0;       // |generated ∩ suffix| / h
  std::size_t exact_prefix = 0;  // longest fully-correct leading run
};

RolloutMetrics rollout_metrics(std::span<const ItemId> generated, std::span<const ItemId> hidden_suffix);

struct RolloutReport {
  std::size_t horizon = 0;
  std::size_t users = 0;
  std::vector<double> per_step_recall;             // mean over users
  double set_recall = 0.0;
  std::vector<std::size_t> exact_prefix_histogram;  // index = exact-prefix length, 0..h
  DecodeSpec decode;

  KeyValues to_key_values() const;
};

// Hides the last `horizon` items of every user whose sequence is longer
// than the horizon, rolls out from the rest, and aggregates.
RolloutReport evaluate_rollout(const SequenceModel<float>& model, const SequenceCorpus& corpus,
                               std::size_t horizon, const DecodeSpec& decode);

// ---------------------------------------------------------------------------
// Exposure-capped serving

enum class ProvenanceRule {
  kFirstUser,   // interaction count of the item's first-ever user
  kPopularity,  // the item's own interaction count
};

std::string_view to_string(ProvenanceRule rule);
ProvenanceRule parse_provenance_rule(std::string_view text);

struct ExposureConfig {
  double beta = 1.0;
  ProvenanceRule provenance = ProvenanceRule::kFirstUser;
  std::vector<std::size_t> ks{1, 5, 10};
  EvalSplit split = EvalSplit::kTest;
  std::uint64_t seed = 0;
};

struct ExposureReport {
  ExposureConfig config;
  std::size_t users = 0;
  std::size_t empty_lists = 0;
  std::vector<double> hr;
  std::vector<double> ndcg;
  double exposure_gini = 0.0;
  double exhausted_fraction = 0.0;      // among items that started with budget
  std::vector<std::uint64_t> exposure;  // per item id
  std::vector<std::uint64_t> budget;    // initial budget per item id
  std::vector<std::pair<UserId, std::vector<ItemId>>> served;

  KeyValues to_key_values() const;
};

// Provenance counts per item id over training interactions.
std::vector<std::uint64_t> provenance_counts(const SequenceCorpus& corpus, ProvenanceRule rule);

// Gini coefficient of non-negative values; 0 for all-equal or all-zero.
double gini_coefficient(std::span<const std::uint64_t> values);

// Users in seeded random order each get the top-max(K) items among those
// with remaining budget; budget(i) = ceil(beta * provenance(i)).
ExposureReport exposure_capped_recommend(const SequenceModel<float>& model,
                                         const SequenceCorpus& corpus, const ExposureConfig& config);

// Score-then-rank helper shared with the capped serving path.
using ScoreFn = std::function<std::vector<float>(UserId)>;
ExposureReport exposure_capped_recommend(const ScoreFn& scores, const SequenceCorpus& corpus,
                                         const ExposureConfig& config);

}  // namespace seqrec
