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
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/autodiff.h"
#include "seqrec/corpus.h"
#include "seqrec/evaluation.h"
#include "seqrec/kv.h"
#include "seqrec/model.h"
#include "seqrec/sampling.h"

namespace seqrec {

enum class WeightingMode { kOff, kHistoryConfidence };

std::string_view to_string(WeightingMode mode);
WeightingMode parse_weighting_mode(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  WeightingMode weighting = WeightingMode::kOff;
  double duality_lambda = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  KeyValues to_key_values() const;  // `train.*` keys
};

// Weighted binary cross-entropy over paired positive/negative logits (both
// P x 1). Returns sum_p w_p (softplus(-pos_p) + softplus(neg_p)) / sum_p w_p.
// Empty `weights` means all ones.
template <typename T>
Var<T> bce_loss(const Var<T>& pos_logits, const Var<T>& neg_logits, std::span<const double> weights = {});

// Scales positive weights to mean 1.
std::vector<double> rescale_weights(std::vector<double> weights);

// Row-wise dot products <hidden_p, table[ids_p]> as a P x 1 column.
template <typename T>
Var<T> pair_logits(const Var<T>& hidden_rows, const Var<T>& table, std::span<const std::uint32_t> ids);

// One optimisation batch in model-ready form. Each input sequence is
// encoded once; `rows[s]` lists its rows that make a prediction, and the
// flattened predictions line up with positives/negatives/weights.
struct LossBatch {
  std::vector<std::vector<ItemId>> inputs;
  std::vector<std::vector<std::size_t>> rows;
  std::vector<UserId> users;           // owner of each input
  std::vector<std::size_t> prefix_of;  // per prediction: length of the prefix it conditions on
  std::vector<ItemId> positives;
  std::vector<ItemId> negatives;
  std::vector<double> weights;         // empty = all ones

  std::size_t predictions() const { return positives.size(); }
};

// Turns a bucket of prefix examples into inputs and prediction rows.
// Relative-exact: one input per example (its most recent max_len items),
// predicting from the last row. Absolute-trick: the left-padded window of the
// whole training sequence, predicting at every real slot.
LossBatch make_loss_batch(const BucketBatch& batch, const ModelConfig& config);

// Fills `negatives` with one draw per positive.
void draw_negatives(LossBatch& batch, const NegativeSampler& sampler, Rng& rng);

template <typename T>
Var<T> prediction_loss(std::span<const Var<T>> bound, const SequenceModel<T>& model,
                       const LossBatch& batch, const EncodeOptions& options);

// Reciprocal-rank confidence of each user's history under frozen params.
// weight(u, k) for a k-long prefix is the mean over j < k of the reciprocal
// rank of the j+1-th training item given the first j, scored against the
// truth plus min(100, n-1) uniform negatives fixed per (user, step).
class ConfidenceTable {
 public:
  static ConfidenceTable compute(const SequenceModel<float>& model, const SequenceCorpus& corpus,
                                 std::uint64_t seed);
  double weight(UserId user, std::size_t prefix_length) const;
  double reciprocal_rank(UserId user, std::size_t step) const;  // step >= 1

 private:
  std::vector<std::vector<double>> rr_;          // rr_[u][j-1] for step j
  std::vector<std::vector<double>> prefix_mean_;  // prefix_mean_[u][k-1]
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t t = 0;
};

// Bias-corrected Adam. Leaves params and state untouched and returns false
// when any gradient entry is non-finite.
template <typename T>
bool adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& config);

// Whole-model step; re-zeroes the padding row in corrected mode.
template <typename T>
bool adam_step(SequenceModel<T>& model, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::size_t examples = 0;
  std::size_t predictions = 0;
  std::size_t skipped_steps = 0;
  std::optional<EvalReport> validation;
  double seconds = 0.0;

  // Deterministic fields only; wall-clock is logged separately.
  std::string to_line() const;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

struct TrainState {
  AdamState<float> adam;
  std::size_t epochs_done = 0;
};

// One pass over every training example of `corpus`.
EpochRecord train_epoch(SequenceModel<float>& model, const SequenceCorpus& corpus,
                        const TrainConfig& config, const NegativeSampler& sampler, TrainState& state);

struct FitOptions {
  std::optional<EvalProtocol> validation;  // snapshot after every epoch
  std::function<void(const EpochRecord&, SequenceModel<float>&)> after_epoch;
};

struct FitResult {
  TrainReport report;
  SequenceModel<float> best;  // best validation NDCG at the largest K; last if no validation
};

FitResult fit(SequenceModel<float>& model, const SequenceCorpus& corpus, const TrainConfig& config,
              const NegativeSampler& sampler, const FitOptions& options = {});

}  // namespace seqrec
