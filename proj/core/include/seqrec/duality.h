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
#include <span>
#include <string>
#include <vector>

#include "seqrec/corpus.h"
#include "seqrec/evaluation.h"
#include "seqrec/model.h"
#include "seqrec/training.h"

namespace seqrec {

// Item-major view of a corpus: sequence i holds the users of item i in time
// order (same (timestamp, input order) tie-break). The result is itself a
// SequenceCorpus whose "users" are items and whose symbols are user ids.
// Only training interactions are inverted; held-out items stay hidden.
SequenceCorpus invert_corpus(const SequenceCorpus& corpus);

// Inverts every event, held-out or not. invert_all(invert_corpus(c)) is the
// training portion of c.
SequenceCorpus invert_all(const SequenceCorpus& corpus);

// `corpus` with each sequence cut to its training events.
SequenceCorpus training_portion(const SequenceCorpus& corpus);

// Final-position hidden state over each user's training items (the most
// recent max_len), dropout off. Row u belongs to user u; users without
// training items and row 0 stay zero.
Tensor<float> user_embeddings(const SequenceModel<float>& model, const SequenceCorpus& corpus);

// Dual encoder: the primary block structure over a sequence of frozen user
// vectors, with its own positional table, plus a user table for next-user
// scoring. Parameter names carry a "dual." prefix, except "user_table".
template <typename T>
class DualModel {
 public:
  static DualModel init(const ModelConfig& primary, std::size_t num_users, std::uint64_t seed);
  static DualModel from_checkpoint(const Checkpoint& checkpoint);
  Checkpoint to_checkpoint() const;

  const ModelConfig& config() const { return config_; }
  std::size_t num_users() const { return num_users_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const StackSlots& stack() const { return stack_; }
  std::size_t user_table_slot() const { return user_table_; }

  template <typename U>
  DualModel<U> cast() const {
    return DualModel<U>(config_, num_users_, params_.template cast<U>(), stack_, user_table_);
  }

  DualModel(ModelConfig config, std::size_t num_users, ParamStore<T> params, StackSlots stack,
            std::size_t user_table)
      : config_(std::move(config)), num_users_(num_users), params_(std::move(params)),
        stack_(std::move(stack)), user_table_(user_table) {}

 private:
  ModelConfig config_;
  std::size_t num_users_ = 0;
  ParamStore<T> params_;
  StackSlots stack_;
  std::size_t user_table_ = 0;
};

// Encodes users (k <= max_len, most recent last) as rows of `user_vectors`
// plus relative positions; returns k x d hidden states.
template <typename T>
Var<T> encode_users(std::span<const Var<T>> bound, const DualModel<T>& dual, const Var<T>& user_vectors,
                    std::span<const UserId> users, const EncodeOptions& options);

// Final-position dual encoding of an item's user sequence (most recent
// max_len users). Throws UsageError for an empty sequence.
std::vector<float> high_order_item_embedding(const DualModel<float>& dual, const Tensor<float>& user_vectors,
                                             std::span<const UserId> users);

// 1 - mean row cosine. Zero-norm rows throw NumericError.
template <typename T>
Var<T> consistency_loss(const Var<T>& high_order, const Var<T>& item_rows);

struct DualOptions {
  bool consistency = true;    // align high-order and primary item embeddings
  bool next_user = false;     // train the next-user head
  std::size_t item_subset = 1024;
  std::size_t passes = 1;     // consistency sweeps over the subset per epoch
};

struct DualEpochRecord {
  std::size_t epoch = 0;
  double consistency = 0.0;        // 1 - mean cosine over all items, before the pass
  std::size_t consistency_items = 0;
  double next_user_loss = 0.0;
  std::size_t next_user_examples = 0;
  std::size_t skipped_steps = 0;

  std::string to_line() const;
};

// Shared optimiser state for the duality phase: dual params, then the
// primary item table.
struct DualTrainState {
  AdamState<float> adam;
  std::size_t epochs_done = 0;
};

// One duality phase against frozen user vectors: consistency sweeps on a
// seeded item subset (weighted by config.duality_lambda) and, if enabled,
// one next-user epoch over the inverted corpus.
DualEpochRecord duality_phase(SequenceModel<float>& primary, DualModel<float>& dual,
                              const SequenceCorpus& inverted, const Tensor<float>& user_vectors,
                              const TrainConfig& config, const DualOptions& options, DualTrainState& state);

// Mean cosine between high-order and primary embeddings over every item
// with training users.
double mean_consistency_cosine(const SequenceModel<float>& primary, const DualModel<float>& dual,
                               const SequenceCorpus& inverted, const Tensor<float>& user_vectors);

// Leave-one-out next-user ranking over items with at least three users.
EvalReport evaluate_next_user(const DualModel<float>& dual, const SequenceCorpus& inverted,
                              const Tensor<float>& user_vectors, const EvalProtocol& protocol, std::uint64_t seed);

struct CoTrainRecord {
  EpochRecord primary;
  DualEpochRecord dual;
};

// Alternates a primary epoch, a user-vector refresh and a duality phase.
std::vector<CoTrainRecord> co_train(SequenceModel<float>& primary, DualModel<float>& dual,
                                    const SequenceCorpus& corpus, const TrainConfig& config,
                                    const NegativeSampler& sampler, const DualOptions& options);

}  // namespace seqrec
