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
#include <string_view>
#include <vector>

#include "seqrec/batching.h"
#include "seqrec/checkpoint.h"
#include "seqrec/params.h"
#include "seqrec/stack.h"

namespace seqrec {

enum class PaddingMode {
  kBuggy,      // padding row is learnable and receives positional embeddings
  kCorrected,  // padding contributes an exact zero and is masked as a key
};

std::string_view to_string(PaddingMode mode);
PaddingMode parse_padding_mode(std::string_view text);

struct ModelConfig {
  std::size_t d = 32;
  std::size_t blocks = 2;
  std::size_t heads = 1;
  std::size_t max_len = 50;
  double keep_prob = 0.8;
  PositionMode position_mode = PositionMode::kRelativeExact;
  PaddingMode padding_mode = PaddingMode::kCorrected;
  std::size_t num_items = 0;

  StackShape stack_shape() const { return {d, blocks, heads, max_len, keep_prob}; }
  void validate() const;

  // Keys are prefixed `model.`, matching the run configuration.
  KeyValues to_key_values() const;
  static ModelConfig from_key_values(const KeyValues& kv);
};

// Position index list (1-based, 1 = most recent). Relative-exact: the
// k-long prefix gets [k, ..., 1]. Absolute-trick: the whole max_len window
// gets [max_len, ..., 1], one assignment shared by all internal predictions.
std::vector<std::size_t> assign_positions(std::size_t k, PositionMode mode, std::size_t max_len);

template <typename T>
class SequenceModel {
 public:
  static SequenceModel init(const ModelConfig& config, std::uint64_t seed);
  static SequenceModel from_checkpoint(const Checkpoint& checkpoint);
  Checkpoint to_checkpoint() const;

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::size_t item_table_slot() const { return item_table_; }
  const StackSlots& stack() const { return stack_; }
  const Tensor<T>& item_table() const { return params_.at(item_table_); }

  // Re-zeroes the padding row in corrected mode.
  void enforce_padding_row();

  template <typename U>
  SequenceModel<U> cast() const {
    return SequenceModel<U>(config_, params_.template cast<U>(), item_table_, stack_);
  }

  SequenceModel(ModelConfig config, ParamStore<T> params, std::size_t item_table, StackSlots stack)
      : config_(std::move(config)), params_(std::move(params)), item_table_(item_table),
        stack_(std::move(stack)) {}

 private:
  ModelConfig config_;
  ParamStore<T> params_;
  std::size_t item_table_ = 0;
  StackSlots stack_;
};

// Row j = item_table[items_j] + pos_table[positions_j - 1]; in corrected
// mode padding slots are exactly zero and receive no gradient.
template <typename T>
Var<T> embed_sequence(std::span<const Var<T>> bound, const SequenceModel<T>& model,
                      std::span<const ItemId> items, std::span<const std::size_t> positions);

// Encodes one item list (k <= max_len) with positions [k, ..., 1]; returns
// the k x d hidden states. Padding keys are masked in corrected mode.
template <typename T>
Var<T> encode_sequence(std::span<const Var<T>> bound, const SequenceModel<T>& model,
                       std::span<const ItemId> items, const EncodeOptions& options);

// Tape-free convenience: hidden states for each sequence of a batch.
template <typename T>
std::vector<Tensor<T>> encode(const SequenceModel<T>& model,
                              std::span<const std::vector<ItemId>> batch,
                              const EncodeOptions& options = {});

// Final-position hidden state of `items`, dropout off.
template <typename T>
std::vector<T> final_hidden(const SequenceModel<T>& model, std::span<const ItemId> items);

// logit_c = <hidden, item_table[c]>. Throws UsageError on candidate 0.
template <typename T>
std::vector<T> score_items(const SequenceModel<T>& model, std::span<const T> hidden,
                           std::span<const ItemId> candidates);

// Scores for items 1..n, element i-1 for item i.
template <typename T>
std::vector<T> score_all(const SequenceModel<T>& model, std::span<const T> hidden);

}  // namespace seqrec
