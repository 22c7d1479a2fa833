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

#include "seqrec/model.h"

#include <string>

namespace seqrec {

std::string_view to_string(PaddingMode mode) {
  return mode == PaddingMode::kBuggy ? "buggy" : "corrected";
}

PaddingMode parse_padding_mode(std::string_view text) {
  if (text == "buggy") return PaddingMode::kBuggy;
  if (text == "corrected") return PaddingMode::kCorrected;
  throw ConfigError("unknown padding mode `" + std::string(text) + "`");
}

void ModelConfig::validate() const {
  stack_shape().validate();
  if (num_items == 0) throw ConfigError("model.num_items must be positive");
}

KeyValues ModelConfig::to_key_values() const {
  KeyValues kv;
  kv.set("model.d", std::to_string(d));
  kv.set("model.blocks", std::to_string(blocks));
  kv.set("model.heads", std::to_string(heads));
  kv.set("model.max_len", std::to_string(max_len));
  kv.set("model.keep_prob", format_double(keep_prob));
  kv.set("model.position_mode", std::string(to_string(position_mode)));
  kv.set("model.padding_mode", std::string(to_string(padding_mode)));
  kv.set("model.num_items", std::to_string(num_items));
  return kv;
}

ModelConfig ModelConfig::from_key_values(const KeyValues& kv) {
  auto need = [&](std::string_view key) {
    auto v = kv.get(key);
    if (!v) throw FormatError("model config lacks `" + std::string(key) + "`");
    return *v;
  };
  ModelConfig c;
  c.d = parse_uint(need("model.d"), "model.d");
  c.blocks = parse_uint(need("model.blocks"), "model.blocks");
  c.heads = parse_uint(need("model.heads"), "model.heads");
  c.max_len = parse_uint(need("model.max_len"), "model.max_len");
  c.keep_prob = parse_double(need("model.keep_prob"), "model.keep_prob");
  c.position_mode = parse_position_mode(need("model.position_mode"));
  c.padding_mode = parse_padding_mode(need("model.padding_mode"));
  c.num_items = parse_uint(need("model.num_items"), "model.num_items");
  c.validate();
  return c;
}

std::vector<std::size_t> assign_positions(std::size_t k, PositionMode mode, std::size_t max_len) {
  if (k == 0) throw UsageError("assign_positions: empty prefix");
  if (k > max_len) {
    throw UsageError("prefix length " + std::to_string(k) + " exceeds positional table size " +
                     std::to_string(max_len));
  }
  return relative_positions(mode == PositionMode::kRelativeExact ? k : max_len);
}

template <typename T>
SequenceModel<T> SequenceModel<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, {stream::kInit}));
  ParamStore<T> store;
  Tensor<T> items({config.num_items + 1, config.d});
  init_uniform(items, rng);
  const std::size_t item_slot = store.add("item_table", std::move(items));
  StackSlots stack = add_stack_params(store, "", config.stack_shape(), rng);
  SequenceModel model(config, std::move(store), item_slot, std::move(stack));
  model.enforce_padding_row();
  return model;
}

template <typename T>
SequenceModel<T> SequenceModel<T>::from_checkpoint(const Checkpoint& checkpoint) {
  const auto kind = checkpoint.config.get("kind");
  if (kind && *kind != "primary") {
    throw FormatError("checkpoint kind `" + *kind + "` is not a primary model");
  }
  ModelConfig config = ModelConfig::from_key_values(checkpoint.config);
  ParamStore<T> store = ParamStore<T>::from_named(checkpoint.tensors);
  const std::size_t item_slot = store.index("item_table");
  if (store.at(item_slot).shape() != Shape{config.num_items + 1, config.d}) {
    throw FormatError("item_table shape does not match the model config");
  }
  StackSlots stack = find_stack_slots(store, "", config.stack_shape());
  if (store.size() != 1 + 1 + config.blocks * (4 * config.heads + 8) + 2) {
    throw FormatError("checkpoint holds unexpected extra tensors");
  }
  return SequenceModel(std::move(config), std::move(store), item_slot, std::move(stack));
}

template <typename T>
Checkpoint SequenceModel<T>::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config.set("kind", "primary");
  for (auto& [k, v] : config_.to_key_values().entries) ckpt.config.set(k, v);
  params_.append_to(ckpt.tensors);
  return ckpt;
}

template <typename T>
void SequenceModel<T>::enforce_padding_row() {
  if (config_.padding_mode != PaddingMode::kCorrected) return;
  for (T& v : params_.at(item_table_).row_span(kPaddingItem)) v = T{0};
}

template <typename T>
Var<T> embed_sequence(std::span<const Var<T>> bound, const SequenceModel<T>& model,
                      std::span<const ItemId> items, std::span<const std::size_t> positions) {
  if (items.size() != positions.size()) throw ShapeError("embed_sequence: items/positions differ in length");
  if (items.empty()) throw ShapeError("embed_sequence: empty sequence");
  const ModelConfig& cfg = model.config();
  const bool corrected = cfg.padding_mode == PaddingMode::kCorrected;
  std::vector<std::size_t> item_rows(items.size()), pos_rows(items.size());
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (items[j] > cfg.num_items) {
      throw UsageError("item id " + std::to_string(items[j]) + " out of range (n=" +
                       std::to_string(cfg.num_items) + ")");
    }
    if (positions[j] == 0 || positions[j] > cfg.max_len) {
      throw UsageError("position " + std::to_string(positions[j]) + " out of range");
    }
    const bool pad = items[j] == kPaddingItem;
    item_rows[j] = corrected && pad ? kNoRow : items[j];
    pos_rows[j] = corrected && pad ? kNoRow : positions[j] - 1;
  }
  const Var<T> item_part = embedding_gather(bound[model.item_table_slot()], std::move(item_rows));
  const Var<T> pos_part = embedding_gather(bound[model.stack().pos_table], std::move(pos_rows));
  return add(item_part, pos_part);
}

template <typename T>
Var<T> encode_sequence(std::span<const Var<T>> bound, const SequenceModel<T>& model,
                       std::span<const ItemId> items, const EncodeOptions& options) {
  const ModelConfig& cfg = model.config();
  const std::vector<std::size_t> positions =
      assign_positions(items.size(), PositionMode::kRelativeExact, cfg.max_len);
  const Var<T> embedded = embed_sequence(bound, model, items, positions);
  std::vector<std::uint8_t> key_valid(items.size(), 1);
  if (cfg.padding_mode == PaddingMode::kCorrected) {
    for (std::size_t j = 0; j < items.size(); ++j) key_valid[j] = items[j] != kPaddingItem;
  }
  return run_stack(bound, model.stack(), cfg.stack_shape(), embedded, key_valid, options);
}

template <typename T>
std::vector<Tensor<T>> encode(const SequenceModel<T>& model,
                              std::span<const std::vector<ItemId>> batch,
                              const EncodeOptions& options) {
  std::vector<Tensor<T>> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape<T> tape;
    const auto bound = model.params().bind(tape);
    EncodeOptions per_example = options;
    per_example.seed = derive_seed(options.seed, {i});
    out.push_back(encode_sequence<T>(bound, model, batch[i], per_example).value());
  }
  return out;
}

template <typename T>
std::vector<T> final_hidden(const SequenceModel<T>& model, std::span<const ItemId> items) {
  Tape<T> tape;
  const auto bound = model.params().bind(tape);
  const Var<T> hidden = encode_sequence<T>(bound, model, items, EncodeOptions{});
  const auto last = hidden.value().row_span(hidden.value().rows() - 1);
  return {last.begin(), last.end()};
}

template <typename T>
std::vector<T> score_items(const SequenceModel<T>& model, std::span<const T> hidden,
                           std::span<const ItemId> candidates) {
  const Tensor<T>& table = model.item_table();
  if (hidden.size() != table.cols()) throw ShapeError("score_items: hidden width mismatch");
  std::vector<T> out;
  out.reserve(candidates.size());
  for (ItemId c : candidates) {
    if (c == kPaddingItem) throw UsageError("score_items: padding id is not a candidate");
    if (c > model.config().num_items) throw UsageError("score_items: candidate out of range");
    const auto row = table.row_span(c);
    T dot{0};
    for (std::size_t j = 0; j < hidden.size(); ++j) dot += hidden[j] * row[j];
    out.push_back(dot);
  }
  return out;
}

template <typename T>
std::vector<T> score_all(const SequenceModel<T>& model, std::span<const T> hidden) {
  std::vector<ItemId> all(model.config().num_items);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<ItemId>(i + 1);
  return score_items(model, hidden, std::span<const ItemId>(all));
}

#define SEQREC_INSTANTIATE(T)                                                                    \
  template class SequenceModel<T>;                                                              \
  template Var<T> embed_sequence(std::span<const Var<T>>, const SequenceModel<T>&,              \
                                 std::span<const ItemId>, std::span<const std::size_t>);        \
  template Var<T> encode_sequence(std::span<const Var<T>>, const SequenceModel<T>&,             \
                                  std::span<const ItemId>, const EncodeOptions&);               \
  template std::vector<Tensor<T>> encode(const SequenceModel<T>&,                               \
                                         std::span<const std::vector<ItemId>>,                  \
                                         const EncodeOptions&);                                 \
  template std::vector<T> final_hidden(const SequenceModel<T>&, std::span<const ItemId>);       \
  template std::vector<T> score_items(const SequenceModel<T>&, std::span<const T>,              \
                                      std::span<const ItemId>);                                 \
  template std::vector<T> score_all(const SequenceModel<T>&, std::span<const T>);

SEQREC_INSTANTIATE(float)
SEQREC_INSTANTIATE(double)

#undef SEQREC_INSTANTIATE

}  // namespace seqrec
