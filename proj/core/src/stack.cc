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

#include "seqrec/stack.h"

#include <array>
#include <cmath>
#include <string>

namespace seqrec {

void StackShape::validate() const {
  if (d == 0 || blocks == 0 || heads == 0 || max_len == 0) {
    throw ConfigError("d, blocks, heads and max_len must be positive");
  }
  if (d % heads != 0) {
    throw ConfigError("d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  }
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("keep_prob must be in (0, 1]");
}

template <typename T>
void init_uniform(Tensor<T>& t, Rng& rng, double bound) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * bound);
  }
}

namespace {

std::string slot_name(std::string_view prefix, std::size_t block, std::string_view leaf) {
  return std::string(prefix) + "block" + std::to_string(block) + "." + std::string(leaf);
}

std::string head_name(std::string_view prefix, std::size_t block, std::string_view w,
                      std::size_t head) {
  return slot_name(prefix, block, "attn." + std::string(w) + std::to_string(head));
}

}  // namespace

template <typename T>
StackSlots add_stack_params(ParamStore<T>& store, std::string_view prefix, const StackShape& shape,
                            Rng& rng) {
  shape.validate();
  const std::size_t d = shape.d, dh = shape.head_dim();
  auto random = [&](Shape s) {
    Tensor<T> t(std::move(s));
    init_uniform(t, rng);
    return t;
  };
  StackSlots slots;
  slots.pos_table = store.add(std::string(prefix) + "pos_table", random({shape.max_len, d}));
  for (std::size_t b = 0; b < shape.blocks; ++b) {
    BlockSlots bs;
    for (std::size_t h = 0; h < shape.heads; ++h) {
      bs.wq.push_back(store.add(head_name(prefix, b, "q", h), random({d, dh})));
      bs.wk.push_back(store.add(head_name(prefix, b, "k", h), random({d, dh})));
      bs.wv.push_back(store.add(head_name(prefix, b, "v", h), random({d, dh})));
      bs.wo.push_back(store.add(head_name(prefix, b, "o", h), random({dh, d})));
    }
    bs.ln1_gain = store.add(slot_name(prefix, b, "ln1.gain"), Tensor<T>({1, d}, T{1}));
    bs.ln1_bias = store.add(slot_name(prefix, b, "ln1.bias"), Tensor<T>({1, d}));
    bs.ffn_w1 = store.add(slot_name(prefix, b, "ffn.w1"), random({d, d}));
    bs.ffn_b1 = store.add(slot_name(prefix, b, "ffn.b1"), Tensor<T>({1, d}));
    bs.ffn_w2 = store.add(slot_name(prefix, b, "ffn.w2"), random({d, d}));
    bs.ffn_b2 = store.add(slot_name(prefix, b, "ffn.b2"), Tensor<T>({1, d}));
    bs.ln2_gain = store.add(slot_name(prefix, b, "ln2.gain"), Tensor<T>({1, d}, T{1}));
    bs.ln2_bias = store.add(slot_name(prefix, b, "ln2.bias"), Tensor<T>({1, d}));
    slots.blocks.push_back(std::move(bs));
  }
  slots.final_gain = store.add(std::string(prefix) + "final_ln.gain", Tensor<T>({1, d}, T{1}));
  slots.final_bias = store.add(std::string(prefix) + "final_ln.bias", Tensor<T>({1, d}));
  return slots;
}

template <typename T>
StackSlots find_stack_slots(const ParamStore<T>& store, std::string_view prefix,
                            const StackShape& shape) {
  shape.validate();
  const std::size_t d = shape.d, dh = shape.head_dim();
  auto find = [&](const std::string& name, Shape expected) {
    const std::size_t i = store.index(name);
    if (store.at(i).shape() != expected) {
      throw FormatError("parameter `" + name + "` has shape " + shape_to_string(store.at(i).shape()) +
                        ", expected " + shape_to_string(expected));
    }
    return i;
  };
  StackSlots slots;
  slots.pos_table = find(std::string(prefix) + "pos_table", {shape.max_len, d});
  for (std::size_t b = 0; b < shape.blocks; ++b) {
    BlockSlots bs;
    for (std::size_t h = 0; h < shape.heads; ++h) {
      bs.wq.push_back(find(head_name(prefix, b, "q", h), {d, dh}));
      bs.wk.push_back(find(head_name(prefix, b, "k", h), {d, dh}));
      bs.wv.push_back(find(head_name(prefix, b, "v", h), {d, dh}));
      bs.wo.push_back(find(head_name(prefix, b, "o", h), {dh, d}));
    }
    bs.ln1_gain = find(slot_name(prefix, b, "ln1.gain"), {1, d});
    bs.ln1_bias = find(slot_name(prefix, b, "ln1.bias"), {1, d});
    bs.ffn_w1 = find(slot_name(prefix, b, "ffn.w1"), {d, d});
    bs.ffn_b1 = find(slot_name(prefix, b, "ffn.b1"), {1, d});
    bs.ffn_w2 = find(slot_name(prefix, b, "ffn.w2"), {d, d});
    bs.ffn_b2 = find(slot_name(prefix, b, "ffn.b2"), {1, d});
    bs.ln2_gain = find(slot_name(prefix, b, "ln2.gain"), {1, d});
    bs.ln2_bias = find(slot_name(prefix, b, "ln2.bias"), {1, d});
    slots.blocks.push_back(std::move(bs));
  }
  slots.final_gain = find(std::string(prefix) + "final_ln.gain", {1, d});
  slots.final_bias = find(std::string(prefix) + "final_ln.bias", {1, d});
  return slots;
}

template <typename T>
Var<T> run_stack(std::span<const Var<T>> bound, const StackSlots& slots, const StackShape& shape,
                 const Var<T>& embedded, std::span<const std::uint8_t> key_valid,
                 const EncodeOptions& options) {
  const std::size_t k = embedded.value().rows();
  if (embedded.value().cols() != shape.d) throw ShapeError("run_stack: embedding width mismatch");
  if (key_valid.size() != k) throw ShapeError("run_stack: key mask length mismatch");

  std::vector<std::uint8_t> allowed(k * k, 0);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t s = 0; s <= t; ++s) allowed[t * k + s] = key_valid[s];

  std::uint64_t dropout_calls = 0;
  auto drop = [&](const Var<T>& x) {
    return dropout(x, shape.keep_prob, options.train, derive_seed(options.seed, {dropout_calls++}));
  };
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(shape.head_dim()));

  Var<T> x = drop(embedded);
  for (const BlockSlots& bs : slots.blocks) {
    Var<T> attn;
    for (std::size_t h = 0; h < bs.wq.size(); ++h) {
      const Var<T> q = matmul(x, bound[bs.wq[h]]);
      const Var<T> key = matmul(x, bound[bs.wk[h]]);
      const Var<T> v = matmul(x, bound[bs.wv[h]]);
      const Var<T> scores = scale(matmul(q, transpose(key)), attn_scale);
      const Var<T> weights = softmax_rows(scores, allowed);
      const Var<T> head_out = matmul(matmul(weights, v), bound[bs.wo[h]]);
      attn = h == 0 ? head_out : add(attn, head_out);
    }
    x = layernorm_rows(add(x, drop(attn)), bound[bs.ln1_gain], bound[bs.ln1_bias]);
    const Var<T> hidden = relu(add(matmul(x, bound[bs.ffn_w1]), bound[bs.ffn_b1]));
    const Var<T> ffn = add(matmul(hidden, bound[bs.ffn_w2]), bound[bs.ffn_b2]);
    x = layernorm_rows(add(x, drop(ffn)), bound[bs.ln2_gain], bound[bs.ln2_bias]);
  }
  return layernorm_rows(x, bound[slots.final_gain], bound[slots.final_bias]);
}

std::vector<std::size_t> relative_positions(std::size_t k) {
  std::vector<std::size_t> out(k);
  for (std::size_t j = 0; j < k; ++j) out[j] = k - j;
  return out;
}

#define SEQREC_INSTANTIATE(T)                                                                  \
  template void init_uniform(Tensor<T>&, Rng&, double);                                       \
  template StackSlots add_stack_params(ParamStore<T>&, std::string_view, const StackShape&,   \
                                       Rng&);                                                  \
  template StackSlots find_stack_slots(const ParamStore<T>&, std::string_view,                \
                                       const StackShape&);                                     \
  template Var<T> run_stack(std::span<const Var<T>>, const StackSlots&, const StackShape&,    \
                            const Var<T>&, std::span<const std::uint8_t>, const EncodeOptions&);

SEQREC_INSTANTIATE(float)
SEQREC_INSTANTIATE(double)

#undef SEQREC_INSTANTIATE

}  // namespace seqrec
