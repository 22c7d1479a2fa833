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

#include "seqrec/autodiff.h"
#include "seqrec/params.h"
#include "seqrec/rng.h"

namespace seqrec {

// Geometry of a causal self-attention stack.
struct StackShape {
  std::size_t d = 32;
  std::size_t blocks = 2;
  std::size_t heads = 1;
  std::size_t max_len = 50;
  double keep_prob = 0.8;

  std::size_t head_dim() const { return d / heads; }
  void validate() const;
};

struct BlockSlots {
  // Per-head projections: q/k/v are d x d/h, o is d/h x d. Summing the
  // per-head outputs through o is the concat-then-project of standard MHA.
  std::vector<std::size_t> wq, wk, wv, wo;
  std::size_t ln1_gain = 0, ln1_bias = 0;
  std::size_t ffn_w1 = 0, ffn_b1 = 0, ffn_w2 = 0, ffn_b2 = 0;
  std::size_t ln2_gain = 0, ln2_bias = 0;
};

struct StackSlots {
  std::size_t pos_table = 0;  // max_len x d, row p-1 holds position p
  std::vector<BlockSlots> blocks;
  std::size_t final_gain = 0, final_bias = 0;
};

struct EncodeOptions {
  bool train = false;
  std::uint64_t seed = 0;
};

inline constexpr double kInitBound = 0.02;

template <typename T>
void init_uniform(Tensor<T>& t, Rng& rng, double bound = kInitBound);

// Appends freshly initialized stack parameters named `<prefix>...`.
template <typename T>
StackSlots add_stack_params(ParamStore<T>& store, std::string_view prefix, const StackShape& shape,
                            Rng& rng);

template <typename T>
StackSlots find_stack_slots(const ParamStore<T>& store, std::string_view prefix,
                            const StackShape& shape);

// embedded (k x d) -> dropout -> blocks -> final layernorm. Query t attends
// to keys s <= t with key_valid[s] != 0.
template <typename T>
Var<T> run_stack(std::span<const Var<T>> bound, const StackSlots& slots, const StackShape& shape,
                 const Var<T>& embedded, std::span<const std::uint8_t> key_valid,
                 const EncodeOptions& options);

// Relative positions for a k-long sequence: slot j (1-based) -> k - j + 1.
std::vector<std::size_t> relative_positions(std::size_t k);

}  // namespace seqrec
