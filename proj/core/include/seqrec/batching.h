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

#include "seqrec/corpus.h"

namespace seqrec {

enum class PositionMode {
  kAbsoluteTrick,  // one causally-masked pass over a padded window per user
  kRelativeExact,  // every prefix is its own example, most recent item = position 1
};

std::string_view to_string(PositionMode mode);
PositionMode parse_position_mode(std::string_view text);

// One (prefix, next item) training instance. In absolute-trick mode the
// prefix is the user's whole training input and `target` its final label;
// the internal labels are the prefix shifted by one.
struct PrefixExample {
  UserId user = 0;
  std::vector<ItemId> prefix;
  ItemId target = 0;

  friend bool operator==(const PrefixExample&, const PrefixExample&) = default;
  friend auto operator<=>(const PrefixExample&, const PrefixExample&) = default;
};

struct BucketBatch {
  std::size_t prefix_length = 0;
  std::vector<PrefixExample> examples;
};

std::vector<PrefixExample> make_prefix_examples(const SequenceCorpus& corpus, PositionMode mode);

// Groups relative-exact examples by prefix length, shuffles each bucket and
// the order batches are emitted in, all from `seed`. Batches never mix
// lengths; every example appears exactly once.
std::vector<BucketBatch> bucket_batches(std::vector<PrefixExample> examples,
                                        std::size_t batch_size, std::uint64_t seed);

// Left-pads with kPaddingItem to `max_len`, or keeps the most recent
// `max_len` items.
std::vector<ItemId> pad_truncate(std::span<const ItemId> sequence, std::size_t max_len);

}  // namespace seqrec
