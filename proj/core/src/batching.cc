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

#include "seqrec/batching.h"

#include <algorithm>
#include <map>
#include <string>

#include "seqrec/error.h"
#include "seqrec/rng.h"

namespace seqrec {

std::string_view to_string(PositionMode mode) {
  return mode == PositionMode::kAbsoluteTrick ? "absolute-trick" : "relative-exact";
}

PositionMode parse_position_mode(std::string_view text) {
  if (text == "absolute-trick") return PositionMode::kAbsoluteTrick;
  if (text == "relative-exact") return PositionMode::kRelativeExact;
  throw ConfigError("unknown position mode `" + std::string(text) + "`");
}

std::vector<PrefixExample> make_prefix_examples(const SequenceCorpus& corpus, PositionMode mode) {
  std::vector<PrefixExample> out;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    const std::vector<ItemId> train = corpus.of(u).train_symbols();
    if (train.size() < 2) continue;
    if (mode == PositionMode::kAbsoluteTrick) {
      out.push_back(PrefixExample{u, {train.begin(), train.end() - 1}, train.back()});
      continue;
    }
    for (std::size_t k = 1; k < train.size(); ++k) {
      out.push_back(PrefixExample{u, {train.begin(), train.begin() + static_cast<std::ptrdiff_t>(k)},
                                  train[k]});
    }
  }
  return out;
}

std::vector<BucketBatch> bucket_batches(std::vector<PrefixExample> examples,
                                        std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw UsageError("bucket_batches: batch_size must be positive");
  std::map<std::size_t, std::vector<PrefixExample>> buckets;
  for (PrefixExample& ex : examples) {
    const std::size_t k = ex.prefix.size();
    buckets[k].push_back(std::move(ex));
  }

  Rng rng(seed);
  std::vector<BucketBatch> batches;
  for (auto& [k, bucket] : buckets) {
    seeded_shuffle(bucket.begin(), bucket.end(), rng);
    for (std::size_t start = 0; start < bucket.size(); start += batch_size) {
      const std::size_t end = std::min(bucket.size(), start + batch_size);
      BucketBatch batch;
      batch.prefix_length = k;
      batch.examples.assign(std::make_move_iterator(bucket.begin() + static_cast<std::ptrdiff_t>(start)),
                            std::make_move_iterator(bucket.begin() + static_cast<std::ptrdiff_t>(end)));
      batches.push_back(std::move(batch));
    }
  }
  seeded_shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::vector<ItemId> pad_truncate(std::span<const ItemId> sequence, std::size_t max_len) {
  if (max_len == 0) throw UsageError("pad_truncate: max_len must be at least 1");
  std::vector<ItemId> out(max_len, kPaddingItem);
  const std::size_t keep = std::min(max_len, sequence.size());
  std::copy(sequence.end() - static_cast<std::ptrdiff_t>(keep), sequence.end(),
            out.end() - static_cast<std::ptrdiff_t>(keep));
  return out;
}

}  // namespace seqrec
