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
#include <vector>

#include "seqrec/interactions.h"

namespace seqrec {

// One element of a time-ordered sequence. `symbol` is an item in a user
// sequence and a user in an item (inverted) sequence.
struct Event {
  std::uint32_t symbol = 0;
  std::int64_t timestamp = 0;
  std::size_t order = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

// Leave-one-out view of one sequence: the last element is the test item,
// the second last the validation item, the rest is training data. Sequences
// shorter than kMinEvaluable carry no held-out items at all.
class SplitSequence {
 public:
  static constexpr std::size_t kMinEvaluable = 3;

  SplitSequence() = default;
  explicit SplitSequence(std::vector<Event> events) : events_(std::move(events)) {}

  std::span<const Event> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool evaluable() const { return events_.size() >= kMinEvaluable; }

  std::vector<std::uint32_t> symbols() const;
  std::size_t train_size() const { return evaluable() ? events_.size() - 2 : events_.size(); }
  std::span<const Event> train_events() const { return {events_.data(), train_size()}; }
  std::vector<std::uint32_t> train_symbols() const;
  // Only valid when evaluable().
  std::uint32_t validation_symbol() const;
  std::uint32_t test_symbol() const;

 private:
  std::vector<Event> events_;
};

// Per-user time-ordered item sequences, indexed by internal user id
// (slot 0 unused).
struct SequenceCorpus {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<SplitSequence> sequences;

  const SplitSequence& of(UserId user) const { return sequences.at(user); }
  std::size_t evaluable_users() const;
  // Interaction counts over training portions only (index 0 unused).
  std::vector<std::uint64_t> train_item_counts() const;
  // Set of items each user interacted with anywhere in its sequence.
  std::vector<std::uint8_t> interacted_mask(UserId user) const;
};

// Stable sort of each user's records by timestamp; ties keep input order.
SequenceCorpus build_sequences(const InteractionLog& log);

}  // namespace seqrec
