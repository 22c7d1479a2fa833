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

#include "seqrec/corpus.h"

#include <algorithm>

#include "seqrec/error.h"

namespace seqrec {

std::vector<std::uint32_t> SplitSequence::symbols() const {
  std::vector<std::uint32_t> out;
  out.reserve(events_.size());
  for (const Event& e : events_) out.push_back(e.symbol);
  return out;
}

std::vector<std::uint32_t> SplitSequence::train_symbols() const {
  std::vector<std::uint32_t> out;
  out.reserve(train_size());
  for (const Event& e : train_events()) out.push_back(e.symbol);
  return out;
}

std::uint32_t SplitSequence::validation_symbol() const {
  if (!evaluable()) throw UsageError("sequence too short to carry a validation item");
  return events_[events_.size() - 2].symbol;
}

std::uint32_t SplitSequence::test_symbol() const {
  if (!evaluable()) throw UsageError("sequence too short to carry a test item");
  return events_.back().symbol;
}

std::size_t SequenceCorpus::evaluable_users() const {
  return static_cast<std::size_t>(std::count_if(
      sequences.begin(), sequences.end(), [](const SplitSequence& s) { return s.evaluable(); }));
}

std::vector<std::uint64_t> SequenceCorpus::train_item_counts() const {
  std::vector<std::uint64_t> counts(num_items + 1, 0);
  for (const SplitSequence& s : sequences) {
    for (const Event& e : s.train_events()) ++counts[e.symbol];
  }
  return counts;
}

std::vector<std::uint8_t> SequenceCorpus::interacted_mask(UserId user) const {
  std::vector<std::uint8_t> mask(num_items + 1, 0);
  for (const Event& e : of(user).events()) mask[e.symbol] = 1;
  return mask;
}

SequenceCorpus build_sequences(const InteractionLog& log) {
  SequenceCorpus corpus;
  corpus.num_users = log.num_users();
  corpus.num_items = log.num_items();
  std::vector<std::vector<Event>> per_user(corpus.num_users + 1);
  for (const Interaction& r : log.records) {
    per_user[r.user].push_back(Event{r.item, r.timestamp, r.order});
  }
  corpus.sequences.reserve(per_user.size());
  for (auto& events : per_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    corpus.sequences.emplace_back(std::move(events));
  }
  return corpus;
}

}  // namespace seqrec
