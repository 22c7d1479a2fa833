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

#include "seqrec/synthetic.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqrec/error.h"
#include "seqrec/rng.h"

namespace seqrec {

namespace {

InteractionLog empty_log(std::size_t items, std::size_t users) {
  if (items == 0 || users == 0) throw UsageError("synthetic corpus needs items and users");
  InteractionLog log;
  for (std::size_t k = 1; k <= items; ++k) log.items.intern("i" + std::to_string(k));
  for (std::size_t u = 1; u <= users; ++u) log.users.intern("u" + std::to_string(u));
  return log;
}

void append(InteractionLog& log, UserId user, ItemId item, std::int64_t timestamp) {
  log.records.push_back(Interaction{user, item, timestamp, log.records.size()});
}

// Inverse-CDF draw over items 1..n from an unnormalised cumulative table.
ItemId draw_cumulative(const std::vector<double>& cumulative, Rng& rng) {
  const double x = uniform_unit(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  const auto index = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                           cumulative.size() - 1);
  return static_cast<ItemId>(index + 1);
}

}  // namespace

InteractionLog cycle_corpus(std::size_t items, std::size_t users, std::size_t length) {
  InteractionLog log = empty_log(items, users);
  for (std::size_t u = 1; u <= users; ++u) {
    const std::size_t start = (u - 1) % items;
    for (std::size_t t = 0; t < length; ++t) {
      append(log, static_cast<UserId>(u), static_cast<ItemId>((start + t) % items + 1),
             static_cast<std::int64_t>(t));
    }
  }
  return log;
}

InteractionLog markov_corpus(std::size_t items, std::size_t users, std::size_t length, std::uint64_t seed) {
  InteractionLog log = empty_log(items, users);
  Rng rng(seed);
  std::vector<std::vector<double>> transitions(items + 1);
  for (std::size_t from = 1; from <= items; ++from) {
    double total = 0.0;
    for (std::size_t to = 1; to <= items; ++to) {
      total += -std::log(1.0 - uniform_unit(rng));  // Dirichlet(1) row via exponentials
      transitions[from].push_back(total);
    }
  }
  for (std::size_t u = 1; u <= users; ++u) {
    ItemId item = static_cast<ItemId>(uniform_below(rng, items) + 1);
    for (std::size_t t = 0; t < length; ++t) {
      append(log, static_cast<UserId>(u), item, static_cast<std::int64_t>(t));
      item = draw_cumulative(transitions[item], rng);
    }
  }
  return log;
}

InteractionLog skewed_corpus(std::size_t items, std::size_t users, std::size_t length, double exponent,
                             std::uint64_t seed) {
  InteractionLog log = empty_log(items, users);
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::size_t k = 1; k <= items; ++k) {
    total += std::pow(static_cast<double>(k), -exponent);
    cumulative.push_back(total);
  }
  Rng rng(seed);
  for (std::size_t u = 1; u <= users; ++u) {
    for (std::size_t t = 0; t < length; ++t) {
      append(log, static_cast<UserId>(u), draw_cumulative(cumulative, rng), static_cast<std::int64_t>(t));
    }
  }
  return log;
}

std::vector<std::vector<std::uint32_t>> uniform_symbol_sequences(std::size_t vocab, std::size_t sequences,
                                                                 std::size_t length, std::uint64_t seed) {
  if (vocab == 0) throw UsageError("uniform_symbol_sequences: empty vocabulary");
  Rng rng(seed);
  std::vector<std::vector<std::uint32_t>> out(sequences);
  for (auto& seq : out) {
    seq.resize(length);
    for (auto& s : seq) s = static_cast<std::uint32_t>(uniform_below(rng, vocab) + 1);
  }
  return out;
}

}  // namespace seqrec
