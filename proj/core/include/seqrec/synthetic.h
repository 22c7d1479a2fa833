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
#include <vector>

#include "seqrec/interactions.h"

namespace seqrec {

// Synthetic interaction logs. Item i is interned as external name "i<k>" in
// order 1..n before any record, so internal item ids equal k; users likewise.

// User u (1-based) visits items s, s+1, ... around a cycle of `items`,
// starting at s = ((u - 1) mod items) + 1, for `length` steps.
InteractionLog cycle_corpus(std::size_t items, std::size_t users, std::size_t length);

// First-order Markov chains over `items` with a random transition matrix
// and a uniform start state.
InteractionLog markov_corpus(std::size_t items, std::size_t users, std::size_t length, std::uint64_t seed);

// Independent draws with P(item k) proportional to k^-exponent.
InteractionLog skewed_corpus(std::size_t items, std::size_t users, std::size_t length, double exponent,
                             std::uint64_t seed);

// Symbols 1..vocab drawn uniformly, for corpus statistics.
std::vector<std::vector<std::uint32_t>> uniform_symbol_sequences(std::size_t vocab, std::size_t sequences,
                                                                 std::size_t length, std::uint64_t seed);

}  // namespace seqrec
