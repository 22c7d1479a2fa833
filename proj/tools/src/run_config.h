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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/duality.h"
#include "seqrec/evaluation.h"
#include "seqrec/kv.h"
#include "seqrec/model.h"
#include "seqrec/sampling.h"
#include "seqrec/stats.h"
#include "seqrec/training.h"

namespace seqrec::cli {

// Every recognised key with its default. Resolution rejects anything else.
const KeyValues& default_run_config();

// Defaults, then the file (if any), then `key=value` overrides, in that
// order. Values are validated by the typed accessors below.
class RunConfig {
 public:
  static RunConfig resolve(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& overrides);

  const KeyValues& values() const { return values_; }
  std::string get(std::string_view key) const;

  // Sorted `key=value` lines; hashed into every report header.
  std::string text() const;
  std::uint64_t hash() const { return fnv1a64(text()); }

  std::uint64_t seed() const;
  std::filesystem::path out_dir() const;
  std::filesystem::path path(std::string_view key) const;  // empty when unset

  ModelConfig model(std::size_t num_items) const;
  TrainConfig train() const;
  SamplerSpec sampler() const;
  EvalProtocol eval() const;
  std::optional<ExposureConfig> exposure() const;
  DecodeSpec decode() const;
  std::size_t rollout_horizon() const;
  std::uint64_t audit_trials() const;
  DualOptions dual() const;

 private:
  KeyValues values_;
};

}  // namespace seqrec::cli
