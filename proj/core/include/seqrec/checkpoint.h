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
#include <string>
#include <variant>
#include <vector>

#include "seqrec/kv.h"
#include "seqrec/tensor.h"

namespace seqrec {

// Binary checkpoint layout, all integers little-endian:
//
//   "SEQR"                      magic
//   u32                         format version
//   u32 + bytes                 UTF-8 key=value config block
//   per tensor, in order:
//     u32 + bytes               name
//     u32                       rank
//     u64 * rank                extents
//     u8                        precision tag (4 = f32, 8 = f64)
//     values                    little-endian IEEE-754
//
// The config block carries `tensor_count`, so a file cut at a record
// boundary is still detected as truncated.
inline constexpr char kCheckpointMagic[4] = {'S', 'E', 'Q', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::variant<Tensor<float>, Tensor<double>> value;
};

struct Checkpoint {
  KeyValues config;  // must not contain `tensor_count`; the writer adds it
  std::vector<NamedTensor> tensors;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
// Throws FormatError on bad magic/version, truncation, or a name collision.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seqrec
