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
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqrec {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

inline constexpr ItemId kPaddingItem = 0;

// Dense external <-> internal id map. Internal ids start at 1 and follow
// first appearance; 0 is never assigned.
class IdMap {
 public:
  std::uint32_t intern(std::string_view external);
  // Returns 0 when unknown.
  std::uint32_t find(std::string_view external) const;
  const std::string& external(std::uint32_t internal) const;
  std::size_t size() const { return externals_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> to_internal_;
  std::vector<std::string> externals_;
};

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;
  std::size_t order = 0;  // position in the input, the tie-breaker
};

struct InteractionLog {
  IdMap users;
  IdMap items;
  std::vector<Interaction> records;

  std::size_t num_users() const { return users.size(); }
  std::size_t num_items() const { return items.size(); }
};

enum class TimestampMode {
  kAuto,      // first record decides; every later line must agree
  kRequired,
  kAbsent,    // line order is time order
};

// One record per line: `user item [timestamp]`, whitespace separated. Blank
// lines and lines starting with '#' are skipped. Throws FormatError with the
// offending line number.
InteractionLog parse_interactions(std::istream& in, TimestampMode mode = TimestampMode::kAuto);

// Reads a plain or gzip (".gz") interaction file.
InteractionLog read_interactions_file(const std::filesystem::path& path,
                                      TimestampMode mode = TimestampMode::kAuto);

// Reads a whole plain or gzip text file.
std::string read_text_file(const std::filesystem::path& path);

// Plain-text `key=value` manifest next to each dataset.
struct DatasetManifest {
  std::filesystem::path path;  // resolved against the manifest's directory
  bool has_timestamps = true;
};

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const DatasetManifest& manifest);

InteractionLog load_dataset(const DatasetManifest& manifest);

// Writes `log` as an interaction file with explicit timestamps in record
// order; parsing it back yields the same ids and the same sequences.
void write_interactions(std::ostream& out, const InteractionLog& log);

}  // namespace seqrec
