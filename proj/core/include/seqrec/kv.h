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
#include <utility>
#include <vector>

namespace seqrec {

// Ordered `key = value` lines; '#' starts a comment line.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;

  std::optional<std::string> get(std::string_view key) const;
  void set(std::string key, std::string value);  // replaces or appends
};

// Throws FormatError on lines without '=' or on duplicate keys.
KeyValues parse_key_values(std::string_view text, std::string_view origin = "<text>");
KeyValues read_key_values_file(const std::filesystem::path& path);

std::string trim(std::string_view s);

bool parse_bool(std::string_view value, std::string_view key);
double parse_double(std::string_view value, std::string_view key);
std::int64_t parse_int(std::string_view value, std::string_view key);
std::uint64_t parse_uint(std::string_view value, std::string_view key);

// Round-trippable decimal form ("%.17g"), "inf"/"nan" spelled out.
std::string format_double(double value);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace seqrec
