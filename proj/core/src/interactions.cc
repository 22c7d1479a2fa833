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

#include "seqrec/interactions.h"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "seqrec/error.h"
#include "seqrec/kv.h"

namespace seqrec {

std::uint32_t IdMap::intern(std::string_view external) {
  auto [it, inserted] = to_internal_.try_emplace(std::string(external), 0);
  if (inserted) {
    externals_.emplace_back(external);
    it->second = static_cast<std::uint32_t>(externals_.size());
  }
  return it->second;
}

std::uint32_t IdMap::find(std::string_view external) const {
  auto it = to_internal_.find(std::string(external));
  return it == to_internal_.end() ? 0 : it->second;
}

const std::string& IdMap::external(std::uint32_t internal) const {
  if (internal == 0 || internal > externals_.size()) {
    throw UsageError("IdMap: internal id " + std::to_string(internal) + " is not mapped");
  }
  return externals_[internal - 1];
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  throw FormatError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

InteractionLog parse_interactions(std::istream& in, TimestampMode mode) {
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_ws(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() < 2 || fields.size() > 3) {
      line_error(line_no, "expected `user item [timestamp]`, got " +
                              std::to_string(fields.size()) + " fields");
    }
    const bool has_ts = fields.size() == 3;
    if (mode == TimestampMode::kAuto) mode = has_ts ? TimestampMode::kRequired : TimestampMode::kAbsent;
    if (mode == TimestampMode::kRequired && !has_ts) line_error(line_no, "missing timestamp");
    if (mode == TimestampMode::kAbsent && has_ts) line_error(line_no, "unexpected timestamp");

    Interaction rec;
    rec.order = log.records.size();
    rec.timestamp = static_cast<std::int64_t>(rec.order);
    if (has_ts) {
      const std::string_view ts = fields[2];
      auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), rec.timestamp);
      if (ec != std::errc{} || ptr != ts.data() + ts.size()) {
        line_error(line_no, "timestamp `" + std::string(ts) + "` is not an integer");
      }
    }
    rec.user = log.users.intern(fields[0]);
    rec.item = log.items.intern(fields[1]);
    log.records.push_back(rec);
  }
  if (log.records.empty()) throw FormatError("interaction input is empty");
  return log;
}

std::string read_text_file(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) throw FormatError("cannot open " + path.string());
    std::string text;
    char buf[1 << 15];
    int got = 0;
    while ((got = gzread(file, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(got));
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw FormatError("corrupt gzip stream in " + path.string());
    return text;
  }
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open " + path.string());
  std::ostringstream text;
  text << file.rdbuf();
  return text.str();
}

InteractionLog read_interactions_file(const std::filesystem::path& path, TimestampMode mode) {
  std::istringstream in(read_text_file(path));
  try {
    return parse_interactions(in, mode);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
  const KeyValues kv = read_key_values_file(manifest_path);
  DatasetManifest manifest;
  bool saw_path = false;
  for (const auto& [key, value] : kv.entries) {
    if (key == "path") {
      manifest.path = value;
      saw_path = true;
    } else if (key == "has_timestamps") {
      manifest.has_timestamps = parse_bool(value, key);
    } else {
      throw FormatError(manifest_path.string() + ": unknown manifest key `" + key + "`");
    }
  }
  if (!saw_path) throw FormatError(manifest_path.string() + ": missing `path`");
  if (manifest.path.is_relative()) manifest.path = manifest_path.parent_path() / manifest.path;
  return manifest;
}

void write_manifest(const std::filesystem::path& manifest_path, const DatasetManifest& manifest) {
  std::ofstream out(manifest_path);
  if (!out) throw FormatError("cannot write " + manifest_path.string());
  out << "path=" << manifest.path.string() << '\n'
      << "has_timestamps=" << (manifest.has_timestamps ? "true" : "false") << '\n';
}

InteractionLog load_dataset(const DatasetManifest& manifest) {
  return read_interactions_file(manifest.path, manifest.has_timestamps ? TimestampMode::kRequired
                                                                       : TimestampMode::kAbsent);
}

void write_interactions(std::ostream& out, const InteractionLog& log) {
  for (const Interaction& r : log.records) {
    out << log.users.external(r.user) << ' ' << log.items.external(r.item) << ' ' << r.timestamp
        << '\n';
  }
}

}  // namespace seqrec
