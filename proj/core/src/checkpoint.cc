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

#include "seqrec/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "seqrec/error.h"

namespace seqrec {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

void put_string(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_values(std::string& out, const Tensor<T>& t) {
  const auto data = t.data();
  out.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
}

template <typename T>
Tensor<T> get_values(Reader& in, Shape shape) {
  const std::size_t n = shape_numel(shape);
  const std::string_view raw = in.take(n * sizeof(T), "tensor values");
  std::vector<T> values(n);
  std::memcpy(values.data(), raw.data(), raw.size());
  return Tensor<T>(std::move(shape), std::move(values));
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.config.get("tensor_count")) {
    throw UsageError("checkpoint config must not set tensor_count");
  }
  std::string config;
  for (const auto& [key, value] : checkpoint.config.entries) config += key + "=" + value + "\n";
  config += "tensor_count=" + std::to_string(checkpoint.tensors.size()) + "\n";

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, config);
  for (const NamedTensor& t : checkpoint.tensors) {
    put_string(out, t.name);
    std::visit(
        [&](const auto& tensor) {
          using T = typename std::decay_t<decltype(tensor)>::value_type;
          put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
          for (std::size_t extent : tensor.shape()) put<std::uint64_t>(out, extent);
          put<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(T)));
          put_values(out, tensor);
        },
        t.value);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  const std::string_view magic = in.take(4, "magic");
  if (magic != std::string_view(kCheckpointMagic, 4)) throw FormatError("not a checkpoint: bad magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_len = in.get<std::uint32_t>("config length");
  Checkpoint checkpoint;
  checkpoint.config = parse_key_values(in.take(config_len, "config"), "checkpoint config");
  const auto count_text = checkpoint.config.get("tensor_count");
  if (!count_text) throw FormatError("checkpoint config lacks tensor_count");
  const std::uint64_t count = parse_uint(*count_text, "tensor_count");
  std::erase_if(checkpoint.config.entries, [](const auto& kv) { return kv.first == "tensor_count"; });

  std::set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = in.get<std::uint32_t>("tensor name length");
    t.name = std::string(in.take(name_len, "tensor name"));
    if (!seen.insert(t.name).second) throw FormatError("tensor name collision: " + t.name);
    const auto rank = in.get<std::uint32_t>("rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto extent = in.get<std::uint64_t>("extent");
      if (extent == 0) throw FormatError("zero extent in tensor " + t.name);
      shape.push_back(extent);
    }
    const auto tag = in.get<std::uint8_t>("precision tag");
    if (tag == 4) {
      t.value = get_values<float>(in, std::move(shape));
    } else if (tag == 8) {
      t.value = get_values<double>(in, std::move(shape));
    } else {
      throw FormatError("unknown precision tag " + std::to_string(tag));
    }
    checkpoint.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw FormatError("trailing bytes after last tensor");
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  try {
    return decode_checkpoint(bytes.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace seqrec
