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

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqrec/tensor.h"

namespace seqrec {

// The closed set of differentiable primitives. kCosineRows is used only by
// the duality consistency objective.
enum class PrimitiveKind {
  kLeaf,
  kMatmul,
  kAdd,
  kMultiply,
  kScale,
  kRelu,
  kSoftmaxRows,
  kLayerNormRows,
  kEmbeddingGather,
  kDropout,
  kTranspose,
  kConcatRows,
  kReduceMean,
  kLogisticBce,
  kCosineRows,
};

std::string_view primitive_name(PrimitiveKind kind);
// Throws UsageError for names outside the primitive set.
PrimitiveKind parse_primitive_kind(std::string_view name);

// Gather index that yields an all-zero row and receives no gradient.
inline constexpr std::size_t kNoRow = std::numeric_limits<std::size_t>::max();

inline constexpr double kLayerNormEpsilon = 1e-8;

struct PrimitiveAttrs {
  double scale = 1.0;                  // kScale
  std::vector<std::size_t> indices;    // kEmbeddingGather
  std::vector<std::uint8_t> allowed;   // kSoftmaxRows: rows*cols, 1 = may attend; empty = no mask
  double keep_prob = 1.0;              // kDropout
  bool train = false;                  // kDropout
  std::uint64_t seed = 0;              // kDropout
  std::vector<double> labels;          // kLogisticBce
};

template <typename T>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// owning tape is alive.
template <typename T>
class Var {
 public:
  Var() = default;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Gradients {
 public:
  // Gradient for a requires_grad leaf; zero-filled if it did not participate.
  const Tensor<T>& of(const Var<T>& leaf) const;
  bool contains(const Var<T>& leaf) const { return by_leaf_.count(leaf.id()) != 0; }
  std::size_t size() const { return by_leaf_.size(); }

 private:
  friend class Tape<T>;
  std::unordered_map<std::size_t, Tensor<T>> by_leaf_;
};

// Records primitive applications in topological order and runs one
// reverse-mode pass over them.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> variable(Tensor<T> value);
  // Leaf that references `value` without copying; `value` must outlive the tape.
  Var<T> parameter(const Tensor<T>& value);

  Var<T> apply(PrimitiveKind kind, std::span<const Var<T>> inputs,
               PrimitiveAttrs attrs = {});

  // Single use: a second call throws UsageError.
  Gradients<T> backward(const Var<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  friend class Var<T>;

  struct Node {
    PrimitiveKind kind = PrimitiveKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    bool requires_grad = false;
    PrimitiveAttrs attrs;
    std::vector<T> saved_a;
    std::vector<T> saved_b;

    const Tensor<T>& get() const { return external ? *external : value; }
  };

  Var<T> push_leaf(Node node);
  const Node& node(std::size_t id) const { return nodes_[id]; }
  void forward(Node& out, std::span<const Var<T>> inputs) const;
  void backward_node(const Node& n, const Tensor<T>& grad,
                     std::vector<Tensor<T>>& grads,
                     std::vector<bool>& has_grad) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->node(id_).get();
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}

// Typed wrappers over Tape::apply.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// Same shape, or `b` a row vector broadcast over the rows of `a`.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> multiply(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, double factor);
template <typename T> Var<T> relu(const Var<T>& a);
// Rows with no allowed entry produce all zeros.
template <typename T>
Var<T> softmax_rows(const Var<T>& a, std::vector<std::uint8_t> allowed = {});
template <typename T>
Var<T> layernorm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias);
template <typename T>
Var<T> embedding_gather(const Var<T>& table, std::vector<std::size_t> indices);
template <typename T>
Var<T> dropout(const Var<T>& x, double keep_prob, bool train, std::uint64_t seed);
template <typename T> Var<T> transpose(const Var<T>& a);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T> Var<T> reduce_mean(const Var<T>& a);
// Elementwise binary cross-entropy on logits.
template <typename T>
Var<T> logistic_bce(const Var<T>& logits, std::vector<double> labels);
// Row-wise cosine similarity of two equally shaped matrices; output rows x 1.
template <typename T> Var<T> cosine_rows(const Var<T>& a, const Var<T>& b);

}  // namespace seqrec
