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

#include <string>
#include <string_view>
#include <vector>

#include "seqrec/autodiff.h"
#include "seqrec/checkpoint.h"
#include "seqrec/error.h"

namespace seqrec {

// Ordered collection of named parameter tensors. Slot indices are stable and
// line up with the leaves returned by bind().
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> value) {
    for (const auto& n : names_) {
      if (n == name) throw UsageError("duplicate parameter name: " + name);
    }
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    throw FormatError("missing parameter `" + std::string(name) + "`");
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& at(std::size_t i) { return values_[i]; }
  const Tensor<T>& at(std::size_t i) const { return values_[i]; }

  std::vector<Var<T>> bind(Tape<T>& tape) const {
    std::vector<Var<T>> vars;
    vars.reserve(values_.size());
    for (const Tensor<T>& v : values_) vars.push_back(tape.parameter(v));
    return vars;
  }

  std::vector<Tensor<T>*> pointers() {
    std::vector<Tensor<T>*> out;
    for (Tensor<T>& v : values_) out.push_back(&v);
    return out;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  bool all_finite() const {
    for (const Tensor<T>& v : values_) {
      if (!v.all_finite()) return false;
    }
    return true;
  }

  void append_to(std::vector<NamedTensor>& out) const {
    for (std::size_t i = 0; i < size(); ++i) out.push_back(NamedTensor{names_[i], values_[i]});
  }

  // Tensors of the other precision are converted.
  static ParamStore from_named(const std::vector<NamedTensor>& tensors) {
    ParamStore out;
    for (const NamedTensor& t : tensors) {
      std::visit([&](const auto& tensor) { out.add(t.name, tensor.template cast<T>()); }, t.value);
    }
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
};

}  // namespace seqrec
