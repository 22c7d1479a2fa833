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

#include <functional>
#include <span>

#include "seqrec/autodiff.h"

namespace seqrec {

// Builds a scalar loss on `tape` from the bound parameter leaves. Must be
// deterministic: dropout disabled, no hidden RNG state.
using ScalarFn =
    std::function<Var<double>(Tape<double>& tape, std::span<const Var<double>> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients against central differences, entry by
// entry, using |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws UsageError if two forward passes at the same point disagree.
GradCheckResult finite_difference_check(const ScalarFn& fn,
                                        std::span<Tensor<double>* const> params,
                                        double epsilon = 1e-5);

}  // namespace seqrec
