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

#include "seqrec/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace seqrec {
namespace {

double evaluate(const ScalarFn& fn, std::span<Tensor<double>* const> params) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  vars.reserve(params.size());
  for (Tensor<double>* p : params) vars.push_back(tape.parameter(*p));
  return fn(tape, vars).value().item();
}

}  // namespace

GradCheckResult finite_difference_check(const ScalarFn& fn,
                                        std::span<Tensor<double>* const> params,
                                        double epsilon) {
  if (!(epsilon > 0.0)) throw UsageError("finite_difference_check: epsilon must be positive");

  std::vector<Tensor<double>> analytic;
  double base = 0.0;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (Tensor<double>* p : params) vars.push_back(tape.parameter(*p));
    const Var<double> loss = fn(tape, vars);
    base = loss.value().item();
    const Gradients<double> grads = tape.backward(loss);
    for (const Var<double>& v : vars) analytic.push_back(grads.of(v));
  }
  if (evaluate(fn, params) != base) {
    throw UsageError("finite_difference_check: function is not deterministic");
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<double>& tensor = *params[p];
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + epsilon;
      const double up = evaluate(fn, params);
      tensor[i] = saved - epsilon;
      const double down = evaluate(fn, params);
      tensor[i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[p][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.entries_checked;
    }
  }
  return result;
}

}  // namespace seqrec
