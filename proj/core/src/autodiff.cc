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

#include "seqrec/autodiff.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "seqrec/rng.h"

namespace seqrec {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

namespace {

constexpr std::array<std::pair<PrimitiveKind, std::string_view>, 15> kNames{{
    {PrimitiveKind::kLeaf, "leaf"},
    {PrimitiveKind::kMatmul, "matmul"},
    {PrimitiveKind::kAdd, "add"},
    {PrimitiveKind::kMultiply, "multiply"},
    {PrimitiveKind::kScale, "scale"},
    {PrimitiveKind::kRelu, "relu"},
    {PrimitiveKind::kSoftmaxRows, "softmax_rows"},
    {PrimitiveKind::kLayerNormRows, "layernorm_rows"},
    {PrimitiveKind::kEmbeddingGather, "embedding_gather"},
    {PrimitiveKind::kDropout, "dropout"},
    {PrimitiveKind::kTranspose, "transpose"},
    {PrimitiveKind::kConcatRows, "concat_rows"},
    {PrimitiveKind::kReduceMean, "reduce_mean"},
    {PrimitiveKind::kLogisticBce, "logistic_bce"},
    {PrimitiveKind::kCosineRows, "cosine_rows"},
}};

[[noreturn]] void shape_fail(PrimitiveKind kind, const std::string& what) {
  throw ShapeError(std::string(primitive_name(kind)) + ": " + what);
}

void expect_arity(PrimitiveKind kind, std::size_t got, std::size_t want) {
  if (got != want) {
    shape_fail(kind, "expected " + std::to_string(want) + " inputs, got " +
                         std::to_string(got));
  }
}

template <typename T>
void expect_matrix(PrimitiveKind kind, const Tensor<T>& t) {
  if (t.rank() != 2) shape_fail(kind, "expected a matrix, got " + shape_to_string(t.shape()));
}

template <typename T>
bool is_row_vector_for(const Tensor<T>& v, std::size_t cols) {
  return v.numel() == cols && v.rows() == 1;
}

// Stable log(1 + exp(x)).
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void accumulate(std::vector<Tensor<T>>& grads, std::vector<bool>& has_grad,
                std::size_t id, const Shape& shape, auto&& fn) {
  if (!has_grad[id]) {
    grads[id] = Tensor<T>(shape);
    has_grad[id] = true;
  }
  fn(grads[id]);
}

}  // namespace

std::string_view primitive_name(PrimitiveKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

PrimitiveKind parse_primitive_kind(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name && k != PrimitiveKind::kLeaf) return k;
  }
  throw UsageError("unknown primitive kind: " + std::string(name));
}

template <typename T>
const Tensor<T>& Gradients<T>::of(const Var<T>& leaf) const {
  auto it = by_leaf_.find(leaf.id());
  if (it == by_leaf_.end()) throw UsageError("no gradient recorded for this leaf");
  return it->second;
}

template <typename T>
Var<T> Tape<T>::push_leaf(Node node) {
  if (!node.get().all_finite()) throw NumericError("leaf value is not finite");
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push_leaf(std::move(n));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push_leaf(std::move(n));
}

template <typename T>
Var<T> Tape<T>::parameter(const Tensor<T>& value) {
  Node n;
  n.external = &value;
  n.requires_grad = true;
  return push_leaf(std::move(n));
}

template <typename T>
Var<T> Tape<T>::apply(PrimitiveKind kind, std::span<const Var<T>> inputs,
                      PrimitiveAttrs attrs) {
  if (kind == PrimitiveKind::kLeaf) throw UsageError("apply: leaf is not a primitive");
  if (consumed_) throw UsageError("apply: tape already consumed by backward");
  Node out;
  out.kind = kind;
  out.attrs = std::move(attrs);
  for (const Var<T>& v : inputs) {
    if (v.tape() != this) throw UsageError("apply: input belongs to another tape");
    out.inputs.push_back(v.id());
    out.requires_grad = out.requires_grad || v.requires_grad();
  }
  forward(out, inputs);
  if (!out.value.all_finite()) {
    throw NumericError(std::string(primitive_name(kind)) + ": non-finite output");
  }
  nodes_.push_back(std::move(out));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::forward(Node& out, std::span<const Var<T>> inputs) const {
  const PrimitiveKind kind = out.kind;
  auto in = [&](std::size_t i) -> const Tensor<T>& { return inputs[i].value(); };

  switch (kind) {
    case PrimitiveKind::kMatmul: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor<T>& a = in(0);
      const Tensor<T>& b = in(1);
      expect_matrix(kind, a);
      expect_matrix(kind, b);
      if (a.cols() != b.rows()) {
        shape_fail(kind, shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
      }
      const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
      Tensor<T> y(Shape{n, m});
      for (std::size_t i = 0; i < n; ++i) {
        T* yr = &y[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const T av = a[i * k + p];
          const T* br = &b[p * m];
          for (std::size_t j = 0; j < m; ++j) yr[j] += av * br[j];
        }
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kAdd: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor<T>& a = in(0);
      const Tensor<T>& b = in(1);
      Tensor<T> y = a;
      if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b[i];
      } else if (is_row_vector_for(b, a.cols())) {
        const std::size_t c = a.cols();
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b[i % c];
      } else {
        shape_fail(kind, shape_to_string(a.shape()) + " + " + shape_to_string(b.shape()));
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kMultiply: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor<T>& a = in(0);
      const Tensor<T>& b = in(1);
      if (a.shape() != b.shape()) {
        shape_fail(kind, shape_to_string(a.shape()) + " * " + shape_to_string(b.shape()));
      }
      Tensor<T> y = a;
      for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b[i];
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kScale: {
      expect_arity(kind, inputs.size(), 1);
      Tensor<T> y = in(0);
      const T s = static_cast<T>(out.attrs.scale);
      for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= s;
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kRelu: {
      expect_arity(kind, inputs.size(), 1);
      Tensor<T> y = in(0);
      for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::max(y[i], T{0});
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kSoftmaxRows: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor<T>& a = in(0);
      expect_matrix(kind, a);
      const auto& allowed = out.attrs.allowed;
      if (!allowed.empty() && allowed.size() != a.numel()) {
        shape_fail(kind, "mask size does not match input");
      }
      const std::size_t r = a.rows(), c = a.cols();
      Tensor<T> y(a.shape());
      for (std::size_t i = 0; i < r; ++i) {
        auto ok = [&](std::size_t j) { return allowed.empty() || allowed[i * c + j] != 0; };
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
          if (ok(j)) mx = std::max(mx, static_cast<double>(a.at(i, j)));
        }
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          if (ok(j)) sum += std::exp(static_cast<double>(a.at(i, j)) - mx);
        }
        for (std::size_t j = 0; j < c; ++j) {
          if (ok(j)) y.at(i, j) = static_cast<T>(std::exp(static_cast<double>(a.at(i, j)) - mx) / sum);
        }
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kLayerNormRows: {
      expect_arity(kind, inputs.size(), 3);
      const Tensor<T>& x = in(0);
      const Tensor<T>& g = in(1);
      const Tensor<T>& b = in(2);
      const std::size_t r = x.rows(), c = x.cols();
      if (!is_row_vector_for(g, c) || !is_row_vector_for(b, c)) {
        shape_fail(kind, "gain/bias must be row vectors of width " + std::to_string(c));
      }
      Tensor<T> y(x.shape());
      out.saved_a.assign(x.numel(), T{0});  // normalized input
      out.saved_b.assign(r, T{0});          // inverse std per row
      for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += x[i * c + j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dv = x[i * c + j] - mean;
          var += dv * dv;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        out.saved_b[i] = static_cast<T>(inv);
        for (std::size_t j = 0; j < c; ++j) {
          const T xhat = static_cast<T>((x[i * c + j] - mean) * inv);
          out.saved_a[i * c + j] = xhat;
          y[i * c + j] = xhat * g[j] + b[j];
        }
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kEmbeddingGather: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor<T>& table = in(0);
      expect_matrix(kind, table);
      const auto& idx = out.attrs.indices;
      if (idx.empty()) shape_fail(kind, "empty index list");
      const std::size_t d = table.cols();
      Tensor<T> y(Shape{idx.size(), d});
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] == kNoRow) continue;
        if (idx[i] >= table.rows()) {
          shape_fail(kind, "row " + std::to_string(idx[i]) + " out of range for table " +
                               shape_to_string(table.shape()));
        }
        std::copy_n(&table[idx[i] * d], d, &y[i * d]);
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kDropout: {
      expect_arity(kind, inputs.size(), 1);
      const double keep = out.attrs.keep_prob;
      if (!(keep > 0.0 && keep <= 1.0)) shape_fail(kind, "keep probability must be in (0,1]");
      Tensor<T> y = in(0);
      if (out.attrs.train && keep < 1.0) {
        Rng rng(out.attrs.seed);
        out.saved_a.resize(y.numel());
        const T kept = static_cast<T>(1.0 / keep);
        for (std::size_t i = 0; i < y.numel(); ++i) {
          out.saved_a[i] = uniform_unit(rng) < keep ? kept : T{0};
          y[i] *= out.saved_a[i];
        }
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kTranspose: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor<T>& a = in(0);
      expect_matrix(kind, a);
      const std::size_t r = a.rows(), c = a.cols();
      Tensor<T> y(Shape{c, r});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y.at(j, i) = a.at(i, j);
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kConcatRows: {
      if (inputs.empty()) shape_fail(kind, "no inputs");
      const std::size_t c = in(0).cols();
      std::size_t rows = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        expect_matrix(kind, in(i));
        if (in(i).cols() != c) shape_fail(kind, "column counts differ");
        rows += in(i).rows();
      }
      Tensor<T> y(Shape{rows, c});
      std::size_t offset = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto src = in(i).data();
        std::copy(src.begin(), src.end(), y.data().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += src.size();
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kReduceMean: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor<T>& a = in(0);
      double sum = 0.0;
      for (std::size_t i = 0; i < a.numel(); ++i) sum += a[i];
      out.value = Tensor<T>::scalar(static_cast<T>(sum / static_cast<double>(a.numel())));
      break;
    }
    case PrimitiveKind::kLogisticBce: {
      expect_arity(kind, inputs.size(), 1);
      const Tensor<T>& x = in(0);
      const auto& labels = out.attrs.labels;
      if (labels.size() != x.numel()) shape_fail(kind, "label count does not match logits");
      Tensor<T> y(x.shape());
      out.saved_a.resize(x.numel());
      for (std::size_t i = 0; i < x.numel(); ++i) {
        const double z = x[i];
        const double t = labels[i];
        // -t log s(z) - (1-t) log(1 - s(z)) = softplus(z) - t z
        y[i] = static_cast<T>(softplus(z) - t * z);
        out.saved_a[i] = static_cast<T>(sigmoid(z));
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kCosineRows: {
      expect_arity(kind, inputs.size(), 2);
      const Tensor<T>& a = in(0);
      const Tensor<T>& b = in(1);
      if (a.shape() != b.shape()) shape_fail(kind, "operand shapes differ");
      const std::size_t r = a.rows(), c = a.cols();
      Tensor<T> y(Shape{r, 1});
      out.saved_a.resize(3 * r);
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dot += static_cast<double>(a[i * c + j]) * b[i * c + j];
          na += static_cast<double>(a[i * c + j]) * a[i * c + j];
          nb += static_cast<double>(b[i * c + j]) * b[i * c + j];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        if (na == 0.0 || nb == 0.0) throw NumericError("cosine_rows: zero-norm vector");
        out.saved_a[3 * i] = static_cast<T>(dot);
        out.saved_a[3 * i + 1] = static_cast<T>(na);
        out.saved_a[3 * i + 2] = static_cast<T>(nb);
        y[i] = static_cast<T>(dot / (na * nb));
      }
      out.value = std::move(y);
      break;
    }
    case PrimitiveKind::kLeaf:
      throw UsageError("leaf is not a primitive");
  }
}

template <typename T>
void Tape<T>::backward_node(const Node& n, const Tensor<T>& g,
                            std::vector<Tensor<T>>& grads,
                            std::vector<bool>& has_grad) const {
  auto input = [&](std::size_t i) -> const Node& { return nodes_[n.inputs[i]]; };
  auto flows = [&](std::size_t i) { return input(i).requires_grad; };
  auto acc = [&](std::size_t i, auto&& fn) {
    if (!flows(i)) return;
    accumulate<T>(grads, has_grad, n.inputs[i], input(i).get().shape(), fn);
  };

  switch (n.kind) {
    case PrimitiveKind::kMatmul: {
      const Tensor<T>& a = input(0).get();
      const Tensor<T>& b = input(1).get();
      const std::size_t rn = a.rows(), k = a.cols(), m = b.cols();
      acc(0, [&](Tensor<T>& ga) {  // dA = dY B^T
        for (std::size_t i = 0; i < rn; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            T s{0};
            for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * b[p * m + j];
            ga[i * k + p] += s;
          }
      });
      acc(1, [&](Tensor<T>& gb) {  // dB = A^T dY
        for (std::size_t i = 0; i < rn; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += av * g[i * m + j];
          }
      });
      break;
    }
    case PrimitiveKind::kAdd: {
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
      });
      acc(1, [&](Tensor<T>& gb) {
        if (gb.numel() == g.numel()) {
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
        } else {
          const std::size_t c = gb.numel();
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i % c] += g[i];
        }
      });
      break;
    }
    case PrimitiveKind::kMultiply: {
      const Tensor<T>& a = input(0).get();
      const Tensor<T>& b = input(1).get();
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * b[i];
      });
      acc(1, [&](Tensor<T>& gb) {
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * a[i];
      });
      break;
    }
    case PrimitiveKind::kScale: {
      const T s = static_cast<T>(n.attrs.scale);
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * s;
      });
      break;
    }
    case PrimitiveKind::kRelu: {
      const Tensor<T>& a = input(0).get();
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (a[i] > T{0}) ga[i] += g[i];
        }
      });
      break;
    }
    case PrimitiveKind::kSoftmaxRows: {
      const Tensor<T>& y = n.value;
      const std::size_t r = y.rows(), c = y.cols();
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += static_cast<double>(y.at(i, j)) * g.at(i, j);
          for (std::size_t j = 0; j < c; ++j) {
            ga.at(i, j) += static_cast<T>(y.at(i, j) * (g.at(i, j) - dot));
          }
        }
      });
      break;
    }
    case PrimitiveKind::kLayerNormRows: {
      const Tensor<T>& gain = input(1).get();
      const std::size_t r = n.value.rows(), c = n.value.cols();
      const auto& xhat = n.saved_a;
      const auto& inv = n.saved_b;
      acc(0, [&](Tensor<T>& gx) {
        for (std::size_t i = 0; i < r; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = static_cast<double>(g[i * c + j]) * gain[j];
            mean_d += d;
            mean_dx += d * xhat[i * c + j];
          }
          mean_d /= static_cast<double>(c);
          mean_dx /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const double d = static_cast<double>(g[i * c + j]) * gain[j];
            gx[i * c + j] += static_cast<T>(inv[i] * (d - mean_d - xhat[i * c + j] * mean_dx));
          }
        }
      });
      acc(1, [&](Tensor<T>& gg) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
      });
      acc(2, [&](Tensor<T>& gb) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
      });
      break;
    }
    case PrimitiveKind::kEmbeddingGather: {
      const auto& idx = n.attrs.indices;
      const std::size_t d = g.cols();
      acc(0, [&](Tensor<T>& gt) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (idx[i] == kNoRow) continue;
          for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += g[i * d + j];
        }
      });
      break;
    }
    case PrimitiveKind::kDropout: {
      acc(0, [&](Tensor<T>& ga) {
        if (n.saved_a.empty()) {
          for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        } else {
          for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.saved_a[i];
        }
      });
      break;
    }
    case PrimitiveKind::kTranspose: {
      const std::size_t r = g.rows(), c = g.cols();
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga.at(j, i) += g.at(i, j);
      });
      break;
    }
    case PrimitiveKind::kConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t count = input(k).get().numel();
        acc(k, [&](Tensor<T>& gk) {
          for (std::size_t i = 0; i < count; ++i) gk[i] += g[offset + i];
        });
        offset += count;
      }
      break;
    }
    case PrimitiveKind::kReduceMean: {
      const std::size_t count = input(0).get().numel();
      const T share = static_cast<T>(static_cast<double>(g[0]) / static_cast<double>(count));
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < count; ++i) ga[i] += share;
      });
      break;
    }
    case PrimitiveKind::kLogisticBce: {
      const auto& labels = n.attrs.labels;
      acc(0, [&](Tensor<T>& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i] * static_cast<T>(n.saved_a[i] - labels[i]);
        }
      });
      break;
    }
    case PrimitiveKind::kCosineRows: {
      const Tensor<T>& a = input(0).get();
      const Tensor<T>& b = input(1).get();
      const std::size_t r = a.rows(), c = a.cols();
      // d cos / d a = b / (|a||b|) - cos * a / |a|^2
      auto grad_wrt = [&](Tensor<T>& out, const Tensor<T>& self, const Tensor<T>& other,
                          bool self_is_a) {
        for (std::size_t i = 0; i < r; ++i) {
          const double dot = n.saved_a[3 * i];
          const double na = n.saved_a[3 * i + 1];
          const double nb = n.saved_a[3 * i + 2];
          const double ns = self_is_a ? na : nb;
          const double cosv = dot / (na * nb);
          for (std::size_t j = 0; j < c; ++j) {
            const double v = other[i * c + j] / (na * nb) - cosv * self[i * c + j] / (ns * ns);
            out[i * c + j] += static_cast<T>(g[i] * v);
          }
        }
      };
      acc(0, [&](Tensor<T>& ga) { grad_wrt(ga, a, b, true); });
      acc(1, [&](Tensor<T>& gb) { grad_wrt(gb, b, a, false); });
      break;
    }
    case PrimitiveKind::kLeaf:
      break;
  }
}

template <typename T>
Gradients<T> Tape<T>::backward(const Var<T>& loss) {
  if (consumed_) throw UsageError("backward: tape already consumed");
  if (loss.tape() != this) throw UsageError("backward: loss belongs to another tape");
  if (loss.value().numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  }
  consumed_ = true;

  std::vector<Tensor<T>> grads(nodes_.size());
  std::vector<bool> has_grad(nodes_.size(), false);
  if (nodes_[loss.id()].requires_grad) {
    grads[loss.id()] = Tensor<T>(loss.shape(), T{1});
    has_grad[loss.id()] = true;
  }
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!has_grad[id] || n.kind == PrimitiveKind::kLeaf) continue;
    if (!grads[id].all_finite()) {
      throw NumericError(std::string("backward: non-finite gradient at ") +
                         std::string(primitive_name(n.kind)));
    }
    backward_node(n, grads[id], grads, has_grad);
    if (id != loss.id()) {
      grads[id] = Tensor<T>();  // interior gradient no longer needed
    }
  }

  Gradients<T> out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.kind != PrimitiveKind::kLeaf || !n.requires_grad) continue;
    if (has_grad[id]) {
      if (!grads[id].all_finite()) throw NumericError("backward: non-finite leaf gradient");
      out.by_leaf_.emplace(id, std::move(grads[id]));
    } else {
      out.by_leaf_.emplace(id, Tensor<T>(n.get().shape()));
    }
  }
  return out;
}

namespace {

template <typename T>
Var<T> apply1(const Var<T>& a, PrimitiveKind kind, PrimitiveAttrs attrs = {}) {
  const std::array<Var<T>, 1> in{a};
  return a.tape()->apply(kind, in, std::move(attrs));
}

template <typename T>
Var<T> apply2(const Var<T>& a, const Var<T>& b, PrimitiveKind kind) {
  const std::array<Var<T>, 2> in{a, b};
  return a.tape()->apply(kind, in);
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) { return apply2(a, b, PrimitiveKind::kMatmul); }
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) { return apply2(a, b, PrimitiveKind::kAdd); }
template <typename T>
Var<T> multiply(const Var<T>& a, const Var<T>& b) { return apply2(a, b, PrimitiveKind::kMultiply); }

template <typename T>
Var<T> scale(const Var<T>& a, double factor) {
  PrimitiveAttrs attrs;
  attrs.scale = factor;
  return apply1(a, PrimitiveKind::kScale, std::move(attrs));
}

template <typename T>
Var<T> relu(const Var<T>& a) { return apply1(a, PrimitiveKind::kRelu); }

template <typename T>
Var<T> softmax_rows(const Var<T>& a, std::vector<std::uint8_t> allowed) {
  PrimitiveAttrs attrs;
  attrs.allowed = std::move(allowed);
  return apply1(a, PrimitiveKind::kSoftmaxRows, std::move(attrs));
}

template <typename T>
Var<T> layernorm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias) {
  const std::array<Var<T>, 3> in{x, gain, bias};
  return x.tape()->apply(PrimitiveKind::kLayerNormRows, in);
}

template <typename T>
Var<T> embedding_gather(const Var<T>& table, std::vector<std::size_t> indices) {
  PrimitiveAttrs attrs;
  attrs.indices = std::move(indices);
  return apply1(table, PrimitiveKind::kEmbeddingGather, std::move(attrs));
}

template <typename T>
Var<T> dropout(const Var<T>& x, double keep_prob, bool train, std::uint64_t seed) {
  PrimitiveAttrs attrs;
  attrs.keep_prob = keep_prob;
  attrs.train = train;
  attrs.seed = seed;
  return apply1(x, PrimitiveKind::kDropout, std::move(attrs));
}

template <typename T>
Var<T> transpose(const Var<T>& a) { return apply1(a, PrimitiveKind::kTranspose); }

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  return parts.front().tape()->apply(PrimitiveKind::kConcatRows, parts);
}

template <typename T>
Var<T> reduce_mean(const Var<T>& a) { return apply1(a, PrimitiveKind::kReduceMean); }

template <typename T>
Var<T> logistic_bce(const Var<T>& logits, std::vector<double> labels) {
  PrimitiveAttrs attrs;
  attrs.labels = std::move(labels);
  return apply1(logits, PrimitiveKind::kLogisticBce, std::move(attrs));
}

template <typename T>
Var<T> cosine_rows(const Var<T>& a, const Var<T>& b) { return apply2(a, b, PrimitiveKind::kCosineRows); }

#define SEQREC_INSTANTIATE(T)                                                       \
  template class Gradients<T>;                                                      \
  template class Tape<T>;                                                           \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                \
  template Var<T> multiply(const Var<T>&, const Var<T>&);                           \
  template Var<T> scale(const Var<T>&, double);                                     \
  template Var<T> relu(const Var<T>&);                                              \
  template Var<T> softmax_rows(const Var<T>&, std::vector<std::uint8_t>);           \
  template Var<T> layernorm_rows(const Var<T>&, const Var<T>&, const Var<T>&);      \
  template Var<T> embedding_gather(const Var<T>&, std::vector<std::size_t>);        \
  template Var<T> dropout(const Var<T>&, double, bool, std::uint64_t);              \
  template Var<T> transpose(const Var<T>&);                                         \
  template Var<T> concat_rows(std::span<const Var<T>>);                             \
  template Var<T> reduce_mean(const Var<T>&);                                       \
  template Var<T> logistic_bce(const Var<T>&, std::vector<double>);                 \
  template Var<T> cosine_rows(const Var<T>&, const Var<T>&);

SEQREC_INSTANTIATE(float)
SEQREC_INSTANTIATE(double)

#undef SEQREC_INSTANTIATE

}  // namespace seqrec
