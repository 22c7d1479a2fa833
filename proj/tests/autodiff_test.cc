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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "seqrec/autodiff.h"
#include "seqrec/gradcheck.h"
#include "test_util.h"

namespace seqrec {
namespace {

using testing::random_tensor;

constexpr double kGradTolerance = 1e-3;

Tensor<double> identity(std::size_t n) {
  Tensor<double> t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

TEST(Primitives, MatmulByIdentityIsNoop) {
  Tape<double> tape;
  const auto a = random_tensor<double>({3, 5}, 1);
  const auto out = matmul(tape.constant(identity(3)), tape.constant(a));
  EXPECT_EQ(out.value(), a);
}

TEST(Primitives, MatmulShapeMismatchThrows) {
  Tape<double> tape;
  auto a = tape.constant(Tensor<double>(Shape{2, 3}));
  auto b = tape.constant(Tensor<double>(Shape{2, 3}));
  EXPECT_THROW(matmul(a, b), ShapeError);
}

TEST(Primitives, SoftmaxOfEqualEntriesIsUniform) {
  Tape<double> tape;
  const auto out = softmax_rows(tape.constant(Tensor<double>::matrix(2, 2, {0, 0, 1, 1})));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.value()[i], 0.5);
}

TEST(Primitives, SoftmaxRowsSumToOneAndStayOpen) {
  Tape<double> tape;
  const auto out = softmax_rows(tape.constant(random_tensor<double>({7, 9}, 2, -5, 5)));
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (double v : out.value().row_span(r)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Primitives, SoftmaxMaskedRowIsZero) {
  Tape<double> tape;
  const auto out = softmax_rows(tape.constant(Tensor<double>::matrix(2, 2, {3, 4, 1, 2})), {1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(out.value().at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out.value().at(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(out.value().at(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.value().at(1, 1), 0.0);
}

TEST(Primitives, LayerNormGivesZeroMeanUnitVariance) {
  Tape<double> tape;
  const auto out = layernorm_rows(tape.constant(Tensor<double>::matrix(1, 3, {1, 2, 3})),
                                  tape.constant(Tensor<double>::row({1, 1, 1})),
                                  tape.constant(Tensor<double>::row({0, 0, 0})));
  // Direct evaluation: mean 2, population variance 2/3.
  const double sd = std::sqrt(2.0 / 3.0 + kLayerNormEpsilon);
  const auto& v = out.value();
  EXPECT_NEAR(v[0], -1.0 / sd, 1e-12);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
  EXPECT_NEAR(v[2], 1.0 / sd, 1e-12);
  const double mean = (v[0] + v[1] + v[2]) / 3.0;
  const double var = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / 3.0 - mean * mean;
  EXPECT_NEAR(mean, 0.0, 1e-6);
  EXPECT_NEAR(var, 1.0, 1e-6);
}

TEST(Primitives, GatherNoRowIsZero) {
  Tape<double> tape;
  const auto table = random_tensor<double>({4, 3}, 3);
  const auto out = embedding_gather(tape.constant(table), {2, kNoRow, 0});
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(out.value().at(0, c), table.at(2, c));
    EXPECT_EQ(out.value().at(1, c), 0.0);
    EXPECT_EQ(out.value().at(2, c), table.at(0, c));
  }
}

TEST(Primitives, GatherOutOfRangeThrows) {
  Tape<double> tape;
  EXPECT_THROW(embedding_gather(tape.constant(Tensor<double>(Shape{4, 3})), {4}), ShapeError);
}

TEST(Primitives, NonFiniteOutputThrows) {
  Tape<double> tape;
  auto big = tape.constant(Tensor<double>::row({1e300}));
  EXPECT_THROW(multiply(big, big), NumericError);
}

TEST(Primitives, NamesRoundTripAndUnknownNameThrows) {
  for (auto kind : {PrimitiveKind::kMatmul, PrimitiveKind::kSoftmaxRows, PrimitiveKind::kLogisticBce,
                    PrimitiveKind::kCosineRows}) {
    EXPECT_EQ(parse_primitive_kind(primitive_name(kind)), kind);
  }
  EXPECT_THROW(parse_primitive_kind("conv2d"), UsageError);
}

TEST(Dropout, ZeroFractionWithinThreeSigma) {
  constexpr std::size_t n = 100000;
  constexpr double keep = 0.8;
  Tape<double> tape;
  const auto out = dropout(tape.constant(Tensor<double>(Shape{n}, 1.0)), keep, true, 42);
  std::size_t zeros = 0;
  for (double v : out.value().data()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 1.0 / keep);
    }
  }
  const double sigma = std::sqrt(n * keep * (1 - keep));
  EXPECT_NEAR(static_cast<double>(zeros), n * (1 - keep), 3 * sigma);
}

TEST(Dropout, EvalModeIsIdentity) {
  Tape<double> tape;
  const auto x = random_tensor<double>({5, 5}, 4);
  EXPECT_EQ(dropout(tape.constant(x), 0.5, false, 1).value(), x);
}

TEST(Backward, ReduceMeanGradientIsUniform) {
  Tape<double> tape;
  auto x = tape.variable(Tensor<double>::row({1, 2, 3, 4}));
  const auto grads = tape.backward(reduce_mean(x));
  for (double g : grads.of(x).data()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(Backward, LogisticBceAtZeroLogit) {
  Tape<double> tape;
  auto logit = tape.variable(Tensor<double>::row({0.0}));
  const auto grads = tape.backward(reduce_mean(logistic_bce(logit, {1.0})));
  EXPECT_NEAR(grads.of(logit)[0], -0.5, 1e-15);
}

TEST(Backward, LogisticBceStableAtLargeLogits) {
  Tape<double> tape;
  auto logits = tape.variable(Tensor<double>::row({80.0, -80.0}));
  const auto loss = logistic_bce(logits, {1.0, 0.0});
  EXPECT_TRUE(loss.value().all_finite());
  EXPECT_LT(loss.value()[0], 1e-30);
  EXPECT_LT(loss.value()[1], 1e-30);
}

TEST(Backward, SecondCallRejected) {
  Tape<double> tape;
  auto x = tape.variable(Tensor<double>::row({1, 2}));
  const auto loss = reduce_mean(x);
  tape.backward(loss);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(loss), UsageError);
}

TEST(Backward, NonScalarLossRejected) {
  Tape<double> tape;
  auto x = tape.variable(Tensor<double>::row({1, 2}));
  EXPECT_THROW(tape.backward(scale(x, 2.0)), ShapeError);
}

TEST(Backward, NonParticipatingLeafGetsZeros) {
  Tape<double> tape;
  auto x = tape.variable(Tensor<double>::row({1, 2}));
  auto unused = tape.variable(Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  const auto grads = tape.backward(reduce_mean(x));
  ASSERT_TRUE(grads.contains(unused));
  EXPECT_EQ(grads.of(unused), Tensor<double>(Shape{2, 2}));
}

TEST(Backward, GatherOnlyTouchesGatheredRows) {
  Tape<double> tape;
  auto table = tape.variable(random_tensor<double>({5, 3}, 5));
  const auto grads = tape.backward(reduce_mean(embedding_gather(table, {1, 3, 1, kNoRow})));
  const auto& g = grads.of(table);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == 1 || r == 3) {
        EXPECT_NE(g.at(r, c), 0.0);
      } else {
        EXPECT_EQ(g.at(r, c), 0.0);
      }
    }
  }
}

TEST(GradCheck, SquareAtThree) {
  Tensor<double> w = Tensor<double>::row({3.0});
  std::vector<Tensor<double>*> params{&w};
  const ScalarFn fn = [](Tape<double>&, std::span<const Var<double>> p) {
    return reduce_mean(multiply(p[0], p[0]));
  };
  Tape<double> tape;
  auto leaf = tape.parameter(w);
  EXPECT_NEAR(tape.backward(fn(tape, std::vector{leaf})).of(leaf)[0], 6.0, 1e-12);
  EXPECT_LT(finite_difference_check(fn, params).max_relative_error, 1e-8);
}

TEST(GradCheck, DetectsNondeterminism) {
  Tensor<double> w = Tensor<double>::row({1.0, 2.0});
  std::vector<Tensor<double>*> params{&w};
  int calls = 0;
  const ScalarFn fn = [&calls](Tape<double>&, std::span<const Var<double>> p) {
    return reduce_mean(dropout(p[0], 0.5, true, static_cast<std::uint64_t>(++calls)));
  };
  EXPECT_THROW(finite_difference_check(fn, params), UsageError);
}

// One gradient check per primitive on randomized shapes up to 16 x 16.
class PrimitiveGradient : public ::testing::TestWithParam<PrimitiveKind> {};

TEST_P(PrimitiveGradient, MatchesFiniteDifferences) {
  const PrimitiveKind kind = GetParam();
  Rng shape_rng(static_cast<std::uint64_t>(kind) + 100);
  const std::size_t rows = 1 + uniform_below(shape_rng, 16);
  const std::size_t cols = 2 + uniform_below(shape_rng, 15);
  const std::size_t inner = 1 + uniform_below(shape_rng, 16);
  const auto seed = static_cast<std::uint64_t>(kind) * 10;

  Tensor<double> a = random_tensor<double>({rows, cols}, seed + 1);
  Tensor<double> b = random_tensor<double>({rows, cols}, seed + 2);
  Tensor<double> mm = random_tensor<double>({cols, inner}, seed + 3);
  Tensor<double> gain = random_tensor<double>({cols}, seed + 4, 0.5, 1.5);
  Tensor<double> bias = random_tensor<double>({cols}, seed + 5);
  Tensor<double> row = random_tensor<double>({cols}, seed + 6);
  // Mixing weights make the scalar loss sensitive to every output entry.
  const Tensor<double> mix = random_tensor<double>({rows, cols}, seed + 7);
  std::vector<double> labels(rows * cols);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(i % 2);
  std::vector<std::uint8_t> allowed(rows * cols, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = r + 1; c < cols; ++c) allowed[r * cols + c] = 0;
  }
  // Keep relu inputs away from the kink.
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (std::abs(a[i]) < 0.05) a[i] += 0.1;
  }

  std::vector<Tensor<double>*> params;
  switch (kind) {
    case PrimitiveKind::kMatmul: params = {&a, &mm}; break;
    case PrimitiveKind::kAdd: params = {&a, &row}; break;
    case PrimitiveKind::kLayerNormRows: params = {&a, &gain, &bias}; break;
    case PrimitiveKind::kMultiply:
    case PrimitiveKind::kConcatRows:
    case PrimitiveKind::kCosineRows: params = {&a, &b}; break;
    default: params = {&a};
  }

  const ScalarFn fn = [&](Tape<double>& tape, std::span<const Var<double>> p) {
    Var<double> out;
    switch (kind) {
      case PrimitiveKind::kMatmul: out = matmul(p[0], p[1]); break;
      case PrimitiveKind::kAdd: out = add(p[0], p[1]); break;
      case PrimitiveKind::kMultiply: out = multiply(p[0], p[1]); break;
      case PrimitiveKind::kScale: out = scale(p[0], -1.7); break;
      case PrimitiveKind::kRelu: out = relu(p[0]); break;
      case PrimitiveKind::kSoftmaxRows: out = softmax_rows(p[0], allowed); break;
      case PrimitiveKind::kLayerNormRows: out = layernorm_rows(p[0], p[1], p[2]); break;
      case PrimitiveKind::kEmbeddingGather: {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rows; ++i) idx.push_back((i * 7) % rows);
        idx.push_back(kNoRow);
        out = embedding_gather(p[0], idx);
        return reduce_mean(out);
      }
      case PrimitiveKind::kDropout: out = dropout(p[0], 0.7, true, 9); break;
      case PrimitiveKind::kTranspose: out = transpose(transpose(p[0])); break;
      case PrimitiveKind::kConcatRows: {
        std::vector<Var<double>> parts{p[0], p[1]};
        return reduce_mean(multiply(concat_rows<double>(parts), tape.constant([&] {
          Tensor<double> m(Shape{2 * rows, cols});
          for (std::size_t i = 0; i < m.numel(); ++i) m[i] = mix[i % mix.numel()];
          return m;
        }())));
      }
      case PrimitiveKind::kReduceMean: return reduce_mean(p[0]);
      case PrimitiveKind::kLogisticBce: out = logistic_bce(p[0], labels); break;
      case PrimitiveKind::kCosineRows: return reduce_mean(cosine_rows(p[0], p[1]));
      default: throw UsageError("unexpected kind");
    }
    if (out.shape() == mix.shape()) return reduce_mean(multiply(out, tape.constant(mix)));
    return reduce_mean(out);
  };
  const auto result = finite_difference_check(fn, params);
  EXPECT_GT(result.entries_checked, 0u);
  EXPECT_LT(result.max_relative_error, kGradTolerance) << primitive_name(kind);
}

INSTANTIATE_TEST_SUITE_P(
    AllPrimitives, PrimitiveGradient,
    ::testing::Values(PrimitiveKind::kMatmul, PrimitiveKind::kAdd, PrimitiveKind::kMultiply, PrimitiveKind::kScale,
                      PrimitiveKind::kRelu, PrimitiveKind::kSoftmaxRows, PrimitiveKind::kLayerNormRows,
                      PrimitiveKind::kEmbeddingGather, PrimitiveKind::kDropout, PrimitiveKind::kTranspose,
                      PrimitiveKind::kConcatRows, PrimitiveKind::kReduceMean, PrimitiveKind::kLogisticBce,
                      PrimitiveKind::kCosineRows),
    [](const auto& info) { return std::string(primitive_name(info.param)); });

TEST(GradCheck, TwoLayerNetwork) {
  Tensor<double> x = random_tensor<double>({6, 5}, 11);
  Tensor<double> w1 = random_tensor<double>({5, 8}, 12);
  Tensor<double> b1 = random_tensor<double>({8}, 13);
  Tensor<double> w2 = random_tensor<double>({8, 1}, 14);
  std::vector<Tensor<double>*> params{&w1, &b1, &w2};
  const ScalarFn fn = [&](Tape<double>& tape, std::span<const Var<double>> p) {
    auto h = relu(add(matmul(tape.constant(x), p[0]), p[1]));
    return reduce_mean(logistic_bce(matmul(h, p[2]), {1, 0, 1, 0, 1, 1}));
  };
  EXPECT_LT(finite_difference_check(fn, params).max_relative_error, kGradTolerance);
}

}  // namespace
}  // namespace seqrec
