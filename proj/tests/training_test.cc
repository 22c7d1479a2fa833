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
#include <limits>

#include "seqrec/synthetic.h"
#include "seqrec/training.h"
#include "test_util.h"

namespace seqrec {
namespace {

using testing::corpus_from_text;

double softplus(double x) { return std::log1p(std::exp(x)); }

double loss_of(const std::vector<double>& pos, const std::vector<double>& neg, std::vector<double> weights = {}) {
  Tape<double> tape;
  auto p = tape.constant(Tensor<double>(Shape{pos.size(), 1}, pos));
  auto n = tape.constant(Tensor<double>(Shape{neg.size(), 1}, neg));
  return bce_loss<double>(p, n, weights).value().item();
}

TEST(Loss, SaturatedIsNearZero) { EXPECT_LT(loss_of({40.0}, {-40.0}), 1e-15); }

TEST(Loss, ZeroLogitsGiveTwoLnTwo) {
  EXPECT_NEAR(loss_of({0.0}, {0.0}), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(loss_of({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}), 2.0 * std::log(2.0), 1e-15);
}

TEST(Loss, StableAtEighty) {
  const double l = loss_of({-80.0}, {80.0});
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 160.0, 1e-9);
}

TEST(Loss, WeightedAverageUsesSumOfWeights) {
  const double first = softplus(-1.5) + softplus(0.25);
  EXPECT_NEAR(loss_of({1.5, -3.0}, {0.25, 2.0}, {2.0, 0.0}), first, 1e-14);
  const double second = softplus(3.0) + softplus(2.0);
  EXPECT_NEAR(loss_of({1.5, -3.0}, {0.25, 2.0}, {1.0, 3.0}), (first + 3 * second) / 4, 1e-14);
}

TEST(Loss, RejectsBadInput) {
  EXPECT_THROW(loss_of({std::numeric_limits<double>::quiet_NaN()}, {0.0}), NumericError);
  EXPECT_THROW(loss_of({0.0}, {0.0}, {0.0}), UsageError);
  EXPECT_THROW(loss_of({0.0, 1.0}, {0.0}), ShapeError);
}

TEST(Weights, RescaleToMeanOne) {
  const auto w = rescale_weights({0.2, 0.6});
  EXPECT_NEAR(w[0], 0.5, 1e-15);
  EXPECT_NEAR(w[1], 1.5, 1e-15);
  EXPECT_EQ(rescale_weights({1.0, 1.0, 1.0}), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Adam, ZeroGradientLeavesParams) {
  Tensor<double> w = Tensor<double>::row({0.5, -1.0});
  const Tensor<double> before = w;
  std::vector<Tensor<double>*> params{&w};
  std::vector<Tensor<double>> grads{Tensor<double>(Shape{2})};
  AdamState<double> state;
  for (int i = 0; i < 5; ++i) ASSERT_TRUE(adam_step<double>(params, grads, state, TrainConfig{}));
  EXPECT_EQ(w, before);
}

TEST(Adam, ConstantGradientStepsByLearningRate) {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  Tensor<double> w = Tensor<double>::row({1.0});
  std::vector<Tensor<double>*> params{&w};
  std::vector<Tensor<double>> grads{Tensor<double>::row({0.3})};
  AdamState<double> state;
  double previous = w[0];
  for (int i = 0; i < 50; ++i) {
    adam_step<double>(params, grads, state, cfg);
    EXPECT_NEAR(previous - w[0], cfg.learning_rate, 1e-8);
    previous = w[0];
  }
}

TEST(Adam, MatchesScalarSimulation) {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  const std::vector<double> g{0.4, -1.2, 0.05, 2.0, -0.3, 0.9};
  Tensor<double> w = Tensor<double>::row({0.7});
  std::vector<Tensor<double>*> params{&w};
  AdamState<double> state;
  double x = 0.7, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= g.size(); ++t) {
    std::vector<Tensor<double>> grads{Tensor<double>::row({g[t - 1]})};
    adam_step<double>(params, grads, state, cfg);
    m = 0.9 * m + 0.1 * g[t - 1];
    v = 0.999 * v + 0.001 * g[t - 1] * g[t - 1];
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    EXPECT_NEAR(w[0], x, 1e-14) << t;
  }
}

TEST(Adam, NonFiniteGradientAborts) {
  Tensor<double> w = Tensor<double>::row({1.0, 2.0});
  std::vector<Tensor<double>*> params{&w};
  std::vector<Tensor<double>> grads{Tensor<double>::row({0.1, std::numeric_limits<double>::infinity()})};
  AdamState<double> state;
  EXPECT_FALSE(adam_step<double>(params, grads, state, TrainConfig{}));
  EXPECT_EQ(w, Tensor<double>::row({1.0, 2.0}));
  EXPECT_EQ(state.t, 0u);
}

TEST(Config, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.duality_lambda = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(parse_weighting_mode("history_confidence"), WeightingMode::kHistoryConfidence);
  EXPECT_THROW(parse_weighting_mode("loud"), ConfigError);
}

ModelConfig cycle_model_config(std::size_t num_items, PositionMode mode = PositionMode::kRelativeExact) {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.blocks = 1;
  cfg.heads = 1;
  cfg.max_len = 12;
  cfg.keep_prob = 1.0;
  cfg.position_mode = mode;
  cfg.num_items = num_items;
  return cfg;
}

TrainConfig fast_train(std::uint64_t seed = 5) {
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 32;
  cfg.seed = seed;
  return cfg;
}

SequenceCorpus small_cycle() { return build_sequences(cycle_corpus(8, 40, 10)); }

std::size_t expected_examples(const SequenceCorpus& corpus) {
  std::size_t total = 0;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    const std::size_t l = corpus.of(u).train_size();
    if (l > 1) total += l - 1;
  }
  return total;
}

TEST(Epoch, TouchesEveryExampleOnce) {
  const auto corpus = small_cycle();
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  for (auto mode : {PositionMode::kRelativeExact, PositionMode::kAbsoluteTrick}) {
    auto model = SequenceModel<float>::init(cycle_model_config(8, mode), 2);
    TrainState state;
    const auto record = train_epoch(model, corpus, fast_train(), sampler, state);
    EXPECT_EQ(record.predictions, expected_examples(corpus)) << to_string(mode);
    EXPECT_EQ(record.skipped_steps, 0u);
  }
  auto model = SequenceModel<float>::init(cycle_model_config(8), 2);
  TrainState state;
  EXPECT_EQ(train_epoch(model, corpus, fast_train(), sampler, state).examples, expected_examples(corpus));
}

TEST(Epoch, LossDecreasesOverFirstFiveEpochs) {
  const auto corpus = small_cycle();
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  auto model = SequenceModel<float>::init(cycle_model_config(8), 3);
  TrainState state;
  double previous = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 5; ++e) {
    const double loss = train_epoch(model, corpus, fast_train(), sampler, state).mean_loss;
    EXPECT_LT(loss, previous) << "epoch " << e + 1;
    previous = loss;
  }
}

TEST(Epoch, SameSeedSameParams) {
  // Longer cycle so every user still has items left to exclude.
  const auto corpus = build_sequences(cycle_corpus(20, 40, 10));
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformExcluding, 1.0, 1});
  auto run = [&] {
    ModelConfig cfg = cycle_model_config(20);
    cfg.keep_prob = 0.8;
    auto model = SequenceModel<float>::init(cfg, 4);
    TrainConfig train = fast_train(9);
    train.epochs = 2;
    fit(model, corpus, train, sampler);
    return model;
  };
  EXPECT_TRUE(run().params() == run().params());
}

TEST(Epoch, PaddingRowStaysZero) {
  const auto corpus = small_cycle();
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  auto model = SequenceModel<float>::init(cycle_model_config(8, PositionMode::kAbsoluteTrick), 6);
  TrainState state;
  for (int e = 0; e < 3; ++e) train_epoch(model, corpus, fast_train(), sampler, state);
  for (float v : model.item_table().row_span(kPaddingItem)) EXPECT_EQ(v, 0.0f);
}

TEST(Weighting, OnesMatchUnweightedExactly) {
  const auto corpus = small_cycle();
  const auto model = SequenceModel<double>::init(cycle_model_config(8), 7);
  BucketBatch bucket;
  for (const auto& ex : make_prefix_examples(corpus, PositionMode::kRelativeExact)) {
    if (ex.prefix.size() == 4) bucket.examples.push_back(ex);
  }
  LossBatch batch = make_loss_batch(bucket, model.config());
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  Rng rng(8);
  draw_negatives(batch, sampler, rng);
  auto loss = [&](const LossBatch& b) {
    Tape<double> tape;
    const auto bound = model.params().bind(tape);
    return prediction_loss<double>(bound, model, b, EncodeOptions{}).value().item();
  };
  const double off = loss(batch);
  batch.weights.assign(batch.predictions(), 1.0);
  EXPECT_EQ(loss(batch), off);
}

TEST(Weighting, ConfidenceIsMeanReciprocalRank) {
  const auto corpus = small_cycle();
  const auto model = SequenceModel<float>::init(cycle_model_config(8), 9);
  const auto table = ConfidenceTable::compute(model, corpus, 10);
  for (UserId u : {1u, 17u}) {
    EXPECT_EQ(table.weight(u, 1), 1.0);
    double sum = 0.0;
    for (std::size_t k = 2; k <= corpus.of(u).train_size(); ++k) {
      const double rr = table.reciprocal_rank(u, k - 1);
      EXPECT_GT(rr, 0.0);
      EXPECT_LE(rr, 1.0);
      sum += rr;
      EXPECT_NEAR(table.weight(u, k), sum / static_cast<double>(k - 1), 1e-15);
    }
  }
  EXPECT_THROW(table.weight(1, 0), UsageError);
  // Frozen params and a fixed seed give a fixed table.
  const auto again = ConfidenceTable::compute(model, corpus, 10);
  EXPECT_EQ(again.weight(3, 5), table.weight(3, 5));
}

TEST(Weighting, PerfectModelGivesUnitWeights) {
  const auto corpus = small_cycle();
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  auto model = SequenceModel<float>::init(cycle_model_config(8), 11);
  TrainConfig cfg = fast_train(12);
  cfg.epochs = 40;
  fit(model, corpus, cfg, sampler);
  const auto table = ConfidenceTable::compute(model, corpus, 13);
  std::vector<double> raw;
  for (UserId u = 1; u <= 40; ++u) {
    for (std::size_t k = 1; k <= corpus.of(u).train_size(); ++k) raw.push_back(table.weight(u, k));
  }
  for (double w : rescale_weights(raw)) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(Weighting, HistoryConfidenceEpochRuns) {
  const auto corpus = small_cycle();
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  auto model = SequenceModel<float>::init(cycle_model_config(8), 14);
  TrainConfig cfg = fast_train();
  cfg.weighting = WeightingMode::kHistoryConfidence;
  TrainState state;
  const auto record = train_epoch(model, corpus, cfg, sampler, state);
  EXPECT_TRUE(std::isfinite(record.mean_loss));
  EXPECT_TRUE(model.params().all_finite());
}

TEST(Fit, KeepsBestValidationSnapshot) {
  const auto corpus = small_cycle();
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  auto model = SequenceModel<float>::init(cycle_model_config(8), 15);
  TrainConfig cfg = fast_train(16);
  cfg.epochs = 4;
  FitOptions options;
  options.validation = EvalProtocol{std::nullopt, {1, 5}, EvalSplit::kValidation};
  std::size_t calls = 0;
  options.after_epoch = [&](const EpochRecord&, SequenceModel<float>&) { ++calls; };
  const auto result = fit(model, corpus, cfg, sampler, options);
  EXPECT_EQ(calls, 4u);
  ASSERT_EQ(result.report.epochs.size(), 4u);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& r : result.report.epochs) {
    ASSERT_TRUE(r.validation.has_value());
    EXPECT_NE(r.to_line().find("val.ndcg@5="), std::string::npos);
    if (r.validation->ndcg_at(5) > best) {
      best = r.validation->ndcg_at(5);
      best_epoch = r.epoch;
    }
  }
  EXPECT_EQ(result.report.best_epoch, best_epoch);
}

}  // namespace
}  // namespace seqrec
