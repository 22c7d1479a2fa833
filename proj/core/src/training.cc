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

#include "seqrec/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "seqrec/error.h"

namespace seqrec {

std::string_view to_string(WeightingMode mode) {
  return mode == WeightingMode::kOff ? "off" : "history_confidence";
}

WeightingMode parse_weighting_mode(std::string_view text) {
  if (text == "off") return WeightingMode::kOff;
  if (text == "history_confidence") return WeightingMode::kHistoryConfidence;
  throw ConfigError("unknown weighting mode `" + std::string(text) + "`");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(duality_lambda >= 0.0) || !std::isfinite(duality_lambda)) {
    throw ConfigError("train.duality_lambda must be >= 0");
  }
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues kv;
  kv.set("train.learning_rate", format_double(learning_rate));
  kv.set("train.beta1", format_double(beta1));
  kv.set("train.beta2", format_double(beta2));
  kv.set("train.epsilon", format_double(epsilon));
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.weighting", std::string(to_string(weighting)));
  kv.set("train.duality_lambda", format_double(duality_lambda));
  return kv;
}

template <typename T>
Var<T> bce_loss(const Var<T>& pos_logits, const Var<T>& neg_logits, std::span<const double> weights) {
  const std::size_t p = pos_logits.value().numel();
  if (p == 0 || neg_logits.value().numel() != p) {
    throw ShapeError("bce_loss: need equal, non-zero positive and negative counts");
  }
  if (!pos_logits.value().all_finite() || !neg_logits.value().all_finite()) {
    throw NumericError("bce_loss: non-finite logits");
  }
  if (!weights.empty() && weights.size() != p) throw ShapeError("bce_loss: one weight per prediction");

  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(p, 1.0);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw UsageError("bce_loss: weights must have a positive sum");

  Tape<T>& tape = *pos_logits.tape();
  const Var<T> parts[] = {pos_logits, neg_logits};
  const Var<T> logits = concat_rows<T>(parts);
  std::vector<double> labels(2 * p, 0.0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(p), 1.0);
  const Var<T> per_entry = logistic_bce(logits, std::move(labels));

  Tensor<T> column(Shape{2 * p, 1});
  for (std::size_t i = 0; i < p; ++i) {
    column[i] = static_cast<T>(w[i]);
    column[p + i] = static_cast<T>(w[i]);
  }
  const Var<T> weighted = multiply(per_entry, tape.constant(std::move(column)));
  // mean over 2P entries times 2P / sum(w) is the sum-of-weights average.
  return scale(reduce_mean(weighted), static_cast<double>(2 * p) / total);
}

std::vector<double> rescale_weights(std::vector<double> weights) {
  if (weights.empty()) return weights;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw UsageError("rescale_weights: weights must have a positive sum");
  const double factor = static_cast<double>(weights.size()) / total;
  for (double& w : weights) w *= factor;
  return weights;
}

template <typename T>
Var<T> pair_logits(const Var<T>& hidden_rows, const Var<T>& table, std::span<const std::uint32_t> ids) {
  if (ids.size() != hidden_rows.value().rows()) throw ShapeError("pair_logits: one id per hidden row");
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  const Var<T> picked = embedding_gather(table, std::move(rows));
  const Var<T> ones = hidden_rows.tape()->constant(Tensor<T>(Shape{hidden_rows.value().cols(), 1}, T{1}));
  return matmul(multiply(hidden_rows, picked), ones);
}

LossBatch make_loss_batch(const BucketBatch& batch, const ModelConfig& config) {
  LossBatch out;
  const std::size_t window = config.max_len;
  for (const PrefixExample& ex : batch.examples) {
    if (ex.prefix.empty()) throw UsageError("make_loss_batch: empty prefix");
    if (config.position_mode == PositionMode::kRelativeExact) {
      const std::size_t keep = std::min(window, ex.prefix.size());
      out.inputs.emplace_back(ex.prefix.end() - static_cast<std::ptrdiff_t>(keep), ex.prefix.end());
      out.rows.push_back({keep - 1});
      out.users.push_back(ex.user);
      out.prefix_of.push_back(ex.prefix.size());
      out.positives.push_back(ex.target);
      continue;
    }
    // Absolute trick: inputs x_1..x_{l-1}, targets x_2..x_l, one window.
    std::vector<ItemId> targets(ex.prefix.begin() + 1, ex.prefix.end());
    targets.push_back(ex.target);
    const std::vector<ItemId> input = pad_truncate(ex.prefix, window);
    const std::size_t real = std::min(window, ex.prefix.size());
    const std::size_t first_slot = window - real;
    const std::size_t dropped = ex.prefix.size() - real;
    std::vector<std::size_t> rows;
    for (std::size_t slot = first_slot; slot < window; ++slot) {
      const std::size_t index = dropped + (slot - first_slot);  // 0-based in the prefix
      rows.push_back(slot);
      out.prefix_of.push_back(index + 1);
      out.positives.push_back(targets[index]);
    }
    out.inputs.push_back(input);
    out.rows.push_back(std::move(rows));
    out.users.push_back(ex.user);
  }
  return out;
}

void draw_negatives(LossBatch& batch, const NegativeSampler& sampler, Rng& rng) {
  batch.negatives.clear();
  std::size_t p = 0;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    for (std::size_t r = 0; r < batch.rows[s].size(); ++r, ++p) {
      batch.negatives.push_back(sampler.sample_negatives(batch.users[s], 1, rng).front());
    }
  }
}

template <typename T>
Var<T> prediction_loss(std::span<const Var<T>> bound, const SequenceModel<T>& model,
                       const LossBatch& batch, const EncodeOptions& options) {
  if (batch.inputs.empty()) throw UsageError("prediction_loss: empty batch");
  if (batch.negatives.size() != batch.positives.size()) {
    throw UsageError("prediction_loss: negatives not drawn");
  }
  std::vector<Var<T>> picked;
  picked.reserve(batch.inputs.size());
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    EncodeOptions per_input = options;
    per_input.seed = derive_seed(options.seed, {s});
    const Var<T> hidden = encode_sequence<T>(bound, model, batch.inputs[s], per_input);
    picked.push_back(embedding_gather(hidden, batch.rows[s]));
  }
  const Var<T> rows = picked.size() == 1 ? picked.front() : concat_rows<T>(picked);
  const Var<T>& table = bound[model.item_table_slot()];
  const Var<T> pos = pair_logits(rows, table, std::span<const std::uint32_t>(batch.positives));
  const Var<T> neg = pair_logits(rows, table, std::span<const std::uint32_t>(batch.negatives));
  return bce_loss(pos, neg, std::span<const double>(batch.weights));
}

// ---------------------------------------------------------------------------

ConfidenceTable ConfidenceTable::compute(const SequenceModel<float>& model, const SequenceCorpus& corpus,
                                         std::uint64_t seed) {
  ConfidenceTable table;
  table.rr_.resize(corpus.sequences.size());
  table.prefix_mean_.resize(corpus.sequences.size());
  const NegativeSampler uniform(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, seed});
  const std::size_t negatives = std::min<std::size_t>(100, corpus.num_items - 1);
  const std::size_t window = model.config().max_len;

  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    const std::vector<ItemId> train = corpus.of(u).train_symbols();
    auto& rr = table.rr_[u];
    for (std::size_t j = 1; j < train.size(); ++j) {
      const std::size_t keep = std::min(window, j);
      const std::span<const ItemId> prefix(train.data() + (j - keep), keep);
      const std::vector<float> hidden = final_hidden(model, prefix);
      Rng rng(derive_seed(seed, {stream::kConfidence, u, j}));
      const EvalCandidates cands = uniform.build_eval_candidates(u, train[j], negatives, rng);
      const std::vector<float> scores = score_items<float>(model, hidden, cands.items);
      const std::size_t rank = truth_rank<float>(scores, cands.items, cands.truth_index);
      rr.push_back(1.0 / static_cast<double>(rank));
    }
    auto& mean = table.prefix_mean_[u];
    double running = 0.0;
    mean.push_back(1.0);  // k = 1 has no history to judge
    for (std::size_t k = 2; k <= train.size(); ++k) {
      running += rr[k - 2];
      mean.push_back(running / static_cast<double>(k - 1));
    }
  }
  return table;
}

double ConfidenceTable::weight(UserId user, std::size_t prefix_length) const {
  const auto& mean = prefix_mean_.at(user);
  if (prefix_length == 0 || prefix_length > mean.size()) {
    throw UsageError("confidence weight requested for an unknown prefix length");
  }
  return mean[prefix_length - 1];
}

double ConfidenceTable::reciprocal_rank(UserId user, std::size_t step) const {
  const auto& rr = rr_.at(user);
  if (step == 0 || step > rr.size()) throw UsageError("confidence step out of range");
  return rr[step - 1];
}

// ---------------------------------------------------------------------------

template <typename T>
bool adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: params/grads count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) throw ShapeError("adam_step: gradient shape mismatch");
    if (!grads[i].all_finite()) return false;
  }
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match params");

  ++state.t;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    const Tensor<T>& g = grads[i];
    for (std::size_t e = 0; e < p.numel(); ++e) {
      const double gi = g[e];
      const double mi = b1 * m[e] + (1.0 - b1) * gi;
      const double vi = b2 * v[e] + (1.0 - b2) * gi * gi;
      m[e] = static_cast<T>(mi);
      v[e] = static_cast<T>(vi);
      const double step = config.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + config.epsilon);
      p[e] = static_cast<T>(p[e] - step);
    }
  }
  return true;
}

template <typename T>
bool adam_step(SequenceModel<T>& model, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& config) {
  const std::vector<Tensor<T>*> params = model.params().pointers();
  const bool applied = adam_step<T>(params, grads, state, config);
  model.enforce_padding_row();
  return applied;
}

// ---------------------------------------------------------------------------

std::string EpochRecord::to_line() const {
  std::string line = "epoch=" + std::to_string(epoch) + " loss=" + format_double(mean_loss) +
                     " examples=" + std::to_string(examples) + " predictions=" +
                     std::to_string(predictions) + " skipped_steps=" + std::to_string(skipped_steps);
  if (validation) {
    for (std::size_t i = 0; i < validation->protocol.ks.size(); ++i) {
      const std::string k = std::to_string(validation->protocol.ks[i]);
      line += " val.hr@" + k + "=" + format_double(validation->hr[i]);
      line += " val.ndcg@" + k + "=" + format_double(validation->ndcg[i]);
    }
  }
  return line;
}

EpochRecord train_epoch(SequenceModel<float>& model, const SequenceCorpus& corpus,
                        const TrainConfig& config, const NegativeSampler& sampler, TrainState& state) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t epoch = ++state.epochs_done;
  const ModelConfig& mc = model.config();

  std::optional<ConfidenceTable> confidence;
  if (config.weighting == WeightingMode::kHistoryConfidence) {
    confidence = ConfidenceTable::compute(model, corpus, derive_seed(config.seed, {stream::kConfidence}));
  }

  std::vector<PrefixExample> examples = make_prefix_examples(corpus, mc.position_mode);
  if (examples.empty()) throw UsageError("train_epoch: corpus has no training examples");
  EpochRecord record;
  record.epoch = epoch;
  record.examples = examples.size();
  const auto batches =
      bucket_batches(std::move(examples), config.batch_size, derive_seed(config.seed, {stream::kBatching, epoch}));

  Rng negative_rng(derive_seed(config.seed, {stream::kTrainNegatives, epoch}));
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    LossBatch batch = make_loss_batch(batches[b], mc);
    draw_negatives(batch, sampler, negative_rng);
    if (confidence) {
      std::size_t p = 0;
      for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
        for (std::size_t r = 0; r < batch.rows[s].size(); ++r, ++p) {
          batch.weights.push_back(confidence->weight(batch.users[s], batch.prefix_of[p]));
        }
      }
      batch.weights = rescale_weights(std::move(batch.weights));
    }

    Tape<float> tape;
    const auto bound = model.params().bind(tape);
    const EncodeOptions options{true, derive_seed(config.seed, {stream::kDropout, epoch, b})};
    const Var<float> loss = prediction_loss<float>(bound, model, batch, options);
    const Gradients<float> grads = tape.backward(loss);
    std::vector<Tensor<float>> flat;
    flat.reserve(bound.size());
    for (const Var<float>& v : bound) flat.push_back(grads.of(v));
    if (!adam_step<float>(model, flat, state.adam, config)) ++record.skipped_steps;

    loss_sum += static_cast<double>(loss.value().item()) * static_cast<double>(batch.predictions());
    record.predictions += batch.predictions();
  }
  record.mean_loss = loss_sum / static_cast<double>(record.predictions);
  record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

FitResult fit(SequenceModel<float>& model, const SequenceCorpus& corpus, const TrainConfig& config,
              const NegativeSampler& sampler, const FitOptions& options) {
  config.validate();
  TrainState state;
  FitResult result{TrainReport{}, model};
  double best_score = -1.0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochRecord record = train_epoch(model, corpus, config, sampler, state);
    if (options.after_epoch) options.after_epoch(record, model);
    if (options.validation) {
      EvalProtocol protocol = *options.validation;
      protocol.split = EvalSplit::kValidation;
      record.validation = evaluate(model, corpus, protocol, sampler,
                                   derive_seed(config.seed, {stream::kEvalCandidates, record.epoch}));
      const double score = record.validation->ndcg.back();
      if (score > best_score) {
        best_score = score;
        result.best = model;
        result.report.best_epoch = record.epoch;
      }
    } else {
      result.best = model;
      result.report.best_epoch = record.epoch;
    }
    result.report.epochs.push_back(std::move(record));
  }
  return result;
}

#define SEQREC_INSTANTIATE(T)                                                                     \
  template Var<T> bce_loss(const Var<T>&, const Var<T>&, std::span<const double>);               \
  template Var<T> pair_logits(const Var<T>&, const Var<T>&, std::span<const std::uint32_t>);     \
  template Var<T> prediction_loss(std::span<const Var<T>>, const SequenceModel<T>&,              \
                                  const LossBatch&, const EncodeOptions&);                       \
  template bool adam_step(std::span<Tensor<T>* const>, std::span<const Tensor<T>>, AdamState<T>&, \
                          const TrainConfig&);                                                   \
  template bool adam_step(SequenceModel<T>&, std::span<const Tensor<T>>, AdamState<T>&,          \
                          const TrainConfig&);

SEQREC_INSTANTIATE(float)
SEQREC_INSTANTIATE(double)

#undef SEQREC_INSTANTIATE

}  // namespace seqrec
