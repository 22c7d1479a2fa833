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

#include "seqrec/duality.h"

#include <algorithm>
#include <numeric>
#include <string>
#include <tuple>

#include "seqrec/error.h"
#include "seqrec/parallel.h"

namespace seqrec {

namespace {

SequenceCorpus invert_events(const SequenceCorpus& corpus, bool training_only) {
  SequenceCorpus out;
  out.num_users = corpus.num_items;
  out.num_items = corpus.num_users;
  std::vector<std::vector<Event>> per_item(corpus.num_items + 1);
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    const SplitSequence& seq = corpus.of(u);
    const auto events = training_only ? seq.train_events() : seq.events();
    for (const Event& e : events) per_item.at(e.symbol).push_back(Event{u, e.timestamp, e.order});
  }
  out.sequences.reserve(per_item.size());
  for (auto& events : per_item) {
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return std::tie(a.timestamp, a.order) < std::tie(b.timestamp, b.order);
    });
    out.sequences.emplace_back(std::move(events));
  }
  return out;
}

template <typename T>
std::vector<T> last_row(const Var<T>& hidden) {
  const auto row = hidden.value().row_span(hidden.value().rows() - 1);
  return {row.begin(), row.end()};
}

std::vector<UserId> most_recent(std::vector<UserId> users, std::size_t max_len) {
  if (users.size() > max_len) users.erase(users.begin(), users.end() - static_cast<std::ptrdiff_t>(max_len));
  return users;
}

void check_user_vectors(const DualModel<float>& dual, const Tensor<float>& user_vectors) {
  if (user_vectors.shape() != Shape{dual.num_users() + 1, dual.config().d}) {
    throw ShapeError("user vectors must be (num_users + 1) x d, got " + shape_to_string(user_vectors.shape()));
  }
}

}  // namespace

SequenceCorpus invert_corpus(const SequenceCorpus& corpus) { return invert_events(corpus, true); }

SequenceCorpus invert_all(const SequenceCorpus& corpus) { return invert_events(corpus, false); }

SequenceCorpus training_portion(const SequenceCorpus& corpus) {
  SequenceCorpus out;
  out.num_users = corpus.num_users;
  out.num_items = corpus.num_items;
  for (const SplitSequence& s : corpus.sequences) {
    const auto train = s.train_events();
    out.sequences.emplace_back(std::vector<Event>(train.begin(), train.end()));
  }
  return out;
}

Tensor<float> user_embeddings(const SequenceModel<float>& model, const SequenceCorpus& corpus) {
  const std::size_t d = model.config().d;
  Tensor<float> out(Shape{corpus.num_users + 1, d});
  parallel_for(corpus.sequences.size(), [&](std::size_t u) {
    if (u == 0) return;
    std::vector<ItemId> items = corpus.of(static_cast<UserId>(u)).train_symbols();
    if (items.empty()) return;
    items = most_recent(std::move(items), model.config().max_len);
    const std::vector<float> h = final_hidden(model, items);
    std::copy(h.begin(), h.end(), out.row_span(u).begin());
  });
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
DualModel<T> DualModel<T>::init(const ModelConfig& primary, std::size_t num_users, std::uint64_t seed) {
  primary.validate();
  if (num_users == 0) throw ConfigError("dual model needs at least one user");
  Rng rng(derive_seed(seed, {stream::kInit, stream::kDuality}));
  ParamStore<T> store;
  StackSlots stack = add_stack_params(store, "dual.", primary.stack_shape(), rng);
  Tensor<T> users({num_users + 1, primary.d});
  init_uniform(users, rng);
  const std::size_t user_slot = store.add("user_table", std::move(users));
  return DualModel(primary, num_users, std::move(store), std::move(stack), user_slot);
}

template <typename T>
DualModel<T> DualModel<T>::from_checkpoint(const Checkpoint& checkpoint) {
  const auto kind = checkpoint.config.get("kind");
  if (!kind || *kind != "dual") throw FormatError("checkpoint is not a dual model");
  const auto users = checkpoint.config.get("dual.num_users");
  if (!users) throw FormatError("dual checkpoint lacks `dual.num_users`");
  ModelConfig config = ModelConfig::from_key_values(checkpoint.config);
  const std::size_t num_users = parse_uint(*users, "dual.num_users");
  ParamStore<T> store = ParamStore<T>::from_named(checkpoint.tensors);
  StackSlots stack = find_stack_slots(store, "dual.", config.stack_shape());
  const std::size_t user_slot = store.index("user_table");
  if (store.at(user_slot).shape() != Shape{num_users + 1, config.d}) {
    throw FormatError("user_table shape does not match dual.num_users");
  }
  if (store.size() != 1 + config.blocks * (4 * config.heads + 8) + 2 + 1) {
    throw FormatError("dual checkpoint holds unexpected extra tensors");
  }
  return DualModel(std::move(config), num_users, std::move(store), std::move(stack), user_slot);
}

template <typename T>
Checkpoint DualModel<T>::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config.set("kind", "dual");
  for (auto& [k, v] : config_.to_key_values().entries) ckpt.config.set(k, v);
  ckpt.config.set("dual.num_users", std::to_string(num_users_));
  params_.append_to(ckpt.tensors);
  return ckpt;
}

template <typename T>
Var<T> encode_users(std::span<const Var<T>> bound, const DualModel<T>& dual, const Var<T>& user_vectors,
                    std::span<const UserId> users, const EncodeOptions& options) {
  if (users.empty()) throw UsageError("encode_users: empty user sequence");
  const StackShape shape = dual.config().stack_shape();
  const std::vector<std::size_t> positions = relative_positions(users.size());
  if (users.size() > shape.max_len) throw UsageError("encode_users: sequence longer than max_len");
  std::vector<std::size_t> user_rows(users.begin(), users.end());
  std::vector<std::size_t> pos_rows;
  for (std::size_t p : positions) pos_rows.push_back(p - 1);
  const Var<T> embedded = add(embedding_gather(user_vectors, std::move(user_rows)),
                              embedding_gather(bound[dual.stack().pos_table], std::move(pos_rows)));
  const std::vector<std::uint8_t> key_valid(users.size(), 1);
  return run_stack(bound, dual.stack(), shape, embedded, key_valid, options);
}

std::vector<float> high_order_item_embedding(const DualModel<float>& dual, const Tensor<float>& user_vectors,
                                             std::span<const UserId> users) {
  check_user_vectors(dual, user_vectors);
  if (users.empty()) throw UsageError("item has no users to encode");
  const std::vector<UserId> recent =
      most_recent(std::vector<UserId>(users.begin(), users.end()), dual.config().max_len);
  Tape<float> tape;
  const auto bound = dual.params().bind(tape);
  const Var<float> vectors = tape.parameter(user_vectors);
  return last_row(encode_users<float>(bound, dual, vectors, recent, EncodeOptions{}));
}

template <typename T>
Var<T> consistency_loss(const Var<T>& high_order, const Var<T>& item_rows) {
  const Var<T> cos = cosine_rows(high_order, item_rows);
  const Var<T> one = high_order.tape()->constant(Tensor<T>::scalar(T{1}));
  return add(one, scale(reduce_mean(cos), -1.0));
}

std::string DualEpochRecord::to_line() const {
  return "epoch=" + std::to_string(epoch) + " consistency=" + format_double(consistency) +
         " consistency_items=" + std::to_string(consistency_items) +
         " next_user_loss=" + format_double(next_user_loss) +
         " next_user_examples=" + std::to_string(next_user_examples) +
         " skipped_steps=" + std::to_string(skipped_steps);
}

namespace {

// Adam over dual params followed by the primary item table; gradients for
// either part may be absent (zero).
bool dual_step(SequenceModel<float>& primary, DualModel<float>& dual, const std::vector<Var<float>>& bound,
               const Var<float>* item_table, const Gradients<float>& grads, const TrainConfig& config,
               DualTrainState& state) {
  std::vector<Tensor<float>*> params = dual.params().pointers();
  params.push_back(&primary.params().at(primary.item_table_slot()));
  std::vector<Tensor<float>> flat;
  for (const Var<float>& v : bound) flat.push_back(grads.of(v));
  flat.push_back(item_table ? grads.of(*item_table) : Tensor<float>(params.back()->shape()));
  const bool applied = adam_step<float>(params, flat, state.adam, config);
  primary.enforce_padding_row();
  return applied;
}

std::vector<ItemId> items_with_users(const SequenceCorpus& inverted) {
  std::vector<ItemId> items;
  for (ItemId i = 1; i < inverted.sequences.size(); ++i) {
    if (inverted.of(i).size() > 0) items.push_back(i);
  }
  return items;
}

// Training users of an item: the inverted sequence minus its own held-out tail.
std::vector<UserId> training_users(const SequenceCorpus& inverted, ItemId item) {
  return inverted.of(item).train_symbols();
}

}  // namespace

DualEpochRecord duality_phase(SequenceModel<float>& primary, DualModel<float>& dual,
                              const SequenceCorpus& inverted, const Tensor<float>& user_vectors,
                              const TrainConfig& config, const DualOptions& options, DualTrainState& state) {
  config.validate();
  check_user_vectors(dual, user_vectors);
  if (inverted.num_users != primary.config().num_items) {
    throw ShapeError("inverted corpus does not match the primary item count");
  }
  DualEpochRecord record;
  record.epoch = ++state.epochs_done;
  const std::size_t max_len = dual.config().max_len;

  if (options.consistency) {
    std::vector<ItemId> items = items_with_users(inverted);
    Rng rng(derive_seed(config.seed, {stream::kDuality, record.epoch}));
    seeded_shuffle(items.begin(), items.end(), rng);
    items.resize(std::min(items.size(), options.item_subset));
    record.consistency_items = items.size();
    record.consistency = 1.0 - mean_consistency_cosine(primary, dual, inverted, user_vectors);

    for (std::size_t pass = 0; pass < options.passes; ++pass) {
      for (std::size_t start = 0; start < items.size(); start += config.batch_size) {
        const std::size_t end = std::min(items.size(), start + config.batch_size);
        Tape<float> tape;
        const auto bound = dual.params().bind(tape);
        const Var<float> vectors = tape.constant(user_vectors);
        const Var<float> table = tape.parameter(primary.item_table());
        std::vector<Var<float>> finals;
        std::vector<std::size_t> item_rows;
        for (std::size_t i = start; i < end; ++i) {
          const std::vector<UserId> users = most_recent(training_users(inverted, items[i]), max_len);
          const EncodeOptions encode{true, derive_seed(config.seed, {stream::kDropout, stream::kDuality,
                                                                     record.epoch, pass, i})};
          const Var<float> hidden = encode_users<float>(bound, dual, vectors, users, encode);
          finals.push_back(embedding_gather(hidden, {users.size() - 1}));
          item_rows.push_back(items[i]);
        }
        const Var<float> high = finals.size() == 1 ? finals.front() : concat_rows<float>(finals);
        const Var<float> loss =
            scale(consistency_loss(high, embedding_gather(table, std::move(item_rows))), config.duality_lambda);
        const Gradients<float> grads = tape.backward(loss);
        if (!dual_step(primary, dual, bound, &table, grads, config, state)) ++record.skipped_steps;
      }
    }
  }

  if (options.next_user) {
    std::vector<PrefixExample> examples = make_prefix_examples(inverted, PositionMode::kRelativeExact);
    record.next_user_examples = examples.size();
    if (!examples.empty()) {
      const NegativeSampler sampler(inverted, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, config.seed});
      const auto batches = bucket_batches(std::move(examples), config.batch_size,
                                          derive_seed(config.seed, {stream::kBatching, stream::kDuality, record.epoch}));
      Rng negatives(derive_seed(config.seed, {stream::kTrainNegatives, stream::kDuality, record.epoch}));
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        Tape<float> tape;
        const auto bound = dual.params().bind(tape);
        const Var<float> vectors = tape.constant(user_vectors);
        std::vector<Var<float>> finals;
        std::vector<UserId> pos, neg;
        for (std::size_t s = 0; s < batches[b].examples.size(); ++s) {
          const PrefixExample& ex = batches[b].examples[s];
          const std::vector<UserId> users = most_recent(ex.prefix, max_len);
          const EncodeOptions encode{true, derive_seed(config.seed, {stream::kDropout, stream::kDuality,
                                                                     record.epoch, b, s, 1})};
          const Var<float> hidden = encode_users<float>(bound, dual, vectors, users, encode);
          finals.push_back(embedding_gather(hidden, {users.size() - 1}));
          pos.push_back(ex.target);
          neg.push_back(sampler.sample_negatives(ex.user, 1, negatives).front());
        }
        const Var<float> rows = finals.size() == 1 ? finals.front() : concat_rows<float>(finals);
        const Var<float>& users_table = bound[dual.user_table_slot()];
        const Var<float> loss = bce_loss(pair_logits(rows, users_table, std::span<const std::uint32_t>(pos)),
                                         pair_logits(rows, users_table, std::span<const std::uint32_t>(neg)));
        const Gradients<float> grads = tape.backward(loss);
        if (!dual_step(primary, dual, bound, nullptr, grads, config, state)) ++record.skipped_steps;
        loss_sum += static_cast<double>(loss.value().item()) * static_cast<double>(pos.size());
      }
      record.next_user_loss = loss_sum / static_cast<double>(record.next_user_examples);
    }
  }
  return record;
}

double mean_consistency_cosine(const SequenceModel<float>& primary, const DualModel<float>& dual,
                               const SequenceCorpus& inverted, const Tensor<float>& user_vectors) {
  const std::vector<ItemId> items = items_with_users(inverted);
  if (items.empty()) throw UsageError("no item has training users");
  std::vector<double> cosines(items.size());
  parallel_for(items.size(), [&](std::size_t k) {
    const std::vector<float> high =
        high_order_item_embedding(dual, user_vectors, training_users(inverted, items[k]));
    const auto e = primary.item_table().row_span(items[k]);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < high.size(); ++j) {
      dot += static_cast<double>(high[j]) * e[j];
      na += static_cast<double>(high[j]) * high[j];
      nb += static_cast<double>(e[j]) * e[j];
    }
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine of a zero-norm embedding");
    cosines[k] = dot / std::sqrt(na * nb);
  });
  return std::accumulate(cosines.begin(), cosines.end(), 0.0) / static_cast<double>(cosines.size());
}

EvalReport evaluate_next_user(const DualModel<float>& dual, const SequenceCorpus& inverted,
                              const Tensor<float>& user_vectors, const EvalProtocol& protocol, std::uint64_t seed) {
  check_user_vectors(dual, user_vectors);
  protocol.validate(dual.num_users());
  std::vector<ItemId> items;
  for (ItemId i = 1; i < inverted.sequences.size(); ++i) {
    if (inverted.of(i).evaluable()) items.push_back(i);
  }
  if (items.empty()) throw UsageError("no item has at least three users");
  const NegativeSampler sampler(inverted, SamplerSpec{SamplerStrategy::kUniformExcluding, 1.0, seed});
  const Tensor<float>& table = dual.params().at(dual.user_table_slot());

  std::vector<RankMetrics> per_item(items.size());
  parallel_for(items.size(), [&](std::size_t k) {
    const SplitSequence& seq = inverted.of(items[k]);
    std::vector<UserId> input = seq.train_symbols();
    if (protocol.split == EvalSplit::kTest) input.push_back(seq.validation_symbol());
    const UserId truth = protocol.split == EvalSplit::kTest ? seq.test_symbol() : seq.validation_symbol();
    const std::vector<float> hidden = high_order_item_embedding(dual, user_vectors, input);
    Rng rng(derive_seed(seed, {stream::kEvalCandidates, stream::kDuality, items[k]}));
    const EvalCandidates cands = sampler.build_eval_candidates(items[k], truth, protocol.sampled, rng);
    std::vector<float> scores;
    for (UserId c : cands.items) {
      const auto row = table.row_span(c);
      float dot = 0.0f;
      for (std::size_t j = 0; j < hidden.size(); ++j) dot += hidden[j] * row[j];
      scores.push_back(dot);
    }
    per_item[k] = rank_metrics<float>(scores, cands.items, cands.truth_index, protocol.ks);
  });

  EvalReport report;
  report.protocol = protocol;
  report.seed = seed;
  report.users = items.size();
  report.hr.assign(protocol.ks.size(), 0.0);
  report.ndcg.assign(protocol.ks.size(), 0.0);
  for (const RankMetrics& m : per_item) {
    for (std::size_t i = 0; i < protocol.ks.size(); ++i) {
      report.hr[i] += m.hr[i] / static_cast<double>(items.size());
      report.ndcg[i] += m.ndcg[i] / static_cast<double>(items.size());
    }
  }
  return report;
}

std::vector<CoTrainRecord> co_train(SequenceModel<float>& primary, DualModel<float>& dual,
                                    const SequenceCorpus& corpus, const TrainConfig& config,
                                    const NegativeSampler& sampler, const DualOptions& options) {
  const SequenceCorpus inverted = invert_corpus(corpus);
  TrainState primary_state;
  DualTrainState dual_state;
  std::vector<CoTrainRecord> records;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    CoTrainRecord record;
    record.primary = train_epoch(primary, corpus, config, sampler, primary_state);
    const Tensor<float> vectors = user_embeddings(primary, corpus);
    record.dual = duality_phase(primary, dual, inverted, vectors, config, options, dual_state);
    records.push_back(std::move(record));
  }
  return records;
}

template class DualModel<float>;
template class DualModel<double>;
template Var<float> encode_users(std::span<const Var<float>>, const DualModel<float>&, const Var<float>&,
                                 std::span<const UserId>, const EncodeOptions&);
template Var<double> encode_users(std::span<const Var<double>>, const DualModel<double>&, const Var<double>&,
                                  std::span<const UserId>, const EncodeOptions&);
template Var<float> consistency_loss(const Var<float>&, const Var<float>&);
template Var<double> consistency_loss(const Var<double>&, const Var<double>&);

}  // namespace seqrec
