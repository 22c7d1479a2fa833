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

#include "seqrec/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>

#include "seqrec/error.h"
#include "seqrec/parallel.h"

namespace seqrec {

std::string_view to_string(EvalSplit split) {
  return split == EvalSplit::kValidation ? "validation" : "test";
}

EvalSplit parse_eval_split(std::string_view text) {
  if (text == "validation") return EvalSplit::kValidation;
  if (text == "test") return EvalSplit::kTest;
  throw ConfigError("unknown evaluation split `" + std::string(text) + "`");
}

void EvalProtocol::validate(std::size_t num_items) const {
  if (ks.empty()) throw ConfigError("eval.ks must not be empty");
  if (!std::is_sorted(ks.begin(), ks.end()) ||
      std::adjacent_find(ks.begin(), ks.end()) != ks.end()) {
    throw ConfigError("eval.ks must be strictly ascending");
  }
  if (ks.front() == 0) throw ConfigError("eval.ks must be positive");
  const std::size_t candidates = sampled ? *sampled + 1 : num_items;
  if (ks.back() > candidates) {
    throw ConfigError("largest K (" + std::to_string(ks.back()) + ") exceeds candidate count " +
                      std::to_string(candidates));
  }
}

std::string EvalProtocol::candidates_text() const {
  return sampled ? std::to_string(*sampled) : std::string("full");
}

std::size_t worker_count() {
  if (const char* env = std::getenv("SEQREC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

template <typename T>
std::size_t truth_rank(std::span<const T> scores, std::span<const ItemId> ids, std::size_t truth_index) {
  if (truth_index >= scores.size()) throw UsageError("truth index out of range");
  if (!ids.empty() && ids.size() != scores.size()) throw UsageError("ids/scores length mismatch");
  auto id_of = [&](std::size_t i) -> std::size_t { return ids.empty() ? i : ids[i]; };
  const T truth = scores[truth_index];
  const std::size_t truth_id = id_of(truth_index);
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == truth_index) continue;
    if (scores[i] > truth || (scores[i] == truth && id_of(i) < truth_id)) ++rank;
  }
  return rank;
}

template <typename T>
RankMetrics rank_metrics(std::span<const T> scores, std::span<const ItemId> ids,
                         std::size_t truth_index, std::span<const std::size_t> ks) {
  RankMetrics m;
  m.rank = truth_rank(scores, ids, truth_index);
  for (std::size_t k : ks) {
    const bool hit = m.rank <= k;
    m.hr.push_back(hit ? 1.0 : 0.0);
    m.ndcg.push_back(hit ? 1.0 / std::log2(static_cast<double>(m.rank) + 1.0) : 0.0);
  }
  return m;
}

template std::size_t truth_rank(std::span<const float>, std::span<const ItemId>, std::size_t);
template std::size_t truth_rank(std::span<const double>, std::span<const ItemId>, std::size_t);
template RankMetrics rank_metrics(std::span<const float>, std::span<const ItemId>, std::size_t,
                                  std::span<const std::size_t>);
template RankMetrics rank_metrics(std::span<const double>, std::span<const ItemId>, std::size_t,
                                  std::span<const std::size_t>);

double EvalReport::hr_at(std::size_t k) const {
  for (std::size_t i = 0; i < protocol.ks.size(); ++i) {
    if (protocol.ks[i] == k) return hr[i];
  }
  throw UsageError("K=" + std::to_string(k) + " not in the protocol");
}

double EvalReport::ndcg_at(std::size_t k) const {
  for (std::size_t i = 0; i < protocol.ks.size(); ++i) {
    if (protocol.ks[i] == k) return ndcg[i];
  }
  throw UsageError("K=" + std::to_string(k) + " not in the protocol");
}

KeyValues EvalReport::to_key_values(std::string_view prefix) const {
  const std::string p(prefix);
  KeyValues kv;
  kv.set(p + ".split", std::string(to_string(protocol.split)));
  kv.set(p + ".candidates", protocol.candidates_text());
  kv.set(p + ".users", std::to_string(users));
  for (std::size_t i = 0; i < protocol.ks.size(); ++i) {
    kv.set(p + ".hr@" + std::to_string(protocol.ks[i]), format_double(hr[i]));
    kv.set(p + ".ndcg@" + std::to_string(protocol.ks[i]), format_double(ndcg[i]));
  }
  return kv;
}

std::vector<ItemId> evaluation_input(const SequenceCorpus& corpus, UserId user, EvalSplit split,
                                     const ModelConfig& config) {
  const SplitSequence& seq = corpus.of(user);
  std::vector<ItemId> items = seq.train_symbols();
  if (split == EvalSplit::kTest) items.push_back(seq.validation_symbol());
  if (config.position_mode == PositionMode::kAbsoluteTrick) return pad_truncate(items, config.max_len);
  if (items.size() > config.max_len) {
    items.erase(items.begin(), items.end() - static_cast<std::ptrdiff_t>(config.max_len));
  }
  return items;
}

EvalReport evaluate(const SequenceModel<float>& model, const SequenceCorpus& corpus,
                    const EvalProtocol& protocol, const NegativeSampler& sampler, std::uint64_t seed) {
  protocol.validate(corpus.num_items);
  std::vector<UserId> users;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    if (corpus.of(u).evaluable()) users.push_back(u);
  }
  if (users.empty()) throw UsageError("evaluate: no users with validation/test items");

  std::vector<RankMetrics> per_user(users.size());
  parallel_for(users.size(), [&](std::size_t i) {
    const UserId u = users[i];
    const SplitSequence& seq = corpus.of(u);
    const ItemId truth = protocol.split == EvalSplit::kTest ? seq.test_symbol() : seq.validation_symbol();
    const std::vector<ItemId> input = evaluation_input(corpus, u, protocol.split, model.config());
    const std::vector<float> hidden = final_hidden(model, input);
    Rng rng(derive_seed(seed, {stream::kEvalCandidates, static_cast<std::uint64_t>(protocol.split), u}));
    const EvalCandidates cands = sampler.build_eval_candidates(u, truth, protocol.sampled, rng);
    const std::vector<float> scores = score_items<float>(model, hidden, cands.items);
    per_user[i] = rank_metrics<float>(scores, cands.items, cands.truth_index, protocol.ks);
  });

  EvalReport report;
  report.protocol = protocol;
  report.seed = seed;
  report.users = users.size();
  report.hr.assign(protocol.ks.size(), 0.0);
  report.ndcg.assign(protocol.ks.size(), 0.0);
  for (const RankMetrics& m : per_user) {
    for (std::size_t k = 0; k < protocol.ks.size(); ++k) {
      report.hr[k] += m.hr[k];
      report.ndcg[k] += m.ndcg[k];
    }
  }
  for (std::size_t k = 0; k < protocol.ks.size(); ++k) {
    report.hr[k] /= static_cast<double>(users.size());
    report.ndcg[k] /= static_cast<double>(users.size());
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string DecodeSpec::to_string() const {
  if (kind == Kind::kGreedy) return "greedy";
  return "top_k(k=" + std::to_string(top_k) + ",temperature=" + format_double(temperature) +
         ",seed=" + std::to_string(seed) + ")";
}

namespace {

// Candidate order by (score desc, id asc); ids are index + 1.
std::vector<ItemId> ranked_items(std::span<const float> scores) {
  std::vector<ItemId> order(scores.size());
  std::iota(order.begin(), order.end(), ItemId{1});
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return scores[a - 1] > scores[b - 1]; });
  return order;
}

}  // namespace

std::vector<ItemId> autoregressive_rollout(const SequenceModel<float>& model,
                                           std::span<const ItemId> prefix, std::size_t horizon,
                                           const DecodeSpec& decode) {
  if (horizon == 0) throw UsageError("rollout horizon must be at least 1");
  if (prefix.empty()) throw UsageError("rollout prefix must not be empty");
  if (prefix.size() + horizon - 1 > model.config().max_len) {
    throw UsageError("rollout of " + std::to_string(horizon) + " steps from a prefix of " +
                     std::to_string(prefix.size()) + " exceeds the positional table (" +
                     std::to_string(model.config().max_len) + ")");
  }
  if (decode.kind == DecodeSpec::Kind::kTopK && (decode.top_k == 0 || !(decode.temperature > 0.0))) {
    throw UsageError("top_k decoding needs k >= 1 and a positive temperature");
  }

  Rng rng(derive_seed(decode.seed, {stream::kRollout}));
  std::vector<ItemId> sequence(prefix.begin(), prefix.end());
  std::vector<ItemId> generated;
  for (std::size_t step = 0; step < horizon; ++step) {
    const std::vector<float> hidden = final_hidden(model, sequence);
    const std::vector<float> scores = score_all<float>(model, hidden);
    ItemId next = kPaddingItem;
    if (decode.kind == DecodeSpec::Kind::kGreedy) {
      next = ranked_items(scores).front();
    } else {
      const std::vector<ItemId> order = ranked_items(scores);
      const std::size_t k = std::min(decode.top_k, order.size());
      std::vector<double> weights(k);
      const double top = scores[order.front() - 1];
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        weights[i] = std::exp((scores[order[i] - 1] - top) / decode.temperature);
        total += weights[i];
      }
      double u = uniform_unit(rng) * total;
      next = order[k - 1];
      for (std::size_t i = 0; i < k; ++i) {
        if (u < weights[i]) {
          next = order[i];
          break;
        }
        u -= weights[i];
      }
    }
    generated.push_back(next);
    sequence.push_back(next);
  }
  return generated;
}

RolloutMetrics rollout_metrics(std::span<const ItemId> generated, std::span<const ItemId> hidden_suffix) {
  if (generated.size() != hidden_suffix.size()) {
    throw UsageError("rollout_metrics: generated and hidden suffix differ in length");
  }
  RolloutMetrics m;
  const std::size_t h = generated.size();
  bool exact = true;
  for (std::size_t t = 0; t < h; ++t) {
    const bool hit = generated[t] == hidden_suffix[t];
    m.per_step.push_back(hit ? 1.0 : 0.0);
    exact = exact && hit;
    if (exact) m.exact_prefix = t + 1;
  }
  // Multiset intersection: a repeated suffix item can be matched once per occurrence.
  std::vector<ItemId> a(generated.begin(), generated.end());
  std::vector<ItemId> b(hidden_suffix.begin(), hidden_suffix.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<ItemId> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  m.set_recall = h == 0 ? 0.0 : static_cast<double>(common.size()) / static_cast<double>(h);
  return m;
}

KeyValues RolloutReport::to_key_values() const {
  KeyValues kv;
  kv.set("rollout.horizon", std::to_string(horizon));
  kv.set("rollout.decode", decode.to_string());
  kv.set("rollout.users", std::to_string(users));
  kv.set("rollout.set_recall", format_double(set_recall));
  for (std::size_t t = 0; t < per_step_recall.size(); ++t) {
    kv.set("rollout.step_recall." + std::to_string(t + 1), format_double(per_step_recall[t]));
  }
  for (std::size_t len = 0; len < exact_prefix_histogram.size(); ++len) {
    kv.set("rollout.exact_prefix." + std::to_string(len), std::to_string(exact_prefix_histogram[len]));
  }
  return kv;
}

RolloutReport evaluate_rollout(const SequenceModel<float>& model, const SequenceCorpus& corpus,
                               std::size_t horizon, const DecodeSpec& decode) {
  if (horizon == 0 || horizon >= model.config().max_len) {
    throw UsageError("rollout horizon must be in [1, max_len)");
  }
  std::vector<UserId> users;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    if (corpus.of(u).size() > horizon) users.push_back(u);
  }
  if (users.empty()) throw UsageError("no user has more than `horizon` interactions");

  std::vector<RolloutMetrics> per_user(users.size());
  parallel_for(users.size(), [&](std::size_t i) {
    const UserId u = users[i];
    const std::vector<ItemId> items = corpus.of(u).symbols();
    const auto split = items.end() - static_cast<std::ptrdiff_t>(horizon);
    const std::size_t room = model.config().max_len - horizon + 1;
    auto begin = items.begin();
    if (static_cast<std::size_t>(split - begin) > room) begin = split - static_cast<std::ptrdiff_t>(room);
    DecodeSpec per_user_decode = decode;
    per_user_decode.seed = derive_seed(decode.seed, {u});
    const auto generated = autoregressive_rollout(model, std::vector<ItemId>(begin, split), horizon,
                                                  per_user_decode);
    per_user[i] = rollout_metrics(generated, std::vector<ItemId>(split, items.end()));
  });

  RolloutReport report;
  report.horizon = horizon;
  report.users = users.size();
  report.decode = decode;
  report.per_step_recall.assign(horizon, 0.0);
  report.exact_prefix_histogram.assign(horizon + 1, 0);
  for (const RolloutMetrics& m : per_user) {
    for (std::size_t t = 0; t < horizon; ++t) report.per_step_recall[t] += m.per_step[t];
    report.set_recall += m.set_recall;
    ++report.exact_prefix_histogram[m.exact_prefix];
  }
  for (double& r : report.per_step_recall) r /= static_cast<double>(users.size());
  report.set_recall /= static_cast<double>(users.size());
  return report;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ProvenanceRule rule) {
  return rule == ProvenanceRule::kFirstUser ? "first_user" : "popularity";
}

ProvenanceRule parse_provenance_rule(std::string_view text) {
  if (text == "first_user") return ProvenanceRule::kFirstUser;
  if (text == "popularity") return ProvenanceRule::kPopularity;
  throw ConfigError("unknown provenance rule `" + std::string(text) + "`");
}

std::vector<std::uint64_t> provenance_counts(const SequenceCorpus& corpus, ProvenanceRule rule) {
  const std::vector<std::uint64_t> popularity = corpus.train_item_counts();
  if (rule == ProvenanceRule::kPopularity) return popularity;

  // Earliest training interaction per item, by (timestamp, input order).
  struct First {
    std::int64_t timestamp = 0;
    std::size_t order = 0;
    UserId user = 0;
  };
  std::vector<First> first(corpus.num_items + 1);
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    for (const Event& e : corpus.of(u).train_events()) {
      First& f = first[e.symbol];
      if (f.user == 0 || std::tie(e.timestamp, e.order) < std::tie(f.timestamp, f.order)) {
        f = First{e.timestamp, e.order, u};
      }
    }
  }
  std::vector<std::uint64_t> out(corpus.num_items + 1, 0);
  for (std::size_t i = 1; i <= corpus.num_items; ++i) {
    if (first[i].user != 0) out[i] = corpus.of(first[i].user).train_size();
  }
  return out;
}

double gini_coefficient(std::span<const std::uint64_t> values) {
  if (values.empty()) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total == 0.0) return 0.0;
  // G = sum_i (2i - n - 1) x_(i) / (n * sum x), i 1-based over sorted values.
  const double n = static_cast<double>(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += (2.0 * static_cast<double>(i + 1) - n - 1.0) * v[i];
  return acc / (n * total);
}

KeyValues ExposureReport::to_key_values() const {
  KeyValues kv;
  kv.set("exposure.beta", format_double(config.beta));
  kv.set("exposure.provenance", std::string(to_string(config.provenance)));
  kv.set("exposure.split", std::string(to_string(config.split)));
  kv.set("exposure.users", std::to_string(users));
  kv.set("exposure.empty_lists", std::to_string(empty_lists));
  for (std::size_t i = 0; i < config.ks.size(); ++i) {
    kv.set("exposure.hr@" + std::to_string(config.ks[i]), format_double(hr[i]));
    kv.set("exposure.ndcg@" + std::to_string(config.ks[i]), format_double(ndcg[i]));
  }
  kv.set("exposure.gini", format_double(exposure_gini));
  kv.set("exposure.exhausted_fraction", format_double(exhausted_fraction));
  return kv;
}

ExposureReport exposure_capped_recommend(const ScoreFn& scores, const SequenceCorpus& corpus,
                                         const ExposureConfig& config) {
  if (!(config.beta > 0.0)) throw ConfigError("exposure budget factor must be positive");
  if (config.ks.empty() || !std::is_sorted(config.ks.begin(), config.ks.end())) {
    throw ConfigError("exposure Ks must be non-empty and ascending");
  }
  const std::size_t n = corpus.num_items;
  const std::size_t list_len = std::min(config.ks.back(), n);

  ExposureReport report;
  report.config = config;
  const auto provenance = provenance_counts(corpus, config.provenance);
  report.budget.assign(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    report.budget[i] = static_cast<std::uint64_t>(std::ceil(config.beta * static_cast<double>(provenance[i])));
  }
  std::vector<std::uint64_t> remaining = report.budget;
  report.exposure.assign(n + 1, 0);

  std::vector<UserId> users;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    if (corpus.of(u).evaluable()) users.push_back(u);
  }
  if (users.empty()) throw UsageError("exposure_capped_recommend: no evaluable users");
  Rng rng(derive_seed(config.seed, {stream::kServeOrder}));
  seeded_shuffle(users.begin(), users.end(), rng);

  report.users = users.size();
  report.hr.assign(config.ks.size(), 0.0);
  report.ndcg.assign(config.ks.size(), 0.0);
  for (UserId u : users) {
    const SplitSequence& seq = corpus.of(u);
    const ItemId truth = config.split == EvalSplit::kTest ? seq.test_symbol() : seq.validation_symbol();
    const std::vector<float> s = scores(u);
    if (s.size() != n) throw ShapeError("score function returned the wrong number of items");
    std::vector<ItemId> served;
    for (ItemId item : ranked_items(s)) {
      if (served.size() == list_len) break;
      if (remaining[item] == 0) continue;
      served.push_back(item);
    }
    for (ItemId item : served) {
      --remaining[item];
      ++report.exposure[item];
    }
    if (served.empty()) ++report.empty_lists;
    const auto hit = std::find(served.begin(), served.end(), truth);
    if (hit != served.end()) {
      const std::size_t rank = static_cast<std::size_t>(hit - served.begin()) + 1;
      for (std::size_t k = 0; k < config.ks.size(); ++k) {
        if (rank <= config.ks[k]) {
          report.hr[k] += 1.0;
          report.ndcg[k] += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        }
      }
    }
    report.served.emplace_back(u, std::move(served));
  }
  for (std::size_t k = 0; k < config.ks.size(); ++k) {
    report.hr[k] /= static_cast<double>(users.size());
    report.ndcg[k] /= static_cast<double>(users.size());
  }

  report.exposure_gini = gini_coefficient(std::span<const std::uint64_t>(report.exposure).subspan(1));
  std::size_t with_budget = 0, exhausted = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (report.budget[i] == 0) continue;
    ++with_budget;
    if (remaining[i] == 0) ++exhausted;
  }
  report.exhausted_fraction =
      with_budget == 0 ? 0.0 : static_cast<double>(exhausted) / static_cast<double>(with_budget);
  return report;
}

ExposureReport exposure_capped_recommend(const SequenceModel<float>& model,
                                         const SequenceCorpus& corpus, const ExposureConfig& config) {
  const ScoreFn scores = [&](UserId u) {
    const auto input = evaluation_input(corpus, u, config.split, model.config());
    return score_all<float>(model, final_hidden(model, input));
  };
  return exposure_capped_recommend(scores, corpus, config);
}

}  // namespace seqrec
