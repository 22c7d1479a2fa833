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

// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "commands.h"
#include "seqrec/duality.h"
#include "seqrec/evaluation.h"
#include "seqrec/model.h"
#include "seqrec/stats.h"
#include "seqrec/synthetic.h"
#include "test_util.h"

namespace seqrec {
namespace {

using testing::TempDir;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Tensor<double> final_states(const SequenceModel<double>& model, std::vector<ItemId> items) {
  const std::vector<std::vector<ItemId>> batch{std::move(items)};
  return encode<double>(model, batch).front();
}

double row_gap(const Tensor<double>& a, std::size_t ra, const Tensor<double>& b, std::size_t rb) {
  double m = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, std::abs(a.at(ra, c) - b.at(rb, c)));
  return m;
}

SequenceModel<double> noisy_model(PaddingMode padding, std::size_t max_len, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.max_len = max_len;
  cfg.keep_prob = 1.0;
  cfg.padding_mode = padding;
  cfg.num_items = 12;
  auto model = SequenceModel<double>::init(cfg, seed);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& t = model.params().at(i);
    const auto noise = testing::random_tensor<double>(t.shape(), seed * 97 + i, -0.5, 0.5);
    for (std::size_t j = 0; j < t.numel(); ++j) t[j] += noise[j];
  }
  model.enforce_padding_row();
  return model;
}

Verdict gradients() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (auto position : {PositionMode::kRelativeExact, PositionMode::kAbsoluteTrick}) {
    for (auto padding : {PaddingMode::kCorrected, PaddingMode::kBuggy}) {
      worst = std::max(worst, testing::model_gradient_error(position, padding));
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-3 && secs < 60.0, fmt("max relative error %.2e over 4 mode pairs in %.1f s", worst, secs)};
}

Verdict equivalence() {
  const std::size_t L = 8;
  double final_gap = 0.0, internal_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto model = noisy_model(PaddingMode::kCorrected, L, seed);
    const std::vector<ItemId> prefix{3, 11, 5, 1, 9};
    const auto absolute = final_states(model, pad_truncate(prefix, L));
    const auto relative = final_states(model, prefix);
    final_gap = std::max(final_gap, row_gap(absolute, L - 1, relative, prefix.size() - 1));
    for (std::size_t k = 1; k < prefix.size(); ++k) {
      const auto shorter = final_states(model, std::vector<ItemId>(prefix.begin(), prefix.begin() + k));
      internal_gap = std::max(internal_gap, row_gap(absolute, L - prefix.size() + k - 1, shorter, k - 1));
    }
  }
  return {final_gap < 1e-5 && internal_gap > 1e-3,
          fmt("final-position gap %.2e, internal gap %.2e", final_gap, internal_gap)};
}

Verdict padding() {
  const std::vector<ItemId> plain{4, 2, 7};
  std::vector<ItemId> padded(3, kPaddingItem);
  padded.insert(padded.end(), plain.begin(), plain.end());

  double corrected_gap = 0.0;
  const auto corrected = noisy_model(PaddingMode::kCorrected, 8, 11);
  const auto a = final_states(corrected, plain), b = final_states(corrected, padded);
  for (std::size_t r = 0; r < plain.size(); ++r) corrected_gap = std::max(corrected_gap, row_gap(a, r, b, r + 3));
  const auto buggy = noisy_model(PaddingMode::kBuggy, 8, 11);
  const double buggy_gap = row_gap(final_states(buggy, plain), 2, final_states(buggy, padded), 5);

  // Absolute windows put padding in every short prefix.
  const auto corpus = build_sequences(cycle_corpus(12, 30, 10));
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  ModelConfig cfg;
  cfg.d = 16;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.max_len = 12;
  cfg.position_mode = PositionMode::kAbsoluteTrick;
  cfg.num_items = corpus.num_items;
  auto model = SequenceModel<float>::init(cfg, 12);
  TrainConfig train;
  train.batch_size = 8;
  train.seed = 13;
  TrainState state;
  while (state.adam.t < 100) train_epoch(model, corpus, train, sampler, state);
  double row_norm = 0.0;
  for (float v : model.item_table().row_span(kPaddingItem)) row_norm += std::abs(v);

  return {corrected_gap == 0.0 && buggy_gap > 0.0 && row_norm == 0.0,
          fmt("corrected gap %.1e, buggy gap %.2e, padding row L1 %.1e", corrected_gap, buggy_gap, row_norm) +
              " after " + std::to_string(state.adam.t) + " steps"};
}

Verdict memorisation() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = 20;
  const auto corpus = build_sequences(cycle_corpus(n, 200, 15));
  const NegativeSampler sampler(corpus, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  ModelConfig cfg;
  cfg.d = 32;
  cfg.max_len = 20;
  cfg.keep_prob = 1.0;
  cfg.num_items = n;
  auto model = SequenceModel<float>::init(cfg, 41);
  TrainConfig train;
  train.seed = 42;
  TrainState state;
  auto cycles_reproduced = [&] {
    std::size_t ok = 0;
    for (ItemId s = 1; s <= n; ++s) {
      const auto generated = autoregressive_rollout(model, std::vector<ItemId>{s}, 10, DecodeSpec{});
      bool same = true;
      for (std::size_t t = 0; t < 10; ++t) same = same && generated[t] == (s + t) % n + 1;
      ok += same;
    }
    return ok;
  };
  // Train until both targets hold, within the epoch budget.
  double hr1 = 0.0;
  std::size_t epochs = 0, reproduced = 0;
  while (epochs < 50 && (hr1 < 0.95 || reproduced < n)) {
    train_epoch(model, corpus, train, sampler, state);
    ++epochs;
    hr1 = evaluate(model, corpus, EvalProtocol{std::nullopt, {1}, EvalSplit::kValidation}, sampler, epochs).hr_at(1);
    reproduced = cycles_reproduced();
  }
  const double secs = seconds_since(start);
  return {hr1 >= 0.95 && reproduced == n && secs < 300.0,
          fmt("validation HR@1 %.3f after %.0f epochs, ", hr1, static_cast<double>(epochs)) +
              std::to_string(reproduced) + "/" + std::to_string(n) + fmt(" cycles reproduced, %.1f s", secs)};
}

Verdict chance() {
  const auto corpus = build_sequences(markov_corpus(50, 400, 12, 51));
  ModelConfig cfg;
  cfg.d = 16;
  cfg.max_len = 12;
  cfg.num_items = 50;
  const auto model = SequenceModel<float>::init(cfg, 52);
  const NegativeSampler sampler(corpus, SamplerSpec{});
  const auto report = evaluate(model, corpus, EvalProtocol{std::nullopt, {10}, EvalSplit::kTest}, sampler, 53);
  const double p = 0.2;
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(report.users));
  const double z = (report.hr_at(10) - p) / sigma;
  return {report.users >= 200 && std::abs(z) <= 3.0,
          fmt("HR@10 %.4f over %.0f users (z = %.2f)", report.hr_at(10), static_cast<double>(report.users), z)};
}

Verdict sampler_audit() {
  const auto corpus = build_sequences(skewed_corpus(40, 80, 15, 1.3, 61));
  double worst_p = 1.0, skew = 0.0;
  for (auto s : {SamplerStrategy::kUniformExcluding, SamplerStrategy::kUniformAll, SamplerStrategy::kPopularity}) {
    const auto report = audit_sampler(SamplerSpec{s, 0.75, 62}, corpus, 100000);
    worst_p = std::min(worst_p, report.p_value);
    if (s == SamplerStrategy::kUniformExcluding) skew = report.exclusion_skew_tv;
  }
  return {worst_p > 0.01 && skew > 0.0 && corpus.num_items <= 50,
          fmt("smallest p-value %.3f, exclusion skew TV %.4f", worst_p, skew)};
}

Verdict duality() {
  // Involution on the full data.
  const auto markov = build_sequences(markov_corpus(15, 40, 9, 71));
  const auto twice = invert_all(invert_all(markov));
  bool involution = twice.sequences.size() == markov.sequences.size();
  for (std::size_t u = 0; involution && u < markov.sequences.size(); ++u) {
    const auto a = markov.sequences[u].events(), b = twice.sequences[u].events();
    involution = std::equal(a.begin(), a.end(), b.begin(), b.end());
  }

  ModelConfig cfg;
  cfg.d = 8;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.max_len = 10;
  cfg.keep_prob = 1.0;
  TrainConfig train;
  train.learning_rate = 5e-3;
  train.batch_size = 32;
  train.duality_lambda = 0.1;
  train.seed = 72;

  // Next-user: item rotations over users.
  const auto rotation = build_sequences(cycle_corpus(20, 20, 15));
  const auto inverted = invert_corpus(rotation);
  cfg.num_items = 20;
  const auto frozen = SequenceModel<float>::init(cfg, 73);
  auto primary = frozen;
  const auto vectors = user_embeddings(frozen, rotation);
  auto next = DualModel<float>::init(cfg, rotation.num_users, 74);
  DualOptions next_only;
  next_only.consistency = false;
  next_only.next_user = true;
  DualTrainState state;
  TrainConfig fast = train;
  fast.learning_rate = 1e-2;
  for (int e = 0; e < 30; ++e) duality_phase(primary, next, inverted, vectors, fast, next_only, state);
  const double hr1 =
      evaluate_next_user(next, inverted, vectors, EvalProtocol{std::nullopt, {1}, EvalSplit::kValidation}, 75)
          .hr_at(1);

  // Consistency under co-training.
  // Same cycle corpus as the memorisation check.
  const auto cycle = build_sequences(cycle_corpus(20, 200, 15));
  const NegativeSampler sampler(cycle, SamplerSpec{SamplerStrategy::kUniformAll, 1.0, 1});
  cfg.num_items = 20;
  auto co = SequenceModel<float>::init(cfg, 76);
  auto dual = DualModel<float>::init(cfg, cycle.num_users, 77);
  DualOptions consistency;
  consistency.passes = 20;
  train.epochs = 4;
  co_train(co, dual, cycle, train, sampler, consistency);
  const double cosine = mean_consistency_cosine(co, dual, invert_corpus(cycle), user_embeddings(co, cycle));

  return {involution && hr1 >= 0.95 && cosine >= 0.9,
          std::string(involution ? "involution holds" : "involution broken") +
              fmt(", next-user HR@1 %.3f, mean consistency cosine %.3f", hr1, cosine)};
}

Verdict statistics() {
  Rng rng(81);
  SymbolSequences uniform(1000);
  for (auto& seq : uniform) {
    for (int t = 0; t < 1000; ++t) seq.push_back(static_cast<std::uint32_t>(uniform_below(rng, 64)));
  }
  const double h = corpus_statistics(uniform).unigram_entropy;
  SymbolSequences cycle;
  for (std::uint32_t s = 0; s < 20; ++s) {
    std::vector<std::uint32_t> seq;
    for (std::uint32_t t = 0; t < 30; ++t) seq.push_back((s + t) % 7);
    cycle.push_back(seq);
  }
  const auto cycle_stats = corpus_statistics(cycle);
  // Sparse enough that every ratio has a nonzero denominator.
  SymbolSequences sparse(50);
  for (auto& seq : sparse) {
    for (int t = 0; t < 40; ++t) seq.push_back(static_cast<std::uint32_t>(uniform_below(rng, 20)));
  }
  const auto self = compare_corpora(corpus_statistics(sparse), corpus_statistics(sparse));
  const bool unit = self.entropy.value == 1.0 && self.vocab.value == 1.0 && self.singleton_bigram.value == 1.0;
  return {std::abs(h - 6.0) <= 0.06 && cycle_stats.bigram_entropy == 0.0 && unit,
          fmt("uniform entropy %.4f of 6 bits, cycle conditional entropy %.1e, ", h, cycle_stats.bigram_entropy) +
              (unit ? "self-comparison ratios 1" : "self-comparison ratios off")};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict reproducibility() {
  TempDir dir("acceptance");
  {
    std::ofstream data(dir / "cycle.tsv");
    write_interactions(data, cycle_corpus(12, 30, 10));
  }
  write_manifest(dir / "cycle.manifest", DatasetManifest{"cycle.tsv", true});
  std::ofstream(dir / "run.cfg") << "data.manifest = " << (dir / "cycle.manifest").string() << "\n"
                                 << "out.dir = " << (dir / "out").string() << "\n"
                                 << "model.d = 16\nmodel.max_len = 12\nmodel.keep_prob = 0.8\n"
                                 << "train.epochs = 3\ntrain.batch_size = 16\nrollout.horizon = 4\nseed = 5\n";
  const std::vector<std::string> files{"train.report", "train.log", "last.ckpt", "best.ckpt", "eval.report",
                                       "rollout.report"};
  for (int pass = 0; pass < 2; ++pass) {
    for (const std::string command : {"train", "eval", "rollout"}) {
      std::ostringstream out, err;
      if (cli::run({command, "--config", (dir / "run.cfg").string()}, out, err) != 0) {
        return {false, command + " failed: " + err.str()};
      }
    }
    if (pass == 0) std::filesystem::rename(dir / "out", dir / "first");
  }
  std::size_t same = 0;
  for (const auto& f : files) {
    const std::string a = slurp(dir / "first" / f);
    same += !a.empty() && a == slurp(dir / "out" / f);
  }
  return {same == files.size(), std::to_string(same) + "/" + std::to_string(files.size()) +
                                    " reports and checkpoints byte-identical across reruns"};
}

}  // namespace
}  // namespace seqrec

int main() {
  using Check = std::function<seqrec::Verdict()>;
  const std::vector<std::pair<const char*, Check>> checks{
      {"gradient check", seqrec::gradients},
      {"absolute/relative equivalence", seqrec::equivalence},
      {"padding neutrality", seqrec::padding},
      {"cycle memorisation", seqrec::memorisation},
      {"untrained model at chance", seqrec::chance},
      {"sampler audit", seqrec::sampler_audit},
      {"duality", seqrec::duality},
      {"corpus statistics", seqrec::statistics},
      {"CLI reproducibility", seqrec::reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    seqrec::Verdict v;
    try {
      v = checks[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, checks[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
