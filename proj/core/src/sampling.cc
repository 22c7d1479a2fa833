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

#include "seqrec/sampling.h"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "seqrec/error.h"

namespace seqrec {

std::string_view to_string(SamplerStrategy strategy) {
  switch (strategy) {
    case SamplerStrategy::kUniformExcluding:
      return "uniform_excluding";
    case SamplerStrategy::kUniformAll:
      return "uniform_all";
    case SamplerStrategy::kPopularity:
      return "popularity";
  }
  return "unknown";
}

SamplerStrategy parse_sampler_strategy(std::string_view text) {
  if (text == "uniform_excluding") return SamplerStrategy::kUniformExcluding;
  if (text == "uniform_all") return SamplerStrategy::kUniformAll;
  if (text == "popularity") return SamplerStrategy::kPopularity;
  throw ConfigError("unknown sampler strategy `" + std::string(text) + "`");
}

void SamplerSpec::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("sampler alpha must be >= 0");
}

NegativeSampler::NegativeSampler(const SequenceCorpus& corpus, SamplerSpec spec)
    : spec_(spec), num_items_(corpus.num_items), interacted_(corpus.sequences.size()) {
  spec_.validate();
  if (num_items_ == 0) throw UsageError("sampler needs at least one item");
  for (std::size_t u = 0; u < corpus.sequences.size(); ++u) {
    auto& set = interacted_[u];
    set = corpus.sequences[u].symbols();
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  if (spec_.strategy == SamplerStrategy::kPopularity) {
    const auto counts = corpus.train_item_counts();
    cumulative_.resize(num_items_);
    double total = 0.0;
    for (std::size_t i = 1; i <= num_items_; ++i) {
      const double w = std::pow(static_cast<double>(counts[i]), spec_.alpha);
      if (w > 0.0) ++positive_weight_items_;
      total += w;
      cumulative_[i - 1] = total;
    }
    if (!(total > 0.0)) throw UsageError("popularity sampler: all item weights are zero");
  }
}

bool NegativeSampler::interacted(UserId user, ItemId item) const {
  const auto& set = interacted_.at(user);
  return std::binary_search(set.begin(), set.end(), item);
}

std::size_t NegativeSampler::support_size(UserId user) const {
  switch (spec_.strategy) {
    case SamplerStrategy::kUniformExcluding:
      return num_items_ - interacted_.at(user).size();
    case SamplerStrategy::kUniformAll:
      return num_items_;
    case SamplerStrategy::kPopularity:
      return positive_weight_items_;
  }
  return 0;
}

ItemId NegativeSampler::draw(UserId user, Rng& rng) const {
  switch (spec_.strategy) {
    case SamplerStrategy::kUniformExcluding: {
      const auto& set = interacted_.at(user);
      if (set.size() >= num_items_) {
        throw UsageError("uniform_excluding: user interacted with every item");
      }
      if (set.size() * 2 > num_items_) {
        // Dense exclusion: index straight into the complement.
        std::uint64_t r = uniform_below(rng, num_items_ - set.size());
        ItemId item = 1;
        for (ItemId excluded : set) {
          if (excluded <= item + r) {
            ++r;
          } else {
            break;
          }
        }
        return static_cast<ItemId>(item + r);
      }
      for (;;) {
        const auto item = static_cast<ItemId>(1 + uniform_below(rng, num_items_));
        if (!std::binary_search(set.begin(), set.end(), item)) return item;
      }
    }
    case SamplerStrategy::kUniformAll:
      return static_cast<ItemId>(1 + uniform_below(rng, num_items_));
    case SamplerStrategy::kPopularity: {
      const double u = uniform_unit(rng) * cumulative_.back();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      return static_cast<ItemId>(1 + std::min<std::size_t>(
                                         static_cast<std::size_t>(it - cumulative_.begin()),
                                         num_items_ - 1));
    }
  }
  return kPaddingItem;
}

std::vector<ItemId> NegativeSampler::sample_negatives(UserId user, std::size_t count, Rng& rng) const {
  if (count == 0) throw UsageError("sample_negatives: count must be at least 1");
  std::vector<ItemId> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(user, rng));
  return out;
}

EvalCandidates NegativeSampler::build_eval_candidates(UserId user, ItemId truth,
                                                      std::optional<std::size_t> count,
                                                      Rng& rng) const {
  if (truth == kPaddingItem || truth > num_items_) throw UsageError("eval truth item out of range");
  EvalCandidates out;
  if (!count) {
    out.items.resize(num_items_);
    for (std::size_t i = 0; i < num_items_; ++i) out.items[i] = static_cast<ItemId>(i + 1);
    out.truth_index = truth - 1;
    return out;
  }

  std::size_t available = support_size(user);
  const bool truth_in_support =
      spec_.strategy == SamplerStrategy::kUniformAll ||
      (spec_.strategy == SamplerStrategy::kUniformExcluding && !interacted(user, truth)) ||
      (spec_.strategy == SamplerStrategy::kPopularity &&
       cumulative_[truth - 1] > (truth >= 2 ? cumulative_[truth - 2] : 0.0));
  if (truth_in_support) --available;
  if (available < *count) {
    throw UsageError("cannot draw " + std::to_string(*count) + " distinct negatives from " +
                     std::to_string(available) + " eligible items");
  }

  std::vector<std::uint8_t> taken(num_items_ + 1, 0);
  taken[truth] = 1;
  std::vector<ItemId> negatives;
  negatives.reserve(*count);
  while (negatives.size() < *count) {
    const ItemId item = draw(user, rng);
    if (taken[item]) continue;
    taken[item] = 1;
    negatives.push_back(item);
  }
  out.truth_index = static_cast<std::size_t>(uniform_below(rng, negatives.size() + 1));
  out.items = std::move(negatives);
  out.items.insert(out.items.begin() + static_cast<std::ptrdiff_t>(out.truth_index), truth);
  return out;
}

std::vector<double> NegativeSampler::target_distribution(UserId user) const {
  std::vector<double> p(num_items_ + 1, 0.0);
  switch (spec_.strategy) {
    case SamplerStrategy::kUniformExcluding: {
      const std::size_t support = support_size(user);
      if (support == 0) return p;
      for (std::size_t i = 1; i <= num_items_; ++i) {
        if (!interacted(user, static_cast<ItemId>(i))) p[i] = 1.0 / static_cast<double>(support);
      }
      break;
    }
    case SamplerStrategy::kUniformAll:
      for (std::size_t i = 1; i <= num_items_; ++i) p[i] = 1.0 / static_cast<double>(num_items_);
      break;
    case SamplerStrategy::kPopularity: {
      double prev = 0.0;
      for (std::size_t i = 1; i <= num_items_; ++i) {
        p[i] = (cumulative_[i - 1] - prev) / cumulative_.back();
        prev = cumulative_[i - 1];
      }
      break;
    }
  }
  return p;
}

ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed,
                                std::span<const double> expected_probability) {
  if (observed.size() != expected_probability.size()) {
    throw UsageError("chi_square_test: bin count mismatch");
  }
  double total = 0.0;
  for (std::uint64_t o : observed) total += static_cast<double>(o);
  ChiSquareResult r;
  std::size_t bins = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = expected_probability[i] * total;
    if (expected <= 0.0) {
      if (observed[i] > 0) {
        r.statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
      }
      continue;
    }
    ++bins;
    if (std::isfinite(r.statistic)) {
      const double diff = static_cast<double>(observed[i]) - expected;
      r.statistic += diff * diff / expected;
    }
  }
  r.degrees_of_freedom = bins > 0 ? bins - 1 : 0;
  if (!std::isfinite(r.statistic)) return r;
  if (r.degrees_of_freedom == 0) {
    r.p_value = 1.0;
    return r;
  }
  const boost::math::chi_squared dist(static_cast<double>(r.degrees_of_freedom));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

namespace {

double tv_vs_uniform(std::span<const double> p, std::size_t n) {
  double tv = 0.0;
  for (std::size_t i = 1; i <= n; ++i) tv += std::abs(p[i] - 1.0 / static_cast<double>(n));
  return 0.5 * tv;
}

}  // namespace

AuditReport audit_sampler(const SamplerSpec& spec, const SequenceCorpus& corpus, std::uint64_t trials) {
  if (trials < 10'000) throw UsageError("audit_sampler: at least 10^4 trials required");
  const NegativeSampler sampler(corpus, spec);
  SamplerSpec excluding = spec;
  excluding.strategy = SamplerStrategy::kUniformExcluding;
  const NegativeSampler excluding_sampler(corpus, excluding);
  const std::size_t n = corpus.num_items;

  std::vector<UserId> users;
  for (UserId u = 1; u < corpus.sequences.size(); ++u) {
    if (corpus.of(u).size() > 0) users.push_back(u);
  }
  if (users.empty()) throw UsageError("audit_sampler: corpus has no users");

  AuditReport report;
  report.spec = spec;
  report.trials = trials;
  report.target.assign(n + 1, 0.0);
  std::vector<double> excluding_marginal(n + 1, 0.0);
  std::size_t excluding_users = 0;
  for (UserId u : users) {
    const auto p = sampler.target_distribution(u);
    for (std::size_t i = 1; i <= n; ++i) report.target[i] += p[i] / static_cast<double>(users.size());
    const auto q = excluding_sampler.target_distribution(u);
    bool any = false;
    for (std::size_t i = 1; i <= n; ++i) any = any || q[i] > 0.0;
    if (!any) continue;
    ++excluding_users;
    for (std::size_t i = 1; i <= n; ++i) excluding_marginal[i] += q[i];
  }
  if (excluding_users > 0) {
    for (double& v : excluding_marginal) v /= static_cast<double>(excluding_users);
    report.exclusion_skew_tv = tv_vs_uniform(excluding_marginal, n);
  }

  Rng rng(derive_seed(spec.seed, {stream::kAudit}));
  report.counts.assign(n + 1, 0);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const UserId u = users[uniform_below(rng, users.size())];
    ++report.counts[sampler.sample_negatives(u, 1, rng).front()];
  }

  std::vector<double> empirical(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    empirical[i] = static_cast<double>(report.counts[i]) / static_cast<double>(trials);
  }
  report.empirical_tv_vs_uniform = tv_vs_uniform(empirical, n);
  report.target_tv_vs_uniform = tv_vs_uniform(report.target, n);

  const auto chi = chi_square_test(std::span<const std::uint64_t>(report.counts).subspan(1),
                                   std::span<const double>(report.target).subspan(1));
  report.chi_square = chi.statistic;
  report.degrees_of_freedom = chi.degrees_of_freedom;
  report.p_value = chi.p_value;
  return report;
}

KeyValues AuditReport::to_key_values() const {
  KeyValues kv;
  kv.set("audit.strategy", std::string(to_string(spec.strategy)));
  kv.set("audit.alpha", format_double(spec.alpha));
  kv.set("audit.trials", std::to_string(trials));
  kv.set("audit.items", std::to_string(counts.empty() ? 0 : counts.size() - 1));
  kv.set("audit.chi_square", format_double(chi_square));
  kv.set("audit.degrees_of_freedom", std::to_string(degrees_of_freedom));
  kv.set("audit.p_value", format_double(p_value));
  kv.set("audit.empirical_tv_vs_uniform", format_double(empirical_tv_vs_uniform));
  kv.set("audit.target_tv_vs_uniform", format_double(target_tv_vs_uniform));
  kv.set("audit.exclusion_skew_tv", format_double(exclusion_skew_tv));
  for (std::size_t i = 1; i < counts.size(); ++i) {
    kv.set("audit.count." + std::to_string(i), std::to_string(counts[i]));
  }
  return kv;
}

}  // namespace seqrec
