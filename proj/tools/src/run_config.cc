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

#include "run_config.h"

#include <algorithm>
#include <sstream>

#include "seqrec/error.h"

namespace seqrec::cli {

const KeyValues& default_run_config() {
  static const KeyValues defaults = [] {
    KeyValues kv;
    const ModelConfig model;
    const TrainConfig train;
    kv.set("seed", "0");
    kv.set("data.manifest", "");
    kv.set("out.dir", "out");
    kv.set("checkpoint.path", "");
    kv.set("model.d", std::to_string(model.d));
    kv.set("model.blocks", std::to_string(model.blocks));
    kv.set("model.heads", std::to_string(model.heads));
    kv.set("model.max_len", std::to_string(model.max_len));
    kv.set("model.keep_prob", format_double(model.keep_prob));
    kv.set("model.position_mode", std::string(to_string(model.position_mode)));
    kv.set("model.padding_mode", std::string(to_string(model.padding_mode)));
    for (const auto& [k, v] : train.to_key_values().entries) kv.set(k, v);
    kv.set("sampler.strategy", "uniform_excluding");
    kv.set("sampler.alpha", "1");
    kv.set("eval.candidates", "full");
    kv.set("eval.ks", "1,5,10");
    kv.set("eval.split", "test");
    kv.set("eval.exposure_beta", "");
    kv.set("eval.provenance", "first_user");
    kv.set("rollout.horizon", "10");
    kv.set("rollout.decode", "greedy");
    kv.set("rollout.top_k", "10");
    kv.set("rollout.temperature", "1");
    kv.set("audit.trials", "100000");
    kv.set("stats.input", "");
    kv.set("stats.format", "interactions");
    kv.set("stats.report_a", "");
    kv.set("stats.report_b", "");
    kv.set("dual.consistency", "true");
    kv.set("dual.next_user", "false");
    kv.set("dual.item_subset", "1024");
    kv.set("dual.passes", "1");
    return kv;
  }();
  return defaults;
}

namespace {

void apply(KeyValues& into, const std::string& key, const std::string& value, std::string_view origin) {
  if (!default_run_config().get(key)) {
    throw ConfigError("unknown configuration key `" + key + "` (from " + std::string(origin) + ")");
  }
  into.set(key, value);
}

std::vector<std::size_t> parse_ks(std::string_view text) {
  std::vector<std::size_t> ks;
  std::stringstream in{std::string(text)};
  std::string part;
  while (std::getline(in, part, ',')) ks.push_back(parse_uint(trim(part), "eval.ks"));
  return ks;
}

}  // namespace

RunConfig RunConfig::resolve(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides) {
  RunConfig config;
  config.values_ = default_run_config();
  if (file) {
    for (const auto& [k, v] : read_key_values_file(*file).entries) apply(config.values_, k, v, file->string());
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got `" + o + "`");
    apply(config.values_, trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "--set");
  }
  std::sort(config.values_.entries.begin(), config.values_.entries.end());
  // Parse everything once so a bad value fails before any work starts.
  (void)config.seed();
  (void)config.model(1);
  config.train().validate();
  (void)config.sampler();
  (void)config.eval();
  (void)config.exposure();
  (void)config.decode();
  (void)config.rollout_horizon();
  (void)config.audit_trials();
  (void)config.dual();
  (void)parse_symbol_format(config.get("stats.format"));
  return config;
}

std::string RunConfig::get(std::string_view key) const {
  const auto v = values_.get(key);
  if (!v) throw UsageError("configuration key `" + std::string(key) + "` is not defined");
  return *v;
}

std::string RunConfig::text() const {
  std::string out;
  for (const auto& [k, v] : values_.entries) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t RunConfig::seed() const { return parse_uint(get("seed"), "seed"); }

std::filesystem::path RunConfig::out_dir() const {
  const std::string dir = get("out.dir");
  if (dir.empty()) throw ConfigError("out.dir must not be empty");
  return dir;
}

std::filesystem::path RunConfig::path(std::string_view key) const { return get(key); }

ModelConfig RunConfig::model(std::size_t num_items) const {
  KeyValues kv = values_;
  kv.set("model.num_items", std::to_string(num_items));
  return ModelConfig::from_key_values(kv);
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.learning_rate = parse_double(get("train.learning_rate"), "train.learning_rate");
  t.beta1 = parse_double(get("train.beta1"), "train.beta1");
  t.beta2 = parse_double(get("train.beta2"), "train.beta2");
  t.epsilon = parse_double(get("train.epsilon"), "train.epsilon");
  t.epochs = parse_uint(get("train.epochs"), "train.epochs");
  t.batch_size = parse_uint(get("train.batch_size"), "train.batch_size");
  t.weighting = parse_weighting_mode(get("train.weighting"));
  t.duality_lambda = parse_double(get("train.duality_lambda"), "train.duality_lambda");
  t.seed = seed();
  return t;
}

SamplerSpec RunConfig::sampler() const {
  SamplerSpec s;
  s.strategy = parse_sampler_strategy(get("sampler.strategy"));
  s.alpha = parse_double(get("sampler.alpha"), "sampler.alpha");
  s.seed = seed();
  s.validate();
  return s;
}

EvalProtocol RunConfig::eval() const {
  EvalProtocol p;
  const std::string candidates = get("eval.candidates");
  if (candidates != "full") p.sampled = parse_uint(candidates, "eval.candidates");
  p.ks = parse_ks(get("eval.ks"));
  p.split = parse_eval_split(get("eval.split"));
  return p;
}

std::optional<ExposureConfig> RunConfig::exposure() const {
  const std::string beta = get("eval.exposure_beta");
  if (beta.empty()) return std::nullopt;
  ExposureConfig e;
  e.beta = parse_double(beta, "eval.exposure_beta");
  if (!(e.beta > 0.0)) throw ConfigError("eval.exposure_beta must be positive");
  e.provenance = parse_provenance_rule(get("eval.provenance"));
  e.ks = parse_ks(get("eval.ks"));
  e.split = parse_eval_split(get("eval.split"));
  e.seed = seed();
  return e;
}

DecodeSpec RunConfig::decode() const {
  DecodeSpec d;
  const std::string kind = get("rollout.decode");
  if (kind == "greedy") {
    d.kind = DecodeSpec::Kind::kGreedy;
  } else if (kind == "top_k") {
    d.kind = DecodeSpec::Kind::kTopK;
  } else {
    throw ConfigError("rollout.decode must be greedy or top_k");
  }
  d.top_k = parse_uint(get("rollout.top_k"), "rollout.top_k");
  d.temperature = parse_double(get("rollout.temperature"), "rollout.temperature");
  if (d.top_k == 0 || !(d.temperature > 0.0)) {
    throw ConfigError("rollout.top_k must be >= 1 and rollout.temperature > 0");
  }
  d.seed = seed();
  return d;
}

std::size_t RunConfig::rollout_horizon() const {
  const std::size_t h = parse_uint(get("rollout.horizon"), "rollout.horizon");
  if (h == 0) throw ConfigError("rollout.horizon must be >= 1");
  return h;
}

std::uint64_t RunConfig::audit_trials() const { return parse_uint(get("audit.trials"), "audit.trials"); }

DualOptions RunConfig::dual() const {
  DualOptions d;
  d.consistency = parse_bool(get("dual.consistency"), "dual.consistency");
  d.next_user = parse_bool(get("dual.next_user"), "dual.next_user");
  d.item_subset = parse_uint(get("dual.item_subset"), "dual.item_subset");
  d.passes = parse_uint(get("dual.passes"), "dual.passes");
  if (d.item_subset == 0) throw ConfigError("dual.item_subset must be positive");
  return d;
}

}  // namespace seqrec::cli
