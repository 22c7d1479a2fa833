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

#include "commands.h"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "run_config.h"
#include "seqrec/checkpoint.h"
#include "seqrec/corpus.h"
#include "seqrec/duality.h"
#include "seqrec/error.h"
#include "seqrec/interactions.h"
#include "seqrec/sampling.h"
#include "seqrec/stats.h"

#ifndef SEQREC_VERSION
#define SEQREC_VERSION "0.0.0"
#endif

namespace seqrec::cli {

namespace fs = std::filesystem;

namespace {

// Exclusive ownership of an output directory for the lifetime of a run.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw UsageError("output directory " + dir.string() + " is locked by another run (remove " +
                       path_.string() + " if that run is gone)");
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
  if (!out) throw UsageError("failed writing " + path.string());
}

struct Context {
  std::string command;
  RunConfig config;
  bool allow_mode_mismatch = false;
  std::ostream& out;

  fs::path dir() const { return config.out_dir(); }

  void write_report(const std::string& name, const KeyValues& body) const {
    std::string text = "command=" + command + "\n";
    text += "version=" SEQREC_VERSION "\n";
    text += "config_hash=" + hex64(config.hash()) + "\n";
    text += "seed=" + std::to_string(config.seed()) + "\n";
    for (const auto& [k, v] : body.entries) text += k + "=" + v + "\n";
    const fs::path path = dir() / name;
    write_text(path, text);
    out << "wrote " << path.string() << "\n";
  }

  void save(const std::string& name, const Checkpoint& ckpt) const {
    const fs::path path = dir() / name;
    save_checkpoint(path, ckpt);
    out << "wrote " << path.string() << "\n";
  }
};

void merge(KeyValues& into, const KeyValues& from) {
  for (const auto& [k, v] : from.entries) into.set(k, v);
}

SequenceCorpus load_corpus(const Context& ctx) {
  const fs::path manifest = ctx.config.path("data.manifest");
  if (manifest.empty()) throw ConfigError("data.manifest is required for `" + ctx.command + "`");
  return build_sequences(load_dataset(read_manifest(manifest)));
}

fs::path checkpoint_path(const Context& ctx) {
  const fs::path explicit_path = ctx.config.path("checkpoint.path");
  return explicit_path.empty() ? ctx.dir() / "best.ckpt" : explicit_path;
}

// Loads the primary checkpoint and reconciles it with the run config.
SequenceModel<float> load_primary(const Context& ctx, const SequenceCorpus& corpus) {
  const fs::path path = checkpoint_path(ctx);
  SequenceModel<float> model = SequenceModel<float>::from_checkpoint(load_checkpoint(path));
  const ModelConfig want = ctx.config.model(corpus.num_items);
  const ModelConfig& have = model.config();
  if (have.d != want.d || have.blocks != want.blocks || have.heads != want.heads ||
      have.max_len != want.max_len || have.num_items != want.num_items ||
      have.padding_mode != want.padding_mode) {
    throw ConfigError("config/checkpoint mismatch: " + path.string() +
                      " was trained with a different architecture, padding mode or item count");
  }
  if (have.position_mode == want.position_mode) return model;
  if (!ctx.allow_mode_mismatch) {
    throw ConfigError("checkpoint " + path.string() + " was trained in " +
                      std::string(to_string(have.position_mode)) + " mode but the config requests " +
                      std::string(to_string(want.position_mode)) + "; pass --allow-mode-mismatch to proceed");
  }
  ModelConfig config = have;
  config.position_mode = want.position_mode;
  return SequenceModel<float>(config, model.params(), model.item_table_slot(), model.stack());
}

KeyValues corpus_summary(const SequenceCorpus& corpus) {
  std::size_t interactions = 0;
  for (const auto& s : corpus.sequences) interactions += s.size();
  KeyValues kv;
  kv.set("corpus.users", std::to_string(corpus.num_users));
  kv.set("corpus.items", std::to_string(corpus.num_items));
  kv.set("corpus.interactions", std::to_string(interactions));
  kv.set("corpus.evaluable_users", std::to_string(corpus.evaluable_users()));
  return kv;
}

// ---------------------------------------------------------------------------

void cmd_ingest(const Context& ctx) {
  const fs::path manifest = ctx.config.path("data.manifest");
  if (manifest.empty()) throw ConfigError("data.manifest is required for `ingest`");
  const InteractionLog log = load_dataset(read_manifest(manifest));
  std::ostringstream cache;
  write_interactions(cache, log);
  write_text(ctx.dir() / "corpus.tsv", cache.str());
  write_manifest(ctx.dir() / "corpus.manifest", DatasetManifest{"corpus.tsv", true});
  ctx.out << "wrote " << (ctx.dir() / "corpus.manifest").string() << "\n";
  ctx.write_report("ingest.report", corpus_summary(build_sequences(log)));
}

void cmd_train(const Context& ctx) {
  const SequenceCorpus corpus = load_corpus(ctx);
  const ModelConfig mc = ctx.config.model(corpus.num_items);
  const TrainConfig tc = ctx.config.train();
  SequenceModel<float> model = SequenceModel<float>::init(mc, ctx.config.seed());
  const NegativeSampler sampler(corpus, ctx.config.sampler());

  FitOptions options;
  EvalProtocol validation = ctx.config.eval();
  validation.split = EvalSplit::kValidation;
  if (corpus.evaluable_users() > 0) options.validation = validation;
  std::string timing;
  options.after_epoch = [&](const EpochRecord& r, SequenceModel<float>&) {
    timing += "epoch=" + std::to_string(r.epoch) + " seconds=" + format_double(r.seconds) + "\n";
    ctx.out << "epoch " << r.epoch << " loss " << r.mean_loss << "\n";
  };
  const FitResult result = fit(model, corpus, tc, sampler, options);

  std::string log;
  for (const EpochRecord& r : result.report.epochs) log += r.to_line() + "\n";
  write_text(ctx.dir() / "train.log", log);
  write_text(ctx.dir() / "timing.log", timing);
  ctx.save("last.ckpt", model.to_checkpoint());
  ctx.save("best.ckpt", result.best.to_checkpoint());

  KeyValues body = corpus_summary(corpus);
  body.set("train.epochs_run", std::to_string(result.report.epochs.size()));
  body.set("train.best_epoch", std::to_string(result.report.best_epoch));
  if (!result.report.epochs.empty()) {
    const EpochRecord& last = result.report.epochs.back();
    body.set("train.final_loss", format_double(last.mean_loss));
    body.set("train.examples_per_epoch", std::to_string(last.examples));
    std::size_t skipped = 0;
    for (const EpochRecord& r : result.report.epochs) skipped += r.skipped_steps;
    body.set("train.skipped_steps", std::to_string(skipped));
    const EpochRecord& best = result.report.epochs[result.report.best_epoch - 1];
    if (best.validation) merge(body, best.validation->to_key_values("best_validation"));
  }
  ctx.write_report("train.report", body);
}

void cmd_eval(const Context& ctx) {
  const SequenceCorpus corpus = load_corpus(ctx);
  const SequenceModel<float> model = load_primary(ctx, corpus);
  const NegativeSampler sampler(corpus, ctx.config.sampler());
  KeyValues body;
  body.set("checkpoint.position_mode", std::string(to_string(model.config().position_mode)));
  merge(body, evaluate(model, corpus, ctx.config.eval(), sampler, ctx.config.seed()).to_key_values());
  if (const auto exposure = ctx.config.exposure()) {
    merge(body, exposure_capped_recommend(model, corpus, *exposure).to_key_values());
  }
  ctx.write_report("eval.report", body);
}

void cmd_rollout(const Context& ctx) {
  const SequenceCorpus corpus = load_corpus(ctx);
  const SequenceModel<float> model = load_primary(ctx, corpus);
  const RolloutReport report =
      evaluate_rollout(model, corpus, ctx.config.rollout_horizon(), ctx.config.decode());
  ctx.write_report("rollout.report", report.to_key_values());
}

void cmd_dual_train(const Context& ctx) {
  const SequenceCorpus corpus = load_corpus(ctx);
  const ModelConfig mc = ctx.config.model(corpus.num_items);
  const TrainConfig tc = ctx.config.train();
  const DualOptions options = ctx.config.dual();
  SequenceModel<float> primary = SequenceModel<float>::init(mc, ctx.config.seed());
  DualModel<float> dual = DualModel<float>::init(mc, corpus.num_users, ctx.config.seed());
  const NegativeSampler sampler(corpus, ctx.config.sampler());
  const auto records = co_train(primary, dual, corpus, tc, sampler, options);

  std::string log, timing;
  for (const CoTrainRecord& r : records) {
    log += r.primary.to_line() + " | " + r.dual.to_line() + "\n";
    timing += "epoch=" + std::to_string(r.primary.epoch) + " seconds=" + format_double(r.primary.seconds) + "\n";
  }
  write_text(ctx.dir() / "dual.log", log);
  write_text(ctx.dir() / "timing.log", timing);
  ctx.save("primary.ckpt", primary.to_checkpoint());
  ctx.save("dual.ckpt", dual.to_checkpoint());

  const SequenceCorpus inverted = invert_corpus(corpus);
  const Tensor<float> vectors = user_embeddings(primary, corpus);
  KeyValues body = corpus_summary(corpus);
  body.set("dual.epochs_run", std::to_string(records.size()));
  body.set("dual.lambda", format_double(tc.duality_lambda));
  body.set("dual.mean_cosine", format_double(mean_consistency_cosine(primary, dual, inverted, vectors)));
  if (!records.empty()) body.set("primary.final_loss", format_double(records.back().primary.mean_loss));
  EvalProtocol protocol = ctx.config.eval();
  if (corpus.evaluable_users() > 0) {
    merge(body, evaluate(primary, corpus, protocol, sampler, ctx.config.seed()).to_key_values("primary"));
  }
  if (options.next_user) {
    merge(body, evaluate_next_user(dual, inverted, vectors, protocol, ctx.config.seed()).to_key_values("next_user"));
  }
  ctx.write_report("dual.report", body);
}

void cmd_audit_sampler(const Context& ctx) {
  const SequenceCorpus corpus = load_corpus(ctx);
  const AuditReport report = audit_sampler(ctx.config.sampler(), corpus, ctx.config.audit_trials());
  ctx.write_report("audit.report", report.to_key_values());
}

void cmd_stats(const Context& ctx) {
  const fs::path input = ctx.config.path("stats.input");
  if (input.empty()) throw ConfigError("stats.input is required for `stats`");
  const SymbolSequences sequences =
      read_symbol_sequences(input, parse_symbol_format(ctx.config.get("stats.format")));
  ctx.write_report("stats.report", corpus_statistics(sequences).to_key_values());
}

void cmd_compare_stats(const Context& ctx) {
  const fs::path a = ctx.config.path("stats.report_a");
  const fs::path b = ctx.config.path("stats.report_b");
  if (a.empty() || b.empty()) throw ConfigError("stats.report_a and stats.report_b are required");
  const StatsReport ra = StatsReport::from_key_values(read_key_values_file(a));
  const StatsReport rb = StatsReport::from_key_values(read_key_values_file(b));
  ctx.write_report("compare.report", compare_corpora(ra, rb).to_key_values());
}

const std::map<std::string, std::pair<std::string, std::function<void(const Context&)>>>& commands() {
  static const std::map<std::string, std::pair<std::string, std::function<void(const Context&)>>> table{
      {"ingest", {"Parse a dataset and write the corpus cache", cmd_ingest}},
      {"train", {"Train the sequence model; writes last/best checkpoints", cmd_train}},
      {"eval", {"Leave-one-out ranking metrics for a checkpoint", cmd_eval}},
      {"rollout", {"Autoregressive rollout evaluation for a checkpoint", cmd_rollout}},
      {"dual-train", {"Co-train the sequence model with the item-side dual encoder", cmd_dual_train}},
      {"audit-sampler", {"Chi-square and bias audit of a negative sampler", cmd_audit_sampler}},
      {"stats", {"Corpus statistics for an interaction or text file", cmd_stats}},
      {"compare-stats", {"Compare two stats reports", cmd_compare_stats}},
  };
  return table;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"seqrec: sequential recommendation experiments", "seqrec"};
  app.set_version_flag("--version", SEQREC_VERSION);
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  bool allow_mode_mismatch = false;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands()) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_file, "key = value run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override one key (repeatable), e.g. --set model.d=64");
    sub->add_flag("--allow-mode-mismatch", allow_mode_mismatch,
                  "evaluate a checkpoint in a position mode other than the one it was trained in");
    subs[name] = sub;
  }

  std::vector<std::string> argv_storage{"seqrec"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  try {
    const std::optional<fs::path> file = config_file ? std::optional<fs::path>(*config_file) : std::nullopt;
    Context ctx{command, RunConfig::resolve(file, overrides), allow_mode_mismatch, out};
    const DirectoryLock lock(ctx.dir());
    write_text(ctx.dir() / (command + ".resolved.cfg"), ctx.config.text());
    commands().at(command).second(ctx);
    return 0;
  } catch (const ConfigError& e) {
    err << "seqrec " << command << ": configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "seqrec " << command << ": error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace seqrec::cli
