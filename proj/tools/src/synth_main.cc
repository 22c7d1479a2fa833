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

// Writes synthetic interaction files plus a manifest next to them.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "seqrec/interactions.h"
#include "seqrec/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"seqrec-synth: synthetic interaction datasets", "seqrec-synth"};
  std::string kind = "cycle";
  std::string out = "synthetic.tsv";
  std::size_t items = 20, users = 200, length = 15;
  double exponent = 1.0;
  std::uint64_t seed = 0;
  app.add_option("kind", kind, "cycle, markov or skewed")->check(CLI::IsMember({"cycle", "markov", "skewed"}));
  app.add_option("-o,--out", out, "interaction file to write");
  app.add_option("--items", items)->check(CLI::PositiveNumber);
  app.add_option("--users", users)->check(CLI::PositiveNumber);
  app.add_option("--length", length)->check(CLI::PositiveNumber);
  app.add_option("--exponent", exponent, "popularity exponent for `skewed`");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    seqrec::InteractionLog log;
    if (kind == "cycle") {
      log = seqrec::cycle_corpus(items, users, length);
    } else if (kind == "markov") {
      log = seqrec::markov_corpus(items, users, length, seed);
    } else {
      log = seqrec::skewed_corpus(items, users, length, exponent, seed);
    }
    const std::filesystem::path path(out);
    std::ofstream file(path, std::ios::binary);
    seqrec::write_interactions(file, log);
    if (!file) throw std::runtime_error("cannot write " + out);
    std::filesystem::path manifest = path;
    manifest.replace_extension(".manifest");
    seqrec::write_manifest(manifest, seqrec::DatasetManifest{path.filename(), true});
    std::cout << "wrote " << path.string() << " and " << manifest.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "seqrec-synth: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
