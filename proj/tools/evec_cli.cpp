// tools/evec_cli.cpp

// Copyright 2026  The evec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// evec: corpus synthesis, stage-wise training and evaluation.
//
//   evec synth --config C --out DIR
//   evec train <stage> --config C --manifest M --models DIR
//   evec eval --config C --manifest M --models DIR --out REPORTS
//
// Exit status: 0 ok, 1 usage or I/O error, 2 missing upstream artifact,
// 3 numerical failure, 4 leakage guard.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evec/evec.hpp"

namespace {

using namespace evec;

struct Options {
  std::string config, manifest, models, out, stage;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

PipelineConfig effective_config(const Options &o) {
  PipelineConfig cfg = load_config(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  std::cerr << "config " << o.config << " digest " << config_digest(cfg) << " seed " << cfg.seed << "\n";
  return cfg;
}

int cmd_synth(const Options &o) {
  PipelineConfig cfg = effective_config(o);
  DirectoryLock lock(o.out);
  CorpusSummary s = generate_corpus(cfg.corpus, o.out, o.workers);
  std::size_t total = 0;
  for (const auto &[split, n] : s.split_counts) {
    std::cout << split << " " << n << "\n";
    total += n;
  }
  std::cout << "total " << total << "\nmax_snr_error_db " << s.max_snr_error_db << "\nmax_t60_rel_error "
            << s.max_t60_rel_error << "\nclamped_samples " << s.clamped_samples << "\nmanifest "
            << s.manifest.string() << "\n";
  return 0;
}

int cmd_train(const Options &o) {
  PipelineConfig cfg = effective_config(o);
  DirectoryLock lock(o.models);
  std::vector<Utterance> utts = load_utterances(o.manifest, cfg, o.workers);
  for (const auto &p : train_stage(o.stage, utts, cfg, o.models, o.workers)) std::cout << p.string() << "\n";
  return 0;
}

int cmd_eval(const Options &o) {
  PipelineConfig cfg = effective_config(o);
  namespace fs = std::filesystem;
  std::optional<DirectoryLock> model_lock;
  if (fs::weakly_canonical(o.models) != fs::weakly_canonical(o.out)) model_lock.emplace(o.models);
  DirectoryLock lock(o.out);
  ModelSet models = load_models(o.models, cfg);
  std::vector<Utterance> utts = load_utterances(o.manifest, cfg, o.workers);
  std::vector<EvalReport> reps{evaluate(utts, models, cfg, o.workers)};
  write_reports(o.out, reps, cfg);
  std::cout << headline_table(reps, cfg);
  return 0;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kMissingArtifact:
      return 2;
    case ErrorKind::kNumerical:
      return 3;
    case ErrorKind::kLeakage:
      return 4;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"evec: environment vectors for room verification and metadata estimation"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", o.config, "pipeline config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run seed, overrides corpus.seed");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::Range(1, 1024));
  };

  CLI::App *synth = app.add_subcommand("synth", "synthesize the labeled corpus");
  common(synth);
  synth->add_option("--out", o.out, "corpus directory")->required();

  CLI::App *train = app.add_subcommand("train", "train one model stage");
  common(train);
  train->add_option("stage", o.stage, "ubm | tmatrix | lda | plda | ridge | bottleneck | wada")
      ->required()
      ->check(CLI::IsMember(stage_names()));
  train->add_option("--manifest", o.manifest, "corpus manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--models", o.models, "model directory")->required();

  CLI::App *eval = app.add_subcommand("eval", "score verification, metadata and augmentation");
  common(eval);
  eval->add_option("--manifest", o.manifest, "corpus manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--models", o.models, "model directory")->required();
  eval->add_option("--out", o.out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  for (CLI::App *sub : {synth, train, eval})
    if (sub->parsed() && sub->count("--seed")) o.seed = seed;

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (train->parsed()) return cmd_train(o);
    return cmd_eval(o);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
