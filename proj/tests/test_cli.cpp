// tests/test_cli.cpp

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

// Drives the evec executable end to end on the tiny corpus.

#include <cstdlib>
#include <fstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "evec/evec.hpp"
#include "test_util.hpp"

namespace evec {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out, err;
};

CliResult run(const std::string &args, const fs::path &scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  std::string cmd = std::string(EVEC_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

const std::string kConfig = EVEC_TEST_DATA_DIR "/data_tiny.ini";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    CliResult r = run("synth --config " + kConfig + " --out " + corpus().string(), dir_->path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path corpus() { return dir_->path() / "corpus"; }
  static std::string manifest() { return (corpus() / "manifest.jsonl").string(); }
  static std::string train(const std::string &stage, const fs::path &models, const std::string &extra = "") {
    return "train " + stage + " --config " + kConfig + " --manifest " + manifest() + " --models " + models.string() +
           extra;
  }
  static TempDir *dir_;
};

TempDir *Cli::dir_ = nullptr;

TEST_F(Cli, SynthCountsAndDeterminism) {
  std::string text = read_file(manifest());
  // 8x3 train + 3x2 val + 2 types x 3 rooms x (2 enroll + 2 test)
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 24 + 6 + 24);
  TempDir again;
  CliResult r = run("synth --config " + kConfig + " --out " + (again.path() / "c").string(), again.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total 54"), std::string::npos) << r.out;
  EXPECT_EQ(read_file(again.path() / "c" / "manifest.jsonl"), text);
  CliResult other = run("synth --config " + kConfig + " --seed 8 --out " + (again.path() / "d").string(), again.path());
  ASSERT_EQ(other.code, 0) << other.err;
  EXPECT_NE(read_file(again.path() / "d" / "manifest.jsonl"), text);
}

TEST_F(Cli, SynthIntoUnwritablePathLeavesNoManifest) {
  TempDir t;
  std::ofstream(t.path() / "file") << "x";
  CliResult r = run("synth --config " + kConfig + " --out " + (t.path() / "file" / "sub").string(), t.path());
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(t.path() / "file" / "sub" / "manifest.jsonl"));
}

TEST_F(Cli, StageOrderIsEnforced) {
  TempDir t;
  CliResult r = run(train("lda", t.path() / "m"), t.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("tmatrix"), std::string::npos) << r.err;
  r = run(train("tmatrix", t.path() / "m"), t.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ubm"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(t.path() / "m" / "tmatrix.bin"));
  EXPECT_FALSE(fs::exists(t.path() / "m" / ".lock"));
}

TEST_F(Cli, UsageErrors) {
  TempDir t;
  EXPECT_EQ(run("", t.path()).code, 1);
  EXPECT_EQ(run(train("svm", t.path() / "m"), t.path()).code, 1);
  EXPECT_EQ(run("train ubm --config " + kConfig + " --models m", t.path()).code, 1);
  EXPECT_EQ(run("synth --config /nonexistent.ini --out x", t.path()).code, 1);
  EXPECT_EQ(run("--help", t.path()).code, 0);
}

TEST_F(Cli, LockedModelDirectoryIsRefused) {
  TempDir t;
  fs::create_directories(t.path() / "m");
  std::ofstream(t.path() / "m" / ".lock") << "";
  CliResult r = run(train("ubm", t.path() / "m"), t.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("locked"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(t.path() / "m" / "ubm.bin"));
}

TEST_F(Cli, FullRunIsDeterministic) {
  TempDir t;
  for (const std::string &s : stage_names()) {
    CliResult r = run(train(s, t.path() / "a"), t.path());
    ASSERT_EQ(r.code, 0) << s << ": " << r.err;
  }
  // UBM log-likelihood never decreases.
  std::ifstream log(t.path() / "a" / "ubm.log");
  std::string line;
  std::getline(log, line);
  double prev = -INFINITY, v;
  int it;
  while (log >> it >> v) {
    EXPECT_GE(v, prev - 1e-9 * std::abs(prev));
    prev = v;
  }
  for (const char *s : {"ubm", "tmatrix", "lda", "bottleneck"}) {
    CliResult r = run(train(s, t.path() / "b"), t.path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char *f : {"ubm.bin", "tmatrix.bin", "lda.bin", "bn_snr_db_j4.bin", "bn_t60_s_j2.bin", "ubm.log"})
    EXPECT_EQ(read_file(t.path() / "a" / f), read_file(t.path() / "b" / f)) << f;

  const std::string eval = "eval --config " + kConfig + " --manifest " + manifest() + " --models " +
                           (t.path() / "a").string() + " --out ";
  CliResult e1 = run(eval + (t.path() / "r1").string(), t.path());
  ASSERT_EQ(e1.code, 0) << e1.err;
  CliResult e2 = run(eval + (t.path() / "r2").string() + " --workers 2", t.path());
  ASSERT_EQ(e2.code, 0) << e2.err;
  EXPECT_EQ(e1.out, e2.out);
  for (const char *f : {"verification.csv", "metadata.csv", "augmentation.csv", "summary.json", "config.ini"})
    EXPECT_EQ(read_file(t.path() / "r1" / f), read_file(t.path() / "r2" / f)) << f;
  std::string csv = read_file(t.path() / "r1" / "verification.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 1);  // room types x j x seeds
  for (const char *type : {"complete_room", "music_rir"}) EXPECT_NE(e1.out.find(type), std::string::npos);

  CliResult missing = run("eval --config " + kConfig + " --manifest " + manifest() + " --models " +
                        (t.path() / "b").string() + " --out " + (t.path() / "r3").string(),
                    t.path());
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("plda"), std::string::npos) << missing.err;
}

TEST_F(Cli, LeakageExitsWithFour) {
  TempDir t;
  for (const std::string &s : stage_names()) ASSERT_EQ(run(train(s, t.path() / "m"), t.path()).code, 0);
  // Relabel one test record with a training room id.
  std::vector<ManifestRecord> recs = read_manifest(manifest());
  std::string train_room;
  for (const auto &r : recs)
    if (r.split == "train") train_room = r.room_id;
  std::string body;
  bool done = false;
  for (auto r : recs) {
    if (!done && r.split == "test") {
      r.room_id = train_room;
      done = true;
    }
    r.path = (corpus() / r.path).string();
    body += to_json_line(r) + "\n";
  }
  atomic_write(t.path() / "leaky.jsonl", body);
  CliResult r = run("eval --config " + kConfig + " --manifest " + (t.path() / "leaky.jsonl").string() + " --models " +
                  (t.path() / "m").string() + " --out " + (t.path() / "rep").string(),
              t.path());
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("leak"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(t.path() / "rep" / "verification.csv"));
}

}  // namespace
}  // namespace evec
