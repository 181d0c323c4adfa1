#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "embryoforge/gan.hpp"
#include "embryoforge/gradcheck.hpp"
#include "embryoforge/manifest.hpp"
#include "embryoforge/pgm.hpp"

using namespace embryoforge;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "embryoforge_cli";

struct Result {
  int code = -1;
  std::string output;
};

// Runs the CLI with stdout and stderr captured.
Result run(const std::string& args) {
  fs::create_directories(kRoot);
  const fs::path log = kRoot / "last_output.txt";
  const std::string cmd = std::string(EMBRYOFORGE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string dir(const std::string& name) {
  const fs::path d = kRoot / name;
  fs::remove_all(d);
  return d.string();
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("preprocess --input " + dir("missing") + " --out " + dir("missing_out")).code, 1);
  EXPECT_EQ(run("train-gan --out " + dir("nodata") + " --iterations 1").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SynthThenPreprocessCountsAndReproduces) {
  const auto corpus = dir("corpus");
  ASSERT_EQ(run("synth --out " + corpus + " --size 48 --slices 16 --seed 2").code, 0);
  const auto a = dir("pre_a");
  const auto r = run("preprocess --input " + corpus + " --out " + a + " --patch 16 --seed 4");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_manifest(fs::path(a) / "manifest.jsonl").size(), 2u * 3u * 5u);

  // The resolved config alone reproduces the patch set.
  const auto b = dir("pre_b");
  ASSERT_EQ(run("--config " + a + "/resolved_config.toml preprocess --out " + b).code, 0);
  EXPECT_EQ(slurp(fs::path(a) / "manifest.jsonl"), slurp(fs::path(b) / "manifest.jsonl"));
  for (const auto& e : read_manifest(fs::path(a) / "manifest.jsonl"))
    EXPECT_EQ(slurp(fs::path(a) / e.path), slurp(fs::path(b) / e.path)) << e.path;
}

TEST(Cli, CorruptStackIsNamedAndOthersFinish) {
  const auto corpus = dir("corrupt");
  ASSERT_EQ(run("synth --out " + corpus + " --size 48 --slices 16 --seed 3").code, 0);
  const auto entries = read_manifest(fs::path(corpus) / "manifest.jsonl");
  std::ofstream(fs::path(corpus) / entries[2].path, std::ios::binary) << "P5\n48 48\n";
  const auto out = dir("corrupt_out");
  const auto r = run("preprocess --input " + corpus + " --out " + out + " --patch 16");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find(entries[2].path), std::string::npos) << r.output;
  EXPECT_EQ(read_manifest(fs::path(out) / "manifest.jsonl").size(), 5u * 5u);
}

TEST(Cli, GradcheckListsEveryOpOnce) {
  const auto r = run("gradcheck --cases 2");
  EXPECT_EQ(r.code, 0) << r.output;
  for (const auto& op : gradcheck_ops()) {
    const auto first = r.output.find("\n" + op + " ");
    ASSERT_NE(first, std::string::npos) << op;
    EXPECT_EQ(r.output.find("\n" + op + " ", first + 1), std::string::npos) << op;
  }
}

TEST(Cli, ToyTrainingTrendAndGenerateDeterminism) {
  const auto out = dir("toy");
  const auto r = run("train-gan --toy --out " + out + " --iterations 400 --seed 1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto trace = LossTrace::from_csv(slurp(fs::path(out) / "trace.csv"));
  ASSERT_EQ(trace.size(), 400u);
  EXPECT_LT(trace.rows().back().critic_obj, trace.rows().front().critic_obj);

  const auto g1 = dir("gen1"), g2 = dir("gen2");
  ASSERT_EQ(run("generate --checkpoint " + out + "/generator.ckpt --out " + g1 + " --n 16 --seed 7").code, 0);
  ASSERT_EQ(run("generate --checkpoint " + out + "/generator.ckpt --out " + g2 + " --n 16 --seed 7").code, 0);
  EXPECT_EQ(slurp(fs::path(g1) / "samples.csv"), slurp(fs::path(g2) / "samples.csv"));
}

TEST(Cli, ResumeMatchesUninterruptedRun) {
  const auto full = dir("resume_full"), split = dir("resume_split");
  const std::string common = " --toy --seed 3 --dtype f64 --checkpoint-every 0";
  ASSERT_EQ(run("train-gan --out " + full + " --iterations 40" + common).code, 0);
  ASSERT_EQ(run("train-gan --out " + split + " --iterations 25" + common).code, 0);
  ASSERT_EQ(run("train-gan --out " + split + " --iterations 40 --resume" + common).code, 0);
  const auto a = LossTrace::from_csv(slurp(fs::path(full) / "trace.csv"));
  const auto b = LossTrace::from_csv(slurp(fs::path(split) / "trace.csv"));
  EXPECT_TRUE(a.same_values(b));
}

TEST(Cli, ImageGanWritesSamplesAndGenerateIsDeterministic) {
  const auto corpus = dir("img_corpus"), patches = dir("img_patches");
  ASSERT_EQ(run("synth --out " + corpus + " --size 40 --slices 14 --seed 5").code, 0);
  ASSERT_EQ(run("preprocess --input " + corpus + " --out " + patches + " --patch 16 --per-slice 2").code, 0);
  const auto out = dir("img_gan");
  const auto r = run("train-gan --data " + patches + " --out " + out +
                     " --iterations 4 --batch 8 --n-critic 2 --base-filters 4 --hidden 16 --latent 8"
                     " --sample-every 2 --sample-grid 3 --checkpoint-every 2");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(fs::path(out) / "samples" / "generated_iter_000002.pgm"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "samples" / "generated_iter_000004.pgm"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "resolved_config.toml"));

  const auto g1 = dir("img_gen1"), g2 = dir("img_gen2");
  ASSERT_EQ(run("generate --checkpoint " + out + "/generator.ckpt --out " + g1 + " --n 64 --seed 7").code, 0);
  ASSERT_EQ(run("generate --checkpoint " + out + "/generator.ckpt --out " + g2 + " --n 64 --seed 7").code, 0);
  EXPECT_EQ(slurp(fs::path(g1) / "generated_montage.pgm"), slurp(fs::path(g2) / "generated_montage.pgm"));
  EXPECT_TRUE(fs::exists(fs::path(g1) / "sample_0063.pgm"));
}

TEST(Cli, NumericalFailureExitsTwoWithLastGoodCheckpoint) {
  const auto out = dir("diverge");
  const auto r = run("train-gan --toy --out " + out + " --iterations 20 --lr 1e300");
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("last good checkpoint: "), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(out) / "last_good_generator.ckpt"));
}

TEST(Cli, ClassifierAndOverfitDemoProduceTraces) {
  const auto labeled = dir("labeled"), test = dir("labeled_test");
  ASSERT_EQ(run("synth --out " + labeled + " --labeled 12 --patch 16 --seed 1").code, 0);
  ASSERT_EQ(run("synth --out " + test + " --labeled 6 --patch 16 --seed 2").code, 0);
  const auto out = dir("cls");
  const auto r = run("train-classifier --data " + labeled + " --test-data " + test + " --out " + out +
                     " --epochs 2 --batch 4 --base-filters 4 --hidden 8");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(fs::path(out) / "classifier.ckpt"));
  const auto epochs = slurp(fs::path(out) / "epochs.csv");
  EXPECT_EQ(std::count(epochs.begin(), epochs.end(), '\n'), 3);

  const auto demo = dir("overfit");
  const auto d = run("overfit-demo --out " + demo +
                     " --seeds 2 --train-size 8 --test-size 4 --patch 16 --epochs 1 --batch 4 --base-filters 4 --hidden 8");
  ASSERT_EQ(d.code, 0) << d.output;
  const auto table = slurp(fs::path(demo) / "overfit.csv");
  EXPECT_NE(table.find("width,seed,train_acc,test_acc"), std::string::npos);
}
