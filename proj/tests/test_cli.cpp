#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "agentrec/error.hpp"
#include "agentrec/corpus.hpp"
#include "agentrec/scoring.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(AGENTREC_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("agentrec_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const auto fx = fixtures::topic_fixture(11, 40, 5);
    agentrec::write_prompts_jsonl(fx.corpus, dir_ / "corpus.jsonl");
    agentrec::write_prompts_jsonl(fx.heldout, dir_ / "heldout.jsonl");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string common() const { return "--provider-dim 256 --provider-seed 3 --cache " + path("cache.bin"); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("recommend --no-such-flag").status, 2);
  EXPECT_EQ(run("recommend --prompt hi --cache " + path("missing.bin")).status, 1);
  EXPECT_EQ(run("split --in " + path("missing.jsonl") + " --out-dir " + path("sp")).status, 1);
}

TEST_F(Cli, BuildAndRecommend) {
  const auto built = run("build-cache --dataset " + path("corpus.jsonl") + " --out " + path("cache.bin") +
                         " --provider-dim 256 --provider-seed 3");
  ASSERT_EQ(built.status, 0);
  const auto summary = json::parse(built.out);
  EXPECT_EQ(summary["corpora"]["cooking"], 40);
  EXPECT_EQ(summary["bytes"].get<std::uintmax_t>(), fs::file_size(path("cache.bin")));

  const auto rec = run("recommend " + common() + " --k 2 --prompt 'cookword1 cookword2 cookword3'");
  ASSERT_EQ(rec.status, 0);
  const auto j = json::parse(rec.out);
  EXPECT_EQ(j["k"], 2);
  ASSERT_EQ(j["ranked"].size(), 2U);
  EXPECT_EQ(j["ranked"][0]["agent"], "cooking");

  // cache dim must agree with the provider
  EXPECT_EQ(run("recommend --provider-dim 64 --cache " + path("cache.bin") + " --prompt x").status, 1);
}

TEST_F(Cli, SplitIsByteReproducible) {
  const auto ds = agentrec::read_prompts_jsonl(path("corpus.jsonl"));
  for (const char* sub : {"a", "b"}) {
    const auto r = run("split --in " + path("corpus.jsonl") + " --out-dir " + path(sub) +
                       " --seed 7 --train-frac 0.75 --finetune-frac 0.5");
    ASSERT_EQ(r.status, 0);
  }
  for (const char* f : {"train.jsonl", "test.jsonl", "finetune.jsonl", "reward.jsonl"}) {
    const auto a = slurp(dir_ / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir_ / "b" / f)) << f;
  }
  EXPECT_EQ(agentrec::read_prompts_jsonl(dir_ / "a" / "train.jsonl").size(), 120U);
  EXPECT_EQ(agentrec::read_prompts_jsonl(dir_ / "a" / "test.jsonl").size(), 40U);
}

TEST_F(Cli, EvaluateSweepMatchesSingleRuns) {
  ASSERT_EQ(run("build-cache --dataset " + path("corpus.jsonl") + " --out " + path("cache.bin") +
                " --provider-dim 256 --provider-seed 3")
                .status,
            0);
  const auto sweep = run("evaluate " + common() + " --dataset " + path("heldout.jsonl") +
                         " --configs max,arith,geo,pmeans:200 --ks 1,3");
  ASSERT_EQ(sweep.status, 0);
  const auto rows = json::parse(sweep.out);
  ASSERT_EQ(rows.size(), 4U);
  const std::array<const char*, 4> names = {"max", "arith", "geo", "pmeans:200"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto single = run("evaluate " + common() + " --dataset " + path("heldout.jsonl") + " --configs " +
                            names[i] + " --ks 1,3");
    ASSERT_EQ(single.status, 0);
    EXPECT_EQ(rows[i]["report"], json::parse(single.out)[0]["report"]) << names[i];
    EXPECT_EQ(rows[i]["report"]["n_evaluated"], 20);
  }
}

TEST_F(Cli, DedupAndProject) {
  const auto d = run("dedup --in " + path("corpus.jsonl") + " --out " + path("dd.jsonl") + " --report " +
                     path("rep.jsonl"));
  ASSERT_EQ(d.status, 0);
  EXPECT_LE(agentrec::read_prompts_jsonl(path("dd.jsonl")).size(), 160U);
  const auto p = run("project --dataset " + path("corpus.jsonl") + " --provider-dim 64 --dims 2 --out " +
                     path("plot.csv"));
  ASSERT_EQ(p.status, 0);
  EXPECT_EQ(json::parse(p.out)["rows"], 160);
  std::ifstream csv(path("plot.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "agent,x,y");
}
