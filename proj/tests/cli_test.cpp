#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(SPECDEC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("specdec_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bench"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("report --in x.json --out y --format xml"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, IoErrorsExitWithTwo) {
  EXPECT_EQ(run("bench --config /nonexistent/bench.cfg --out /tmp/x"), 2);
  EXPECT_EQ(run("train --corpus /nonexistent/corpus.txt --out /tmp/x"), 2);
}

TEST(Cli, BadConfigKeyIsUsageError) {
  const auto dir = scratch("badcfg");
  std::ofstream(dir / "bad.cfg") << "corpus_path = " SPECDEC_DATA_DIR "/captions.txt\nwhatever = 3\n";
  EXPECT_EQ(run("bench --config " + (dir / "bad.cfg").string() + " --out " + (dir / "out").string()), 1);
  fs::remove_all(dir);
}

TEST(Cli, TrainDecodeBenchReport) {
  const auto dir = scratch("flow");
  ASSERT_EQ(run("train --corpus " SPECDEC_DATA_DIR "/captions.txt --out " + (dir / "models").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "models" / "target.ngram"));
  EXPECT_TRUE(fs::exists(dir / "models" / "draft.ngram"));
  EXPECT_EQ(run("decode --models " + (dir / "models").string() + " --prompt 'a dog ' --max-tokens 30 --lambda 0.3"), 0);
  EXPECT_EQ(run("decode --models " + (dir / "models").string() + " --prompt 'QQQ'"), 1);  // unknown characters

  std::ofstream(dir / "bench.cfg") << "corpus_path = " SPECDEC_DATA_DIR "/captions.txt\n"
                                      "lambda_grid = 0.5\nprompt_count = 5\nprobe_count = 10\nmax_tokens = 16\n";
  ASSERT_EQ(run("bench --config " + (dir / "bench.cfg").string() + " --seed 3 --out " + (dir / "bench").string()), 0);
  for (const char* f : {"report.json", "report.csv", "kl_gamma.csv", "timing.csv"})
    EXPECT_TRUE(fs::exists(dir / "bench" / f)) << f;
  EXPECT_EQ(run("report --in " + (dir / "bench" / "report.json").string() + " --out " + (dir / "re").string() +
                " --format csv"),
            0);
  EXPECT_TRUE(fs::exists(dir / "re" / "report.csv"));
  fs::remove_all(dir);
}

}  // namespace
