#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome run_cli(const std::string& args, const testutil::TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = quote(IMIL_CLI_PATH) + " " + args + " >" + quote(out.string()) + " 2>" +
                          quote(err.string());
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = testutil::slurp(out);
  o.err = testutil::slurp(err);
  return o;
}

const char* kSmallIni = R"([run]
name = cli
seed = 3
[train]
epochs = 3
batch_size = 5
learning_rate = 0.0001
image_size = 16
augmentation = imil
[imil]
epoch = 2
num_outliers = 5
feedback = oracle
[synthetic]
n_per_class = 10
test_n_per_class = 5
)";

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  testutil::TempDir dir;
  EXPECT_EQ(run_cli("", dir).code, 2);
  EXPECT_EQ(run_cli("run --bogus-flag", dir).code, 2);
}

TEST(Cli, HelpExitsZero) {
  testutil::TempDir dir;
  auto o = run_cli("--help", dir);
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("compare"), std::string::npos);
}

TEST(Cli, RunNeedsConfig) {
  testutil::TempDir dir;
  auto o = run_cli("run", dir);
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("--config"), std::string::npos);
  EXPECT_EQ(run_cli("run --config " + quote((dir / "missing.ini").string()), dir).code, 2);
}

TEST(Cli, InvalidConfigNamesField) {
  testutil::TempDir dir;
  testutil::spit(dir / "bad.ini", "[train]\nlearning_rate = -1\n");
  auto o = run_cli("run --config " + quote((dir / "bad.ini").string()), dir);
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("train.learning_rate"), std::string::npos);
}

TEST(Cli, SynthWritesManifests) {
  testutil::TempDir dir;
  auto o = run_cli("synth --out " + quote((dir / "data").string()) +
                       " --n-per-class 4 --test-n-per-class 2 --image-size 16",
                   dir);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("wrote 8 train and 4 test samples"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "data" / "train" / "manifest.csv"));
  EXPECT_TRUE(fs::exists(dir / "data" / "test" / "images" / "test_0003.png"));
}

TEST(Cli, RunReplayAndCompare) {
  testutil::TempDir dir;
  testutil::spit(dir / "exp.ini", kSmallIni);
  const auto run_dir = dir / "run";
  auto o = run_cli("run --config " + quote((dir / "exp.ini").string()) + " --out " +
                       quote(run_dir.string()),
                   dir);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("\"accuracy\""), std::string::npos);
  EXPECT_EQ(o.out, testutil::slurp(run_dir / "report.json"));

  auto r = run_cli("replay --run " + quote(run_dir.string()) + " --out " +
                       quote((dir / "replayed").string()),
                   dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testutil::slurp(run_dir / "report.json"),
            testutil::slurp(dir / "replayed" / "report.json"));
  EXPECT_EQ(testutil::slurp(run_dir / "train_store.bin"),
            testutil::slurp(dir / "replayed" / "train_store.bin"));

  auto c = run_cli("compare " + quote(run_dir.string()) + " " + quote((dir / "replayed").string()) +
                       " --csv " + quote((dir / "cmp.csv").string()),
                   dir);
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("(+0.000)"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "cmp.csv"));
}

TEST(Cli, SeedOverride) {
  testutil::TempDir dir;
  testutil::spit(dir / "exp.ini", kSmallIni);
  const auto cfg = quote((dir / "exp.ini").string());
  ASSERT_EQ(run_cli("run --config " + cfg + " --seed 11 --out " + quote((dir / "a").string()), dir).code, 0);
  ASSERT_EQ(run_cli("run --config " + cfg + " --seed 11 --out " + quote((dir / "b").string()), dir).code, 0);
  EXPECT_EQ(testutil::slurp(dir / "a" / "report.json"), testutil::slurp(dir / "b" / "report.json"));
  EXPECT_NE(testutil::slurp(dir / "a" / "config.resolved.json").find("11"), std::string::npos);
}

TEST(Cli, RuntimeErrorsExitThree) {
  testutil::TempDir dir;
  EXPECT_EQ(run_cli("replay --run " + quote((dir / "nope").string()) + " --out " +
                        quote((dir / "o").string()),
                    dir)
                .code,
            3);
  EXPECT_EQ(run_cli("compare " + quote((dir / "nope").string()), dir).code, 3);
  EXPECT_EQ(run_cli("run --resume --out " + quote((dir / "nope").string()), dir).code, 3);
}

TEST(Cli, InterruptPausesRun) {
  testutil::TempDir dir;
  testutil::spit(dir / "exp.ini", kSmallIni);
  const auto out_file = dir / "child.out";
  const auto run_dir = dir / "run";
  const std::string cfg = (dir / "exp.ini").string();
  const std::string out = run_dir.string();

  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    FILE* f = std::freopen(out_file.c_str(), "w", stdout);
    if (f == nullptr) _exit(99);
    std::freopen("/dev/null", "w", stderr);
    execl(IMIL_CLI_PATH, IMIL_CLI_PATH, "run", "--config", cfg.c_str(), "--out", out.c_str(),
          "--feedback", "interactive", "--port", "0", static_cast<char*>(nullptr));
    _exit(98);
  }

  bool announced = false;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
  while (std::chrono::steady_clock::now() < deadline) {
    if (fs::exists(out_file) && testutil::slurp(out_file).find("feedback server:") != std::string::npos) {
      announced = true;
      break;
    }
    int status = 0;
    if (waitpid(pid, &status, WNOHANG) == pid) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  if (!announced) kill(pid, SIGKILL);
  else kill(pid, SIGINT);
  int status = 0;
  waitpid(pid, &status, 0);
  ASSERT_TRUE(announced);
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 4);
  EXPECT_TRUE(fs::exists(run_dir / "resume"));
  EXPECT_FALSE(fs::exists(run_dir / "report.json"));
}
