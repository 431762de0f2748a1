#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "latentbridge/cli/app.hpp"

using namespace latentbridge;
using lbtest::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "latentbridge");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

// Runs the installed binary; returns its exit status and captured stderr.
std::pair<int, std::string> run_binary(const std::string& args, const TempDir& dir) {
  const std::string err_file = dir.file("stderr.txt");
  const std::string cmd = std::string("\"") + LATENTBRIDGE_CLI + "\" " + args + " >/dev/null 2>\"" + err_file + "\"";
  const int status = std::system(cmd.c_str());
  std::ifstream in(err_file);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

// A tiny trained workspace shared by the tests below.
class Workspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    std::ofstream(dir_->file("small.conf")) << lbtest::small_world_config().canonical() << "train.batch_size = 4\n";
    ASSERT_EQ(run({"make-toy-data", "--config", conf(), "--out", path("data"), "-n", "60", "--seed", "4"}).code, 0);
    ASSERT_EQ(run({"build-bank", "--config", conf(), "--input", path("data"), "--out", path("bank.ebnk")}).code, 0);
    const auto t = run({"train", "--config", conf(), "--data", path("data"), "--out", path("model"), "--iterations", "4"});
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string path(const std::string& name) { return dir_->file(name); }
  static std::string conf() { return path("small.conf"); }
  static std::string checkpoint() { return path("model/checkpoint.cvck"); }

  static TempDir* dir_;
};

TempDir* Workspace::dir_ = nullptr;

}  // namespace

TEST(Cli, VersionPrintsFormats) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("latentbridge 0.1.0"), std::string::npos);
  EXPECT_NE(r.out.find("checkpoint format 1"), std::string::npos);
  EXPECT_NE(r.out.find("bank format 1"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  auto r = run({});
  EXPECT_EQ(r.code, 2);
  r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  r = run({"generate", "--prompt", "toy:a0=1", "-n", "2", "--seed", "1", "--out", "/tmp/x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--checkpoint"), std::string::npos) << r.err;
  r = run({"train", "--data", "d", "--out", "o"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"generate", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--prior-k"), std::string::npos);
}

TEST(Cli, BinaryExitCodes) {
  TempDir dir("bin");
  EXPECT_EQ(run_binary("--version", dir).first, 0);
  EXPECT_EQ(run_binary("generate --prompt x -n 1 --seed 1 --out o", dir).first, 2);
  EXPECT_EQ(run_binary("no-such-command", dir).first, 2);
  std::ofstream(dir.file("bad.cvck")) << "not a checkpoint";
  const auto [code, err] =
      run_binary("generate --mode pt --prompt toy:a0=1 -n 1 --seed 1 --out \"" + dir.file("o") + "\" --checkpoint \"" +
                     dir.file("bad.cvck") + "\"",
                 dir);
  EXPECT_EQ(code, 1);
  EXPECT_EQ(err.rfind("error: [checkpoint]", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
}

TEST_F(Workspace, ArtifactsExist) {
  EXPECT_TRUE(std::filesystem::exists(path("data/toy_0059.png")));
  EXPECT_TRUE(std::filesystem::exists(path("data/factors.csv")));
  EXPECT_EQ(load_bank(path("bank.ebnk")).size(), 60);
  EXPECT_TRUE(std::filesystem::exists(checkpoint()));
  EXPECT_TRUE(std::filesystem::exists(path("model/loss.csv")));
  EXPECT_TRUE(std::filesystem::exists(path("model/train_summary.txt")));
}

TEST_F(Workspace, GenerateIsDeterministicAndMatchesTheLibrary) {
  for (const std::string mode : {"full", "pt"}) {
    const auto a = path("gen_a_" + mode), b = path("gen_b_" + mode);
    for (const auto& out : {a, b}) {
      const auto r = run({"generate", "--mode", mode, "--prompt", "toy:a1=1", "-n", "3", "--seed", "9", "--out", out,
                          "--checkpoint", checkpoint(), "--bank", path("bank.ebnk"), "--prior-k", "10", "--prior-m",
                          "3"});
      ASSERT_EQ(r.code, 0) << r.err;
    }
    commands::GenerateArgs g;
    g.checkpoint = checkpoint();
    g.bank = path("bank.ebnk");
    g.overrides.set("prior.k", "10");
    g.overrides.set("prior.m", "3");
    g.mode = parse_generation_mode(mode);
    g.prompt = "toy:a1=1";
    g.n = 3;
    g.seed = 9;
    g.out = path("gen_lib_" + mode);
    commands::generate_command(g);
    for (int i = 0; i < 3; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "/img_%04d.png", i);
      const auto bytes = lbtest::read_bytes(a + name);
      EXPECT_FALSE(bytes.empty());
      EXPECT_EQ(bytes, lbtest::read_bytes(b + name)) << mode << name;
      EXPECT_EQ(bytes, lbtest::read_bytes(g.out + name)) << mode << name;
    }
  }
}

TEST_F(Workspace, GuidedGenerationAndGrid) {
  const auto r = run({"generate", "--mode", "img", "--prompt", "toy:a1=1", "--guidance", path("data/toy_0000.png"), "-n",
                      "4", "--seed", "2", "--out", path("gen_img"), "--checkpoint", checkpoint(), "--bank",
                      path("bank.ebnk"), "--prior-k", "10", "--prior-m", "3", "--grid"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(path("gen_img/img_0003.png")));
  EXPECT_TRUE(std::filesystem::exists(path("gen_img/grid.png")));
}

TEST_F(Workspace, RuntimeErrorsExitOne) {
  auto r = run({"generate", "--mode", "full", "--prompt", "toy:a1=1", "-n", "2", "--seed", "1", "--out",
                path("gen_err"), "--checkpoint", checkpoint()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bank"), std::string::npos) << r.err;
  r = run({"generate", "--mode", "img", "--prompt", "toy:a1=1", "-n", "2", "--seed", "1", "--out", path("gen_err"),
           "--checkpoint", checkpoint()});
  EXPECT_EQ(r.code, 1);
  r = run({"generate", "--mode", "full", "--prompt", "toy:a1=1", "-n", "2", "--seed", "1", "--out", path("gen_err"),
           "--checkpoint", checkpoint(), "--bank", path("bank.ebnk"), "--prior-k", "500"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("[prior]"), std::string::npos) << r.err;
  r = run({"build-bank", "--config", conf(), "--input", path("does_not_exist"), "--out", path("x.ebnk")});
  EXPECT_EQ(r.code, 1);
}

TEST_F(Workspace, EvaluateWritesReports) {
  std::ofstream(path("caps.txt")) << "# two prompts\ntoy:a0=1\ntoy:a4=-1\n";
  const auto r = run({"evaluate", "--checkpoint", checkpoint(), "--bank", path("bank.ebnk"), "--captions",
                      path("caps.txt"), "--out", path("eval"), "--modes", "full,pt", "--images-per-caption", "3",
                      "--set", "prior.k=10", "--set", "prior.m=3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Ours (Pt)"), std::string::npos) << r.out;
  std::ifstream acc(path("eval/accuracy.csv"));
  std::string header;
  std::getline(acc, header);
  EXPECT_EQ(header, "model,k,accuracy");
  int lines = 0;
  for (std::string l; std::getline(acc, l);) ++lines;
  EXPECT_EQ(lines, 8);
  EXPECT_TRUE(std::filesystem::exists(path("eval/diversity.csv")));
  EXPECT_TRUE(std::filesystem::exists(path("eval/report.txt")));
}

TEST_F(Workspace, NnReportListsBankNeighbors) {
  const auto g = run({"generate", "--mode", "pt", "--prompt", "toy:a2=1", "-n", "2", "--seed", "3", "--out",
                      path("gen_nn"), "--checkpoint", checkpoint()});
  ASSERT_EQ(g.code, 0) << g.err;
  const auto r = run({"nn-report", "--config", conf(), "--bank", path("bank.ebnk"), "--images", path("gen_nn"), "--out",
                      path("nn"), "--top", "3", "--grid", "--bank-images", path("data")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("nn/nn_report.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "image,rank,id,similarity");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NE(line.find(",toy_"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 6);
  EXPECT_TRUE(std::filesystem::exists(path("nn/nn_grid.png")));
}
