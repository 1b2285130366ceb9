#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "compnet_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(COMPNET_CLI) + " " + args + " >" +
                          (work_dir() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write(const std::string& name, const std::string& text) {
  const auto p = work_dir() / name;
  std::ofstream(p) << text;
  return p;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("verify --suite nonsense"), 2);
  EXPECT_EQ(run("synth --params /nonexistent.json --out " + (work_dir() / "x").string()), 2);
  EXPECT_EQ(run("train --regime fast --target cube --seed 0 --out " +
                (work_dir() / "x").string()),
            2);
  const auto bad = write("bad_bench.json", R"({"regimes":["default"],"colour":"red"})");
  EXPECT_EQ(run("bench --config " + bad.string() + " --out " + (work_dir() / "x").string()), 2);
}

TEST(Cli, VerifySuites) {
  EXPECT_EQ(run("verify --suite ratio"), 0);
  EXPECT_EQ(run("verify --suite oracle"), 0);
  // The truncated series residual exceeds its 1e-6 bound on a few draws.
  EXPECT_EQ(run("verify --suite series"), 1);
}

TEST(Cli, SynthThenAnalyze) {
  const auto params = write("half.json", R"({"peaks":[0.5,0.5,0.5,0.5,0.5],"mode":"subtract"})");
  const auto out = work_dir() / "synth";
  ASSERT_EQ(run("synth --params " + params.string() + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "model.json"));
  EXPECT_TRUE(fs::exists(out / "output_pwl.csv"));

  const auto an = work_dir() / "analysis";
  ASSERT_EQ(run("analyze --model " + (out / "model.json").string() + " --out " + an.string()), 0);
  const auto report = nlohmann::json::parse(slurp(an / "analysis.json"));
  EXPECT_EQ(report["segments"], 32);
  EXPECT_EQ(report["structure_depth"], 5);
}

TEST(Cli, OracleWritesBreakpoints) {
  const auto params = write("deep.json", R"({"peaks":[0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5],"mode":"add"})");
  const auto csv = work_dir() / "oracle.csv";
  ASSERT_EQ(run("oracle --params " + params.string() + " --out " + csv.string()), 0);
  std::ifstream in(csv);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 1u + 257u);
}

TEST(Cli, TrainIsReproducible) {
  const auto cfg = write("train.json", R"({"epochs_stage1":20,"epochs_stage2":20})");
  const auto a = work_dir() / "train_a";
  const auto b = work_dir() / "train_b";
  const std::string args = "train --regime manifold_enforced --target cube --seed 3 --config " +
                           cfg.string() + " --out ";
  ASSERT_EQ(run(args + a.string()), 0);
  ASSERT_EQ(run(args + b.string()), 0);
  EXPECT_EQ(slurp(a / "result.json"), slurp(b / "result.json"));
  EXPECT_EQ(slurp(a / "model.json"), slurp(b / "model.json"));
}

TEST(Cli, BenchWritesOutputs) {
  const auto cfg = write("bench.json", R"({"regimes":["default","no_optimization"],
      "targets":["square"],"seeds":2,"train":{"epochs_stage1":5,"epochs_stage2":5}})");
  const auto out = work_dir() / "bench";
  ASSERT_EQ(run("bench --jobs 2 --config " + cfg.string() + " --out " + out.string()), 0);
  for (const char* f : {"report.json", "runs.jsonl", "table.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["rows"].size(), 2u);
  EXPECT_EQ(report["meta"]["runs"], 4);
}

}  // namespace
