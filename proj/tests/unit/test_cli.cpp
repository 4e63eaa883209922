#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "lpwalk/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* exe = std::getenv("LPWALK_CLI");
    if (!exe) GTEST_SKIP() << "LPWALK_CLI not set";
    exe_ = exe;
    dir_ = fs::temp_directory_path() / ("lpwalk_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  Outcome call(const std::string& args) const {
    const auto log = dir_ / "stdout.txt";
    const std::string cmd = "'" + exe_ + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = lpwalk::detail::read_file(log);
    return o;
  }

  std::string exe_;
  fs::path dir_;
};

const char* kSmall = R"({"seed": 4, "experiments": [
  {"name": "ll", "kind": "local_limit", "replicates": 100, "horizons": [50, 100],
   "walk": {"start": [0, 0], "base": {"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.5"}}},
  {"name": "g", "kind": "g_ratio", "replicates": 500, "horizons": [20, 40],
   "walk": {"start": [0, 0], "base": {"kind": "SimpleNeighbor", "dim": 2}},
   "membrane": [{"point": [0, 0], "law": {"kind": "SimpleNeighbor", "dim": 2}}]}]})";

}  // namespace

TEST_F(Cli, EmptyConfigSucceedsAndWritesManifest) {
  const auto cfg = write("empty.json", R"({"experiments": []})");
  const auto out = dir_ / "res";
  const auto r = call("run '" + cfg.string() + "' --out '" + out.string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_TRUE(lpwalk::verify_manifest(out).empty());
}

TEST_F(Cli, UnwritableOutputIsARuntimeError) {
  const auto cfg = write("empty.json", R"({"experiments": []})");
  const auto blocker = write("blocker", "x");
  const auto r = call("run '" + cfg.string() + "' --out '" + (blocker / "sub").string() + "'");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("cannot be created"), std::string::npos) << r.out;
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  const auto cfg = write("bad.json", R"({"experiments": [], "extra": 1})");
  const auto r = call("run '" + cfg.string() + "' --out '" + (dir_ / "res").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("$.extra: unknown field"), std::string::npos) << r.out;
  EXPECT_EQ(call("run '" + (dir_ / "missing.json").string() + "'").code, 2);
  EXPECT_EQ(call("frobnicate").code, 2);
  EXPECT_EQ(call("run").code, 2);
}

TEST_F(Cli, RunIsIndependentOfWorkerCount) {
  const auto cfg = write("small.json", kSmall);
  const auto a = call("run '" + cfg.string() + "' --workers 1 --out '" + (dir_ / "a").string() + "'");
  const auto b = call("run '" + cfg.string() + "' --workers 3 --out '" + (dir_ / "b").string() + "'");
  ASSERT_EQ(a.code, b.code) << a.out << b.out;
  EXPECT_LE(a.code, 1) << a.out;
  for (const char* f : {"ll.csv", "g.csv", "summary.json", "report.txt"}) {
    EXPECT_EQ(lpwalk::detail::read_file(dir_ / "a" / f), lpwalk::detail::read_file(dir_ / "b" / f)) << f;
  }
  EXPECT_TRUE(lpwalk::verify_manifest(dir_ / "a").empty());
  const auto csv = lpwalk::detail::read_file(dir_ / "a" / "ll.csv");
  EXPECT_EQ(csv.rfind("experiment,statistic,horizon,value,lower,upper\n", 0), 0u);
  const auto reseeded = call("run '" + cfg.string() + "' --seed 99 --out '" + (dir_ / "c").string() + "'");
  EXPECT_NE(lpwalk::detail::read_file(dir_ / "a" / "g.csv"), lpwalk::detail::read_file(dir_ / "c" / "g.csv"));
  (void)reseeded;
}

TEST_F(Cli, OracleWritesCsv) {
  const auto r = call(R"(oracle '{"kind": "SimpleNeighbor", "dim": 2}' --nmax 4)");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("k,U_k,U_lower,U_upper,R_k,R_lower,R_upper\n"), std::string::npos);
  EXPECT_NE(r.out.find("2,0.25,0.25,0.25,0.75,0.75,0.75\n"), std::string::npos) << r.out;
  const auto law = write("lazy.json", R"({"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.5"})");
  const auto csv = dir_ / "lazy.csv";
  const auto g = call("oracle '" + law.string() + "' --nmax 20 --out '" + csv.string() + "'");
  ASSERT_EQ(g.code, 0) << g.out;
  EXPECT_NE(lpwalk::detail::read_file(csv).find("\n1,0.5,"), std::string::npos);
  EXPECT_EQ(call(R"(oracle '{"kind": "LogLogRadial", "dim": 2, "a": 1}' --nmax 4)").code, 2);
}

TEST_F(Cli, CheckReportsConditionB) {
  const auto cfg = write("small.json", kSmall);
  const auto r = call("check '" + cfg.string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("2 experiment(s) valid"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("accessibility ok"), std::string::npos) << r.out;
}
