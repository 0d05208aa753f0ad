#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "entroflow/cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "entroflow");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return entroflow::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("entroflow_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string law(const std::string& name, const std::string& json) {
    const auto p = dir_ / (name + ".json");
    std::ofstream(p) << json;
    return p.string();
  }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const char* kUniform = R"({"type":"uniform","a":-1.7320508075688772,"b":1.7320508075688772})";
const char* kAtoms = R"({"type":"atoms","atoms":[[-1,0.5],[1,0.5]]})";

}  // namespace

TEST_F(Cli, ClassicalSequenceWritesTable) {
  ASSERT_EQ(run({"classical-seq", "--law", law("u", kUniform), "--n", "6", "--out", out("r")}), 0);
  const std::string csv = slurp(out("r") + "/sequence.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,H,delta");
  std::istringstream lines(csv);
  std::string line;
  int rows = -1;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 6);
  const auto rep = nlohmann::json::parse(slurp(out("r") + "/report.json"));
  EXPECT_TRUE(rep["monotone"].get<bool>());
  EXPECT_DOUBLE_EQ(rep["tolerances"]["monotone"].get<double>(), 2e-3);
  EXPECT_NEAR(rep["values"][1].get<double>(), 1.395880, 1e-3);
  EXPECT_TRUE(fs::exists(out("r") + "/plot.svg"));
}

TEST_F(Cli, FreeSequenceFlagsMinusInfinity) {
  ASSERT_EQ(run({"free-seq", "--law", law("a", kAtoms), "--n", "4", "--out", out("r")}), 0);
  const std::string csv = slurp(out("r") + "/sequence.csv");
  EXPECT_NE(csv.find("\n1,-inf,\n"), std::string::npos);
  EXPECT_NE(csv.find("\n2,"), std::string::npos);
  const auto rep = nlohmann::json::parse(slurp(out("r") + "/report.json"));
  EXPECT_TRUE(rep["first_is_minus_inf"].get<bool>());
  EXPECT_EQ(rep["values"][0].get<std::string>(), "-inf");
}

TEST_F(Cli, LemmaSuite) {
  ASSERT_EQ(run({"lemma-proj", "--dim", "64", "--m", "5", "--trials", "2000", "--equality-cases", "200", "--seed", "7",
                 "--out", out("r")}),
            0);
  const auto rep = nlohmann::json::parse(slurp(out("r") + "/report.json"));
  EXPECT_GE(rep["min_slack"].get<double>(), -1e-10);
  EXPECT_EQ(rep["violations"].get<int>(), 0);
}

TEST_F(Cli, Determinism) {
  const std::string l = law("u", kUniform);
  for (const char* o : {"a", "b"})
    ASSERT_EQ(run({"free-seq", "--law", l, "--n", "3", "--out", out(o)}), 0);
  for (const char* f : {"sequence.csv", "report.json", "plot.svg"})
    EXPECT_EQ(slurp(out("a") + "/" + f), slurp(out("b") + "/" + f)) << f;
  for (const char* o : {"c", "d"})
    ASSERT_EQ(run({"lemma-proj", "--dim", "32", "--m", "4", "--trials", "500", "--equality-cases", "50", "--seed", "3",
                   "--out", out(o)}),
              0);
  EXPECT_EQ(slurp(out("c") + "/report.json"), slurp(out("d") + "/report.json"));
}

TEST_F(Cli, ExitCodes) {
  // Usage and configuration errors.
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"no-such-command"}), 2);
  EXPECT_EQ(run({"classical-seq", "--law", law("u", kUniform), "--count", "1000", "--out", out("r")}), 2);
  EXPECT_EQ(run({"classical-seq", "--law", law("bad", "{\"type\":\"cauchy\"}"), "--out", out("r")}), 2);
  EXPECT_EQ(run({"classical-seq", "--law", law("u", kUniform), "--n", "9", "--out", out("r")}), 2);
  EXPECT_EQ(run({"stam", "--law", law("a", kAtoms), "--summands", "2", "--out", out("r")}), 2);
  // A failed consistency check: the free uniform sequence flattens below 1e-3.
  EXPECT_EQ(run({"equality", "--law", law("u", kUniform), "--kind", "free", "--n", "4", "--tol", "1e-3", "--out",
                 out("r")}),
            1);
  // Non-convergence.
  EXPECT_EQ(run({"extremal", "--objective", "log-energy", "--steps", "2", "--out", out("r")}), 3);
}

TEST_F(Cli, ExtremalAndFlowOutputs) {
  ASSERT_EQ(run({"extremal", "--objective", "entropy", "--out", out("e")}), 0);
  const auto rep = nlohmann::json::parse(slurp(out("e") + "/report.json"));
  EXPECT_NEAR(rep["functional_value"].get<double>(), 1.4189385, 1e-3);
  EXPECT_LT(rep["l1_to_reference"].get<double>(), 1e-2);
  EXPECT_TRUE(fs::exists(out("e") + "/trace.csv"));
  EXPECT_TRUE(fs::exists(out("e") + "/density.csv"));

  ASSERT_EQ(run({"flow", "--law", law("a", kAtoms), "--kind", "free", "--t", "0.5", "--format", "csv,json", "--out",
                 out("f")}),
            0);
  EXPECT_TRUE(fs::exists(out("f") + "/density.csv"));
  EXPECT_FALSE(fs::exists(out("f") + "/plot.svg"));
  const auto f = nlohmann::json::parse(slurp(out("f") + "/report.json"));
  EXPECT_NEAR(f["variance"].get<double>(), 1.5, 1e-3);
}

TEST_F(Cli, PlottedSeriesAreInCsv) {
  ASSERT_EQ(run({"convexity", "--law", law("s", R"({"type":"semicircle","mean":0,"variance":1})"), "--summands", "2",
                 "--out", out("r")}),
            0);
  const std::string spot = slurp(out("r") + "/spot.csv");
  EXPECT_EQ(spot.substr(0, spot.find('\n')), "t,lhs,rhs,holds");
  const std::string svg = slurp(out("r") + "/plot.svg");
  // Three spot times, two series, three markers each.
  std::size_t circles = 0;
  for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  EXPECT_EQ(circles, 6u);
}
