/* Copyright 2026 The ZeroPP Sim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "zeropp/cli.hpp"

namespace zeropp {
namespace {

namespace fs = std::filesystem;

const std::string kConfigs = std::string(ZEROPP_SOURCE_DIR) + "/configs/";

struct Out {
  int code;
  std::string out;
  std::string err;
};

Out Invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("zeropp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string Path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(CliTest, NoArgumentsIsUsageError) {
  const Out r = Invoke({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(Invoke({"simulate", "--config", kConfigs + "uniform_small.json", "--bogus"}).code, 2);
  EXPECT_EQ(Invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(Invoke({"simulate", "--config", kConfigs + "uniform_small.json", "--variant", "pipedream"}).code, 2);
  EXPECT_EQ(Invoke({"simulate", "--config", Path("missing.json")}).code, 2);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(Invoke({"--help"}).code, 0); }

TEST_F(CliTest, AnalyzeWritesFiveRows) {
  const Out r = Invoke({"analyze", "--config", kConfigs + "14p6b.json", "--methods", "all", "--csv", Path("t2.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = Slurp(Path("t2.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  for (const char* m : {"GPIPE,", "ONE_F_ONE_B,", "INTERLEAVED_1F1B,", "ZEROPP,", "ZEROPP_RECOMP,"})
    EXPECT_NE(csv.find(m), std::string::npos) << m;
  const Out sub = Invoke({"analyze", "--config", kConfigs + "14p6b.json", "--methods", "tp3d,bfpp"});
  EXPECT_EQ(sub.code, 0);
  EXPECT_EQ(std::count(sub.out.begin(), sub.out.end(), '\n'), 3);
  EXPECT_EQ(Invoke({"analyze", "--config", kConfigs + "14p6b.json", "--methods", "zb-v"}).code, 2);
}

TEST_F(CliTest, PlanThenValidate) {
  const std::string cfg = kConfigs + "uniform_small.json";
  ASSERT_EQ(Invoke({"plan", "--config", cfg, "--out", Path("s.txt"), "--json", Path("s.json")}).code, 0);
  const Out ok = Invoke({"validate", "--schedule", Path("s.txt")});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_NE(ok.out.find("valid"), std::string::npos);
  EXPECT_FALSE(Slurp(Path("s.json")).empty());

  // Swap the first two compute lines of device 1: B(1,..) before F(1,..).
  std::istringstream in(Slurp(Path("s.txt")));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto is_dev1_compute = [](const std::string& l) {
    return l.rfind("1 F ", 0) == 0 || l.rfind("1 B ", 0) == 0 || l.rfind("1 W ", 0) == 0;
  };
  auto first = std::find_if(lines.begin(), lines.end(), is_dev1_compute);
  auto b = std::find_if(first, lines.end(), [](const std::string& l) { return l.rfind("1 B ", 0) == 0; });
  ASSERT_NE(b, lines.end());
  std::iter_swap(first, b);
  std::ofstream(Path("bad.txt")) << [&] {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
  }();
  const Out bad = Invoke({"validate", "--schedule", Path("bad.txt")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("DEP_ORDER"), std::string::npos) << bad.out;
}

TEST_F(CliTest, ValidateNeedsInput) {
  EXPECT_EQ(Invoke({"validate"}).code, 2);
  std::ofstream(Path("junk.txt")) << "0 F zero 0 0 -\n";
  EXPECT_EQ(Invoke({"validate", "--schedule", Path("junk.txt")}).code, 2);
}

TEST_F(CliTest, ValidateHeaderlessScheduleWithConfig) {
  const std::string cfg = kConfigs + "uniform_small.json";
  ASSERT_EQ(Invoke({"plan", "--config", cfg, "--out", Path("s.txt")}).code, 0);
  std::istringstream in(Slurp(Path("s.txt")));
  std::string body;
  for (std::string l; std::getline(in, l);)
    if (l.rfind("# config", 0) != 0) body += l + "\n";
  std::ofstream(Path("h.txt")) << body;
  EXPECT_EQ(Invoke({"validate", "--schedule", Path("h.txt")}).code, 2);
  EXPECT_EQ(Invoke({"validate", "--schedule", Path("h.txt"), "--config", cfg}).code, 0);
}

TEST_F(CliTest, FuzzSeedFromEnvironment) {
  ::setenv("ZEROPP_SEED", "11", 1);
  const Out env = Invoke({"validate", "--fuzz", "10"});
  ::unsetenv("ZEROPP_SEED");
  EXPECT_EQ(env.code, 0);
  EXPECT_NE(env.out.find("seed=11 trials=10 valid=10"), std::string::npos) << env.out;
  const Out flag = Invoke({"validate", "--fuzz", "10", "--seed", "11"});
  EXPECT_EQ(flag.out, env.out);
}

TEST_F(CliTest, SimulateCsvAndTrace) {
  const Out r = Invoke({"simulate", "--config", kConfigs + "14p6b.json", "--variant", "zeropp", "--csv", Path("sim.csv"),
                     "--trace", Path("trace.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = Slurp(Path("sim.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "device,busy,idle,makespan,peak_mem_bytes,intra_bytes,inter_bytes");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NO_THROW((void)nlohmann::json::parse(Slurp(Path("trace.json"))));
}

TEST_F(CliTest, SimulateBaselineConstraint) {
  EXPECT_EQ(Invoke({"simulate", "--config", kConfigs + "14p6b.json", "--variant", "gpipe"}).code, 2);
  EXPECT_EQ(Invoke({"simulate", "--config", kConfigs + "14p6b.json", "--variant", "interleaved_1f1b"}).code, 0);
}

TEST_F(CliTest, SearchEmitsRankedTable) {
  const Out r = Invoke({"search", "--config", kConfigs + "uniform_small.json", "--csv", Path("plan.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = Slurp(Path("plan.csv"));
  // U in {1,2,4}, V in {1,2,4}, 2 recompute settings, 2 modes.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 3 * 2 * 2);
  EXPECT_NE(r.out.find("winner:"), std::string::npos);
  const Out tight = Invoke({"search", "--config", kConfigs + "uniform_small.json", "--mem-cap-gb", "0"});
  EXPECT_EQ(tight.code, 0);
  EXPECT_NE(tight.out.find("infeasible"), std::string::npos);
}

TEST_F(CliTest, RenderAsciiAndSvg) {
  const std::string cfg = kConfigs + "uniform_small.json";
  const Out a = Invoke({"render", "--config", cfg});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out.rfind("d0", 0), 0u);
  const Out s = Invoke({"render", "--config", cfg, "--format", "svg", "--out", Path("t.svg")});
  EXPECT_EQ(s.code, 0);
  EXPECT_EQ(Slurp(Path("t.svg")).rfind("<svg", 0), 0u);
  EXPECT_EQ(Invoke({"render", "--config", cfg, "--format", "png"}).code, 2);
}

TEST_F(CliTest, Figure1) {
  const Out r = Invoke({"figure1", "--config", kConfigs + "gpt6p2b.json", "--batches", "8,16,32"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("global_batch,tp_bytes,zero3_bytes,ratio"), std::string::npos);
  EXPECT_NE(r.out.find("crossover global batch (2sG > 9h): 19"), std::string::npos) << r.out;
  EXPECT_EQ(Invoke({"figure1", "--config", kConfigs + "gpt6p2b.json", "--batches", "8,x"}).code, 2);
}

TEST_F(CliTest, OutputsAreReproducible) {
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{"simulate", "--config", kConfigs + "14p6b.json"},
        std::vector<std::string>{"plan", "--config", kConfigs + "uniform_small.json"},
        std::vector<std::string>{"render", "--config", kConfigs + "14p6b.json", "--format", "svg"},
        std::vector<std::string>{"analyze", "--config", kConfigs + "14p6b.json"}}) {
    const Out a = Invoke(args), b = Invoke(args);
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
  }
}

}  // namespace
}  // namespace zeropp
