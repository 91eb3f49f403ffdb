#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "usp_cli.hpp"

namespace {

namespace fs = std::filesystem;
using usp::cli::json;

struct Outcome
{
  int code = 0;
  std::string out;
  std::string err;
};

Outcome
invoke(const std::vector<std::string>& args)
{
  std::ostringstream out;
  std::ostringstream err;
  const int code = usp::cli::run(args, out, err);
  return { code, out.str(), err.str() };
}

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() /
           ("usp_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text)
  {
    const auto path = (dir_ / name).string();
    std::ofstream(path, std::ios::binary) << text;
    return path;
  }

  std::string uniform_csv(std::size_t n, std::uint64_t seed)
  {
    auto s = usp::rng::make_stream(seed, {});
    std::string text = "x,y\n";
    for (std::size_t i = 0; i < n; ++i)
      text += usp::cli::format_double(usp::rng::uniform01(s)) + "," +
              usp::cli::format_double(usp::rng::uniform01(s)) + "\n";
    return write("data.csv", text);
  }

  fs::path dir_;
};

json
strip_clock(json j)
{
  j["manifest"].erase("wall_clock");
  return j;
}

TEST_F(CliTest, FourRowsWithOnePermutation)
{
  const auto path =
    write("four.csv", "x,y\n0.1,0.2\n0.4,0.9\n0.7,0.3\n0.95,0.55\n");
  const auto r = invoke({ "test", "--input", path, "--M", "1", "--B", "1", "--seed", "3" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  const auto p = j["p_value"].get<std::string>();
  EXPECT_TRUE(p == "1/2" || p == "2/2") << p;
  EXPECT_EQ(j["null_stats_summary"]["count"], 1);
  EXPECT_TRUE(j.contains("manifest"));
  EXPECT_EQ(j["manifest"]["seed"], 3);
}

TEST_F(CliTest, ThreeRowsIsInsufficient)
{
  const auto path = write("three.csv", "x,y\n0.1,0.2\n0.4,0.9\n0.7,0.3\n");
  const auto r = invoke({ "test", "--input", path, "--M", "1" });
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("insufficient sample"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, DataErrorsExitTwo)
{
  const auto outside = write("out.csv", "x,y\n0.1,0.2\n0.4,1.5\n0.7,0.3\n0.9,0.1\n");
  EXPECT_EQ(invoke({ "test", "--input", outside, "--M", "1" }).code, 2);
  const auto text = write("text.csv", "x,y\n0.1,0.2\n0.4,abc\n0.7,0.3\n0.9,0.1\n");
  const auto r = invoke({ "test", "--input", text, "--M", "1" });
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("non-numeric"), std::string::npos) << r.err;
  const auto good = uniform_csv(10, 1);
  const auto missing =
    invoke({ "test", "--input", good, "--x-cols", "x", "--y-cols", "zz", "--M", "1" });
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("zz"), std::string::npos);
  EXPECT_EQ(invoke({ "test", "--input", good }).code, 2);
  EXPECT_EQ(invoke({ "test", "--input", (dir_ / "nope.csv").string(), "--M", "1" }).code, 2);
  EXPECT_EQ(invoke({ "bogus" }).code, 2);
}

TEST_F(CliTest, SameSeedGivesIdenticalOutput)
{
  const auto path = uniform_csv(40, 9);
  const std::vector<std::string> args{ "test", "--input", path, "--M", "2", "--seed", "17" };
  const auto a = invoke(args);
  const auto b = invoke(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(strip_clock(json::parse(a.out)).dump(), strip_clock(json::parse(b.out)).dump());
}

TEST_F(CliTest, ThreadCountDoesNotChangeResult)
{
  const auto path = uniform_csv(30, 4);
  const auto one = invoke({ "test", "--input", path, "--M", "2", "--threads", "1" });
  const auto four = invoke({ "test", "--input", path, "--M", "2", "--threads", "4" });
  auto a = json::parse(one.out);
  auto b = json::parse(four.out);
  a.erase("manifest");
  b.erase("manifest");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST_F(CliTest, SeedFallsBackToEnvironment)
{
  const auto path = uniform_csv(20, 2);
  ::setenv("USP_SEED", "4242", 1);
  const auto env = invoke({ "test", "--input", path, "--M", "1" });
  ::unsetenv("USP_SEED");
  const auto flag = invoke({ "test", "--input", path, "--M", "1", "--seed", "4242" });
  const auto je = json::parse(env.out);
  const auto jf = json::parse(flag.out);
  EXPECT_EQ(je["manifest"]["seed"], 4242);
  EXPECT_EQ(je["p_value"], jf["p_value"]);
}

TEST_F(CliTest, CsvFormat)
{
  const auto path = uniform_csv(12, 5);
  const auto r = invoke({ "test", "--input", path, "--M", "1", "--format", "csv" });
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "statistic,p_value,p_value_decimal,reject,alpha,B");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST_F(CliTest, AdaptiveReportsLevels)
{
  const auto path = uniform_csv(16, 6);
  const auto r = invoke({ "test", "--input", path, "--adaptive", "--B", "19" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j["B_raised"].get<bool>());
  EXPECT_EQ(j["per_level"].size(), j["tests"].get<std::size_t>());
  EXPECT_TRUE(j.contains("warnings"));
}

TEST_F(CliTest, BrownianWideRows)
{
  auto s = usp::rng::make_stream(8, {});
  const std::size_t grid = 5;
  std::string text;
  for (std::size_t c = 0; c < 2 * grid; ++c)
    text += (c ? "," : "") + std::string(c < grid ? "x" : "y") + std::to_string(c % grid);
  text += "\n";
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t c = 0; c < 2 * grid; ++c)
      text += (c ? "," : "") + usp::cli::format_double(usp::rng::uniform01(s) - 0.5);
    text += "\n";
  }
  const auto path = write("bm.csv", text);
  const auto r = invoke(
    { "test", "--input", path, "--basis", "bm", "--M", "1", "--grid-points", "5" });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["manifest"]["config"]["grid_points"], 5);
}

TEST_F(CliTest, TableStatisticOfFlatTable)
{
  const auto path = write("t.csv", "a,b\n1,1\n1,1\n");
  const auto r = invoke({ "test-table", "--input", path });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["statistic"].get<double>(), -2.0, 1e-12);
}

TEST_F(CliTest, TableWithOneNonzeroRowHasPValueOne)
{
  const auto path = write("t.csv", "a,b,c\n3,4,5\n0,0,0\n");
  const auto r = invoke({ "test-table", "--input", path });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["p_value"], "100/100");
  EXPECT_FALSE(j["reject"].get<bool>());
}

TEST_F(CliTest, TableErrors)
{
  EXPECT_EQ(invoke({ "test-table", "--input", write("n.csv", "a,b\n1,-1\n2,2\n") }).code, 2);
  EXPECT_EQ(invoke({ "test-table", "--input", write("f.csv", "a,b\n1,1.5\n2,2\n") }).code, 2);
  EXPECT_EQ(invoke({ "test-table", "--input", write("s.csv", "a,b\n1,0\n0,1\n") }).code, 2);
}

TEST_F(CliTest, TableWithPearsonBaseline)
{
  const auto path = write("t.csv", "a,b\n5,0\n0,5\n");
  const auto r = invoke({ "test-table", "--input", path, "--pearson", "asymptotic" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["pearson"]["p_value"].get<double>(), std::erfc(std::sqrt(5.0)), 1e-12);
}

TEST_F(CliTest, PowerCurveNullPointAndDeterminism)
{
  const std::vector<std::string> args{ "power-curve", "--family", "frho", "--param-grid",
                                       "0:0:1", "--n", "30", "--M", "1", "--B", "19",
                                       "--alpha", "0.1", "--reps", "200", "--seed", "5" };
  const auto a = invoke(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, invoke(args).out);
  std::istringstream lines(a.out);
  std::string header;
  std::string row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header, "parameter,power,se,reps,rejections");
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');)
    cells.push_back(c);
  ASSERT_EQ(cells.size(), 5u);
  const double power = std::stod(cells[1]);
  const double se = std::sqrt(0.1 * 0.9 / 200.0);
  EXPECT_LT(std::abs(power - 0.1), 3.0 * se);
}

TEST_F(CliTest, PowerCurveSingleReplicate)
{
  const auto r = invoke({ "power-curve", "--family", "discrete-sparse", "--param-grid",
                          "0:0.1:0.05", "--n", "40", "--reps", "1", "--B", "19",
                          "--format", "json" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  ASSERT_EQ(j["points"].size(), 3u);
  for (const auto& p : j["points"]) {
    const double power = p["power"].get<double>();
    EXPECT_TRUE(power == 0.0 || power == 1.0);
  }
}

TEST_F(CliTest, PowerCurveRejectsUnknownFamily)
{
  const auto r = invoke({ "power-curve", "--family", "gauss", "--param-grid", "0:1:1" });
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(invoke({ "power-curve", "--family", "frho", "--param-grid", "0:1" }).code, 2);
}

TEST_F(CliTest, ApproxPowerAtZeroIsAlpha)
{
  const auto r = invoke({ "approx-power", "--delta", "0", "--B", "99", "--alpha", "0.1" });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out)["approx_power"].get<double>(), 0.1, 1e-9);
}

TEST_F(CliTest, ApproxPowerForFrho)
{
  const auto r = invoke({ "approx-power", "--family", "frho", "--rho", "0.3", "--n", "300",
                          "--M", "7", "--B", "99", "--alpha", "0.1" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  // sigma^2 = 2M + 1 = 15 per uniform marginal, so sigma_x sigma_y = 15.
  const double delta = std::sqrt(300.0 * 299.0 / 2.0) * 0.09 / 15.0;
  EXPECT_NEAR(j["delta"].get<double>(), delta, 1e-12);
  EXPECT_NEAR(j["delta"].get<double>(), 1.2707, 5e-5);
  EXPECT_DOUBLE_EQ(j["approx_power"].get<double>(), usp::approx_power(delta, 99, 0.1));
}

TEST_F(CliTest, ApproxPowerMissingFlag)
{
  EXPECT_EQ(invoke({ "approx-power", "--family", "frho", "--rho", "0.3", "--n", "300" }).code, 2);
  EXPECT_EQ(invoke({ "approx-power" }).code, 2);
}

TEST_F(CliTest, ReplayReproducesDecision)
{
  const auto path = uniform_csv(25, 11);
  const auto first = invoke({ "test", "--input", path, "--M", "2", "--B", "49" });
  ASSERT_EQ(first.code, 0) << first.err;
  const auto saved = write("result.json", first.out);
  const auto again = invoke({ "replay", "--manifest", saved });
  ASSERT_EQ(again.code, 0) << again.err;
  const auto a = json::parse(first.out);
  const auto b = json::parse(again.out);
  EXPECT_EQ(a["p_value"], b["p_value"]);
  EXPECT_EQ(a["reject"], b["reject"]);
  EXPECT_EQ(a["statistic"], b["statistic"]);

  std::ofstream(path, std::ios::app) << "0.5,0.5\n";
  const auto changed = invoke({ "replay", "--manifest", saved });
  EXPECT_EQ(changed.code, 2);
  EXPECT_NE(changed.err.find("changed"), std::string::npos);
}

TEST_F(CliTest, ManifestFile)
{
  const auto path = uniform_csv(10, 12);
  const auto mpath = (dir_ / "m.json").string();
  const auto r =
    invoke({ "test", "--input", path, "--M", "1", "--manifest-out", mpath });
  ASSERT_EQ(r.code, 0);
  std::ifstream in(mpath);
  const auto m = json::parse(in);
  for (const char* key : { "command", "config", "seed", "version", "input_digest", "argv",
                           "wall_clock" })
    EXPECT_TRUE(m.contains(key)) << key;
  EXPECT_EQ(m["command"], "test");
}

} // namespace
