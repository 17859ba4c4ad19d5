#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(ZEN_SOURCE_DIR) / "configs";

int zen(const std::string& args) {
  const std::string cmd = std::string("\"") + ZEN_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "zen_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Cli, TradeoffFixtureBreakpoints) {
  const auto out = scratch("tradeoff");
  ASSERT_EQ(zen("tradeoff --lp " + (kConfigs / "tradeoff_fixture.json").string() + " --out " + out.string()), 0);
  const auto rows = lines(out / "tradeoff.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].rfind("# seed=0 config_hash=", 0), 0u);
  EXPECT_EQ(rows[1], "v_microjoules,u,alpha_1,alpha_2,delta");
  EXPECT_EQ(rows[2].substr(0, 4), "0,7,");
  EXPECT_EQ(rows[3].substr(0, 5), "10,6,");
  EXPECT_EQ(rows[4].substr(0, 5), "40,0,");
}

TEST(Cli, FlatTraceHasNoForecastError) {
  const auto out = scratch("flat");
  {
    std::ofstream f(out / "flat.csv");
    f << "slot,power_watts\n";
    for (int s = 0; s < 400; ++s) f << s << ",0.002\n";
  }
  ASSERT_EQ(zen("forecast-compare --config " + (kConfigs / "fig2_topology.json").string() + " --trace " +
                (out / "flat.csv").string() + " --period 96 --out " + out.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(j["series"]["flat.csv"]["mape_ewma_pct"].get<double>(), 0.0);
  EXPECT_EQ(j["series"]["flat.csv"]["mape_hw_pct"].get<double>(), 0.0);
}

TEST(Cli, RouteCompareRecordsOrdering) {
  const auto out = scratch("route");
  ASSERT_EQ(zen("route-compare --config " + (kConfigs / "fig2_topology.json").string() +
                " --slots 400 --seeds 2 --out " + out.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(j["modified_at_least_baseline"].get<bool>());
  EXPECT_EQ(j["pdr_modified"].size(), 2u);
  const auto rows = lines(out / "route_compare.csv");
  EXPECT_EQ(rows.size(), 2u + 4u);
}

TEST(Cli, RunWritesStampedOutputs) {
  const auto out = scratch("run");
  ASSERT_EQ(zen("run --config " + (kConfigs / "fig2_topology.json").string() +
                " --slots 20 --seed 9 --mode baseline --out " + out.string()),
            0);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["seed"], 9);
  const std::string stamp = "# seed=9 config_hash=" + summary["config_hash"].get<std::string>();
  for (const char* f : {"slots.csv", "ledger.csv", "routes.csv", "forecasts.csv"}) {
    EXPECT_EQ(lines(out / f).at(0), stamp) << f;
  }
  EXPECT_FALSE(fs::exists(out / "mac_trace.csv"));
  const auto echoed = nlohmann::json::parse(slurp(out / "config.json"));
  EXPECT_EQ(echoed["seed"], 9);
  EXPECT_EQ(echoed["routing"]["mode"], "baseline");
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("codes");
  {
    std::ofstream(out / "bad.json") << R"({"nodes": [], "colour": 1})";
    std::ofstream(out / "inf.json")
        << R"({"weights":[1],"costs_uj":[10],"duty_energy_uj":5,"budget_uj":10,"delta_lower":0.9})";
  }
  EXPECT_EQ(zen("run --config " + (out / "bad.json").string() + " --out " + out.string()), 2);
  EXPECT_EQ(zen("tradeoff --lp " + (out / "inf.json").string() + " --out " + out.string()), 3);
  EXPECT_EQ(zen("run --config " + (out / "missing.json").string()), 2);
  EXPECT_EQ(zen("duty --duty-mode table --out " + out.string()), 0);
  const auto rows = lines(out / "duty.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[2], "0.05,table,5,100,0.04761904762,100");
}

}  // namespace
