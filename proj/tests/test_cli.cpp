#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli_util.hpp"
#include "mgopt/timeseries.hpp"

using nlohmann::json;

namespace {

json scenario(const std::string& name)
{
    std::ifstream in(cli::scenarios / name);
    return json::parse(in);
}

void write_json(const cli::fs::path& p, const json& j)
{
    std::ofstream out(p);
    out << j.dump(2);
}

}  // namespace

TEST(Cli, ValidateBundledScenarios)
{
    const auto work = cli::scratch("validate");
    for (const auto& f : cli::fs::directory_iterator(cli::scenarios)) {
        const auto r = cli::run("validate '" + f.path().string() + "'", work);
        EXPECT_EQ(r.code, 0) << f.path() << "\n" << r.out << r.err;
        EXPECT_NE(r.out.find("ok"), std::string::npos);
    }
}

TEST(Cli, ValidateReportsToleranceBelowOne)
{
    const auto work = cli::scratch("bad-eps");
    auto j = scenario("tcl_dg_schedule.json");
    j["tcl_schedule"]["eps_tolerance"] = 0.9;
    write_json(work / "bad.json", j);
    const auto r = cli::run("validate '" + (work / "bad.json").string() + "'", work);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("eps_tolerance"), std::string::npos) << r.out;
    const auto rr = cli::run("run --config '" + (work / "bad.json").string() + "' --out '" + (work / "out").string() + "'", work);
    EXPECT_EQ(rr.code, 1);
    EXPECT_FALSE(cli::fs::exists(work / "out" / "report.json"));
}

TEST(Cli, MissingSeriesFileNamesThePath)
{
    const auto work = cli::scratch("missing");
    auto j = scenario("dp_higher_demand.json");
    j["series"]["load"] = {{"unit", "kW"}, {"path", "nowhere/load.csv"}};
    write_json(work / "cfg.json", j);
    const auto r = cli::run("validate '" + (work / "cfg.json").string() + "'", work);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("nowhere/load.csv"), std::string::npos) << r.out;
}

TEST(Cli, MalformedJsonIsConfigError)
{
    const auto work = cli::scratch("malformed");
    std::ofstream(work / "cfg.json") << "{ \"strategy\": ";
    EXPECT_EQ(cli::run("validate '" + (work / "cfg.json").string() + "'", work).code, 1);
    EXPECT_EQ(cli::run("run --config '" + (work / "absent.json").string() + "'", work).code, 1);
}

TEST(Cli, DispatchRunWritesReport)
{
    const auto work = cli::scratch("dp-run");
    const auto out = work / "out";
    const auto r = cli::run("run --config '" + (cli::scenarios / "dp_higher_demand.json").string() + "' --out '" + out.string() + "'", work);
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(out / "report.json");
    const json rep = json::parse(in);
    EXPECT_EQ(rep["strategy"], "dp-dispatch");
    EXPECT_GT(rep["summary"]["objective"].get<double>(), 0.0);
    EXPECT_GE(rep["summary"]["improvement_percent"].get<double>(), 0.0);
    for (const char* f : {"steps.csv", "soc_trace.csv", "actions_vs_price.csv"}) EXPECT_TRUE(cli::fs::exists(out / f)) << f;

    const auto energy = mgopt::load_series((out / "series" / "energy.csv").string(), mgopt::Unit::kWh);
    EXPECT_EQ(energy.size(), rep["steps"].get<std::size_t>() + 1);
    const auto pb = mgopt::load_series((out / "series" / "p_b.csv").string(), mgopt::Unit::kW);
    EXPECT_EQ(pb.size(), rep["steps"].get<std::size_t>());
}

TEST(Cli, NetworkRunTracesEveryIteration)
{
    const auto work = cli::scratch("net-run");
    const auto out = work / "out";
    const auto r = cli::run("run --quiet --config '" + (cli::scenarios / "network_three_microgrids.json").string() + "' --out '" + out.string() + "'", work);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    std::istringstream trace(cli::slurp(out / "cost_trace.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(trace, line)) ++rows;
    EXPECT_EQ(rows, scenario("network_three_microgrids.json")["network_adp"]["adp"]["iterations"].get<int>());
}

TEST(Cli, RerunsAreByteIdentical)
{
    const auto work = cli::scratch("rerun");
    const std::string cfg = (cli::scenarios / "network_three_microgrids.json").string();
    ASSERT_EQ(cli::run("run --quiet --config '" + cfg + "' --out '" + (work / "a").string() + "'", work).code, 0);
    ASSERT_EQ(cli::run("run --quiet --config '" + cfg + "' --out '" + (work / "b").string() + "'", work).code, 0);
    const auto a = cli::tree(work / "a"), b = cli::tree(work / "b");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b);
}

TEST(Cli, SeedOverrideChangesOutput)
{
    const auto work = cli::scratch("seed");
    const std::string cfg = (cli::scenarios / "network_three_microgrids.json").string();
    ASSERT_EQ(cli::run("run --quiet --config '" + cfg + "' --out '" + (work / "a").string() + "'", work).code, 0);
    ASSERT_EQ(cli::run("run --quiet --seed-override 99 --config '" + cfg + "' --out '" + (work / "b").string() + "'", work).code, 0);
    EXPECT_NE(cli::slurp(work / "a" / "report.json"), cli::slurp(work / "b" / "report.json"));
}
