#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixmpc/io.hpp"

namespace fs = std::filesystem;
using namespace fixmpc;
using nlohmann::json;

namespace {

const char* kProblem = R"({
  "model": {"A_c": [[0, 1], [0, 0]], "B_c": [[0], [1]], "Ts": 0.1},
  "weights": {"Q": [[1, 0], [0, 0.1]], "R": [[0.1]]},
  "constraints": {"u_min": [-1], "u_max": [1]},
  "horizon": 10
})";

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("fixmpc_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(FIXMPC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) { return io::read_file(p.string()); }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ','))
            row.push_back(cell);
        out.push_back(row);
    }
    return out;
}

} // namespace

TEST(Cli, ValidateExitCodes) {
    const auto d = scratch("validate");
    io::write_file((d / "ok.json").string(), kProblem);
    EXPECT_EQ(cli("--out " + (d / "a").string() + " validate " + (d / "ok.json").string()), 0);
    EXPECT_TRUE(fs::exists(d / "a" / "validation.json"));
    EXPECT_TRUE(fs::exists(d / "a" / "manifest.json"));

    auto bad = json::parse(kProblem);
    bad["weights"]["Q"] = {{1, 0}, {0, -1}};
    io::write_file((d / "bad.json").string(), bad.dump());
    EXPECT_EQ(cli("--out " + (d / "b").string() + " validate " + (d / "bad.json").string()), 1);
    const auto v = json::parse(slurp(d / "b" / "validation.json"));
    EXPECT_FALSE(v["ok"].get<bool>());
    EXPECT_EQ(v["failures"][0].get<std::string>().rfind("Q ", 0), 0u);

    auto unk = json::parse(kProblem);
    unk["horizn"] = 3;
    io::write_file((d / "unk.json").string(), unk.dump());
    EXPECT_EQ(cli("--out " + (d / "c").string() + " validate " + (d / "unk.json").string()), 1);
    EXPECT_EQ(cli("validate " + (d / "missing.json").string()), 1);
    EXPECT_EQ(cli("nosuchcommand"), 1);
    fs::remove_all(d);
}

TEST(Cli, HardwareGridMatchesPublishedSampleTimes) {
    const auto d = scratch("hw");
    ASSERT_EQ(cli("--out " + d.string() + " hwmodel --family fgm --Nnu 40 --nx 8 --P 1,2,3,4,8,16,32"), 0);
    auto rows = csv_rows(slurp(d / "hwmodel.csv"));
    const double v6[] = {1.95, 1.20, 0.98, 0.82, 0.64, 0.56, 0.53};
    const double s6[] = {3.39, 2.09, 1.70, 1.43, 1.10, 0.98, 0.91};
    const long mult[] = {42, 84, 126, 168, 336, 672, 1344};
    ASSERT_EQ(rows.size(), 8u);
    for (int i = 0; i < 7; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i + 1)];
        EXPECT_EQ(std::stol(r[1]), mult[i]);
        EXPECT_NEAR(std::stod(r[2]), v6[i], 0.01 + 1e-9);
        EXPECT_NEAR(std::stod(r[4]), s6[i], 0.01 + 1e-9);
    }
    ASSERT_EQ(cli("--out " + d.string() + " hwmodel --family admm --nA 216 --P 1,2,3,4,5,6,7"), 0);
    rows = csv_rows(slurp(d / "hwmodel.csv"));
    const double av6[] = {23.40, 12.60, 9.00, 7.20, 6.20, 5.40, 4.90};
    const double as6[] = {40.70, 21.91, 15.65, 12.52, 10.78, 9.39, 8.52};
    for (int i = 0; i < 7; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i + 1)];
        EXPECT_EQ(std::stol(r[1]), 216L * (i + 1));
        EXPECT_NEAR(std::stod(r[2]), av6[i], 0.01 + 1e-9);
        EXPECT_NEAR(std::stod(r[4]), as6[i], 0.01 + 1e-9);
    }
    EXPECT_EQ(cli("--out " + d.string() + " hwmodel --family fgm --Nnu 40 --P 41"), 2);
    fs::remove_all(d);
}

TEST(Cli, SolveOutputsAreReproducibleAndHashed) {
    const auto d = scratch("solve");
    io::write_file((d / "p.json").string(), kProblem);
    const std::string args = " solve " + (d / "p.json").string() + " --method fgm --b 14 --x0 1.5,-0.5";
    ASSERT_EQ(cli("--out " + (d / "r1").string() + args), 0);
    ASSERT_EQ(cli("--out " + (d / "r2").string() + args), 0);
    for (const char* f : {"trace.csv", "solution.json", "artifact.json", "overflow.json", "manifest.json"}) {
        ASSERT_TRUE(fs::exists(d / "r1" / f)) << f;
        EXPECT_EQ(slurp(d / "r1" / f), slurp(d / "r2" / f)) << f;
    }
    const auto m = json::parse(slurp(d / "r1" / "manifest.json"));
    EXPECT_EQ(m["command"], "solve");
    EXPECT_EQ(m["outputs"]["trace.csv"].get<std::string>(), io::git_blob_hash(slurp(d / "r1" / "trace.csv")));
    EXPECT_EQ(m["artifacts"]["artifact.json"].get<std::string>(),
              io::git_blob_hash(slurp(d / "r1" / "artifact.json")));
    EXPECT_EQ(m["config"]["b"], 14);
    const auto trace = slurp(d / "r1" / "trace.csv");
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,objective,residual,eta_observed,eta_bound");
    fs::remove_all(d);
}

TEST(Cli, ConfigFileAppliesAndRejectsUnknownKeys) {
    const auto d = scratch("config");
    io::write_file((d / "p.json").string(), kProblem);
    io::write_file((d / "c.json").string(), R"({"method": "admm", "iters": 30})");
    ASSERT_EQ(cli("--out " + (d / "a").string() + " solve " + (d / "p.json").string() + " --config " +
                  (d / "c.json").string()),
              0);
    const auto m = json::parse(slurp(d / "a" / "manifest.json"));
    EXPECT_EQ(m["config"]["method"], "admm");
    EXPECT_EQ(m["config"]["iters"], 30);
    const auto trace = slurp(d / "a" / "trace.csv");
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,primal_residual,objective,eta_observed,eta_bound");
    io::write_file((d / "bad.json").string(), R"({"iterz": 30})");
    EXPECT_EQ(cli("--out " + (d / "b").string() + " solve " + (d / "p.json").string() + " --config " +
                  (d / "bad.json").string()),
              1);
    fs::remove_all(d);
}

TEST(Cli, CertifyReportsStability) {
    const auto d = scratch("certify");
    io::write_file((d / "p.json").string(), kProblem);
    ASSERT_EQ(cli("--out " + d.string() + " certify " + (d / "p.json").string() + " --b 16 --target-eta 1e-3"), 0);
    const auto c = json::parse(slurp(d / "certificate.json"));
    EXPECT_TRUE(c["schur_stable"].get<bool>());
    EXPECT_TRUE(c["root_conditions_hold"].get<bool>());
    EXPECT_GE(c["min_fraction_bits"].get<int>(), 1);
    fs::remove_all(d);
}

TEST(Cli, BenchSoftAdmmAt18Bits) {
    const auto d = scratch("bench");
    ASSERT_EQ(cli("--out " + d.string() + " bench --variant soft --method admm --b 18 --iters 40"), 0);
    const auto rows = csv_rows(slurp(d / "cost_table.csv"));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][1], "b18");
    EXPECT_LT(std::abs(std::stod(rows[1][1])), 2.0);
    EXPECT_TRUE(fs::exists(d / "trace_I40_b18.csv"));
    EXPECT_TRUE(fs::exists(d / "trace_baseline.csv"));
    // the FGM path cannot take state constraints
    EXPECT_EQ(cli("--out " + d.string() + " bench --variant soft --method fgm --b 16 --iters 5"), 1);
    fs::remove_all(d);
}
