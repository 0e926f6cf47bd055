#include "fcs/harness.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace fcs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("fcs_harness_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

ErrorCode config_code(const std::vector<std::string>& args) {
    try {
        (void)parse_config(args);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::vector<const char*> argv{"fcs"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str() + err.str();
    return code;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        rows.push_back(f);
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(ParseConfig, WeightParams) {
    auto c = parse_config({"spectrum", "--beta", "1", "--gamma", "2"});
    EXPECT_EQ(c.params(), WeightParams(1.0, 2.0));
    EXPECT_EQ(c.params().delta(), 1.5);
    EXPECT_EQ(config_code({"spectrum", "--beta", "2", "--gamma", "2"}), ErrorCode::ConfigError);
    EXPECT_EQ(config_code({"spectrum", "--beta", "0", "--gamma", "2"}), ErrorCode::ConfigError);
}

TEST(ParseConfig, FileAndFlagPrecedence) {
    auto dir = scratch("precedence");
    fs::create_directories(dir);
    auto file = dir / "run.ini";
    std::ofstream(file) << "seed=7\npaths=12\nx-max=30\n";
    auto a = parse_config({"simulate", "--config", file.string()});
    EXPECT_EQ(a.seed, 7u);
    EXPECT_EQ(a.paths, 12u);
    EXPECT_EQ(a.x_max, 30.0);
    auto b = parse_config({"simulate", "--config", file.string(), "--seed", "9"});
    EXPECT_EQ(b.seed, 9u);
    EXPECT_EQ(b.paths, 12u);
}

TEST(ParseConfig, UnknownKeysAndBadTypes) {
    auto dir = scratch("unknown");
    fs::create_directories(dir);
    auto file = dir / "run.ini";
    std::ofstream(file) << "seed=7\nsigma=3\n";
    try {
        (void)parse_config({"simulate", "--config", file.string()});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
        EXPECT_NE(std::string(e.what()).find("sigma"), std::string::npos);
    }
    EXPECT_EQ(config_code({"simulate", "--paths", "many"}), ErrorCode::ConfigError);
    EXPECT_EQ(config_code({"simulate", "--bogus", "1"}), ErrorCode::ConfigError);
    EXPECT_EQ(config_code({"launch"}), ErrorCode::ConfigError);
    EXPECT_EQ(config_code({}), ErrorCode::ConfigError);
}

TEST(ParseConfig, RatiosAndSimulationConstraints) {
    auto c = parse_config({"simulate", "--dt", "1/504", "--t-max", "1/2"});
    EXPECT_EQ(c.dt, 1.0 / 504.0);
    EXPECT_EQ(c.t_max, 0.5);
    EXPECT_EQ(config_code({"simulate", "--dt", "0"}), ErrorCode::ConfigError);
    EXPECT_EQ(config_code({"simulate", "--dt", "0.3"}), ErrorCode::ConfigError);  // 1 is not a multiple
    EXPECT_EQ(config_code({"simulate", "--vol-a", "0.5"}), ErrorCode::ConfigError);
    EXPECT_EQ(config_code({"approximate", "--threshold-K", "0.05"}), ErrorCode::ConfigError);  // ||h0|| = 0.05
    EXPECT_NO_THROW((void)parse_config({"approximate", "--threshold-K", "0.06"}));
    EXPECT_EQ(config_code({"approximate", "--rank", "65"}), ErrorCode::ConfigError);
}

TEST(Run, InvalidConfigFailsFastWithoutOutput) {
    auto dir = scratch("invalid");
    auto t0 = std::chrono::steady_clock::now();
    int code = run_cli({"verify-all", "--beta", "2", "--gamma", "1", "--out", dir.string()});
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(code, kExitConfig);
    EXPECT_LT(ms, 100.0);
    EXPECT_FALSE(fs::exists(dir));
}

TEST(Run, SpectrumCsv) {
    auto dir = scratch("spectrum");
    EXPECT_EQ(run_cli({"spectrum", "--cells", "64", "--out", dir.string()}), kExitPass);
    auto rows = read_csv(dir / "spectrum.csv");
    ASSERT_GE(rows.size(), 2u);
    EXPECT_LE(rows.size() - 1, 64u);
    for (const auto& r : rows) EXPECT_EQ(r.size(), 3u);
    EXPECT_EQ(rows[0][0], "k");
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Run, ApproximateSummary) {
    auto dir = scratch("approximate");
    EXPECT_EQ(run_cli({"approximate", "--rank", "4", "--eps", "0.01", "--paths", "20", "--out", dir.string()}), kExitPass);
    auto rows = read_csv(dir / "approximate_summary.csv");
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][1], "4");
        EXPECT_LE(std::stod(rows[i][4]), 1.0);
    }
    auto detail = read_csv(dir / "approximate.csv");
    EXPECT_EQ(detail[0], (std::vector<std::string>{"audit", "rank", "path", "t", "lhs", "rhs", "margin"}));
    EXPECT_GT(detail.size(), 20u * 253u);
}

TEST(Run, SimulateSnapshots) {
    auto dir = scratch("simulate");
    EXPECT_EQ(run_cli({"simulate", "--paths", "3", "--snapshots", "--out", dir.string()}), kExitPass);
    auto rows = read_csv(dir / "simulate.csv");
    EXPECT_EQ(rows.size(), 1u + 3u * 253u);
    std::ifstream is(dir / "snapshots" / "path_0002.txt");
    auto r = read_curve(is);
    EXPECT_EQ(r.grid().n_cells(), 64u);
    EXPECT_DOUBLE_EQ(r.h0(), std::stod(rows.back()[3]));

    // The snapshot is a valid initial curve for a further run.
    auto dir2 = scratch("simulate2");
    std::string h0 = (dir / "snapshots" / "path_0000.txt").string();
    EXPECT_EQ(run_cli({"simulate", "--paths", "2", "--h0-file", h0, "--out", dir2.string()}), kExitPass);
}

TEST(Run, VerifyAllIsDeterministic) {
    auto a = scratch("verify_a");
    auto b = scratch("verify_b");
    std::string text;
    EXPECT_EQ(run_cli({"verify-all", "--seed", "1", "--out", a.string()}, &text), kExitPass) << text;
    EXPECT_EQ(run_cli({"verify-all", "--seed", "1", "--out", b.string()}), kExitPass);
    std::size_t csvs = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        if (entry.path().extension() != ".csv") continue;
        ++csvs;
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
    }
    EXPECT_GE(csvs, 5u);
    auto ja = nlohmann::json::parse(slurp(a / "manifest.json"));
    auto jb = nlohmann::json::parse(slurp(b / "manifest.json"));
    for (auto* j : {&ja, &jb}) {
        j->erase("wall_clock_seconds");
        (*j)["config"].erase("out");
    }
    EXPECT_EQ(ja, jb);
}

TEST(Run, FailingCheckExitCode) {
    RunManifest m;
    m.checks.push_back(Check::at_most("x", 2.0, 1.0));
    EXPECT_EQ(m.exit_code(), kExitCheckFailed);
    m.checks[0] = Check::within("y", 1.5, 1.7, 2.3);
    EXPECT_FALSE(m.passed());
    EXPECT_DOUBLE_EQ(m.checks[0].slack(), -0.2);
    m.checks[0] = Check::within("z", 2.0, 1.7, 2.3);
    EXPECT_TRUE(m.passed());
    EXPECT_DOUBLE_EQ(m.checks[0].slack(), 0.3);
}
