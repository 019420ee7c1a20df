// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "osclab/cli_core.hpp"
#include "osclab/ladder.hpp"

using namespace osclab;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("osclab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string config_error(const std::string& text) {
    try {
        cli::parse_config(text, "cfg.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

cli::RunResult run(const std::string& command, const std::string& config, const fs::path& out, unsigned threads = 1) {
    cli::RunRequest req{command, cli::parse_config(config, "inline"), out};
    req.config.threads = threads;
    return cli::run_command(req);
}

int run_binary(const std::string& args) {
    const int status = std::system((std::string(LAB_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Ladder, DefaultsSatisfyEveryInequality) {
    EXPECT_NO_THROW(default_ladder().validate());
    auto p = default_ladder();
    p.delta2 = 0.9;
    EXPECT_NO_THROW(p.validate());
}

TEST(Ladder, EachViolationIsNamed) {
    struct Case {
        std::function<void(ParameterLadder&)> edit;
        std::string named;
    };
    const std::vector<Case> cases{
        {[](ParameterLadder& p) { p.gamma = 0.5; }, "gamma > 1/2"},
        {[](ParameterLadder& p) { p.gamma = 1.0; }, "gamma < 1"},
        {[](ParameterLadder& p) { p.tau0 = -0.1; }, "tau0 > 0"},
        {[](ParameterLadder& p) { p.rho = 0.06; }, "rho <= rho0"},
        {[](ParameterLadder& p) { p.gamma = 0.9; p.tau0 = 0.15; }, "gamma + tau0 < 1"},
        {[](ParameterLadder& p) { p.gamma = 0.86; }, "tau0 + gamma + rho0 < 1"},
        {[](ParameterLadder& p) { p.rho0 = 0.12; }, "rho0 < tau0"},
        {[](ParameterLadder& p) { p.delta0 = 0.06; }, "delta0 < rho0"},
        {[](ParameterLadder& p) { p.delta1 = 0.011; }, "delta1 <= delta0"},
        {[](ParameterLadder& p) { p.delta3 = 0.008; }, "delta3 < delta1"},
        {[](ParameterLadder& p) { p.delta4 = 0.009; }, "delta4 <= delta1"},
        {[](ParameterLadder& p) { p.delta_star[2] = 0.02; }, "delta_star <= delta0"},
        {[](ParameterLadder& p) { p.c_delta3 = 12.0; }, "C*delta3 + delta4 < tau0/2"},
        {[](ParameterLadder& p) { p.tau0 = 0.07; p.rho0 = 0.05; p.rho = 0.018; }, "rho < tau0/4"},
        {[](ParameterLadder& p) { p.delta2 = 0.05; }, "delta1 < tau0*delta2/8"},
    };
    for (const auto& c : cases) {
        auto p = default_ladder();
        c.edit(p);
        try {
            p.validate();
            ADD_FAILURE() << "accepted a ladder violating " << c.named;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(c.named), std::string::npos) << e.what();
        }
    }
}

TEST(Ladder, DerivedThresholds) {
    const auto p = default_ladder();
    EXPECT_NEAR(p.bridge_eps(1024.0), std::pow(1024.0, -0.13), 1e-15);
    EXPECT_NEAR(p.stationarity_threshold(256.0), std::pow(256.0, 0.87), 1e-10);
}

TEST(Config, EmptyTextGivesDefaults) {
    const auto c = cli::parse_config("", "x");
    EXPECT_EQ(c.system.name, "curved");
    EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{1});
    EXPECT_EQ(c.threads, 1u);
    EXPECT_DOUBLE_EQ(c.ladder.gamma, 0.75);
}

TEST(Config, ReadsEverySection) {
    const std::string text = R"(system:
  preset: linear
  ball: {center: [0.1, 0.0], radius: 0.4, outer_radius: 0.45}
ladder:
  gamma: 0.7
  delta2: 0.9
hypotheses:
  grid_resolution: 21
  tau_grid: [0, 1]
decay:
  family: resonant
  lambdas: [16, 32]
decompose: {lambda: 32, R: 8, delta: 0.25, band: annulus, support: [0, 1]}
sublevel: {expr: quad_sum, k_lo: 3, k_hi: 9, grid: 128, bandwidth: 4}
stationary: {lambdas: [16], resolution: 6}
trilinear: {sigmas: [0.5], r: [10, 100], family: chirp_pair}
feq: {points: [[0, 0, 0.5]], loop_scale: 0.02, step: 0.001, tolerance: 1e-8}
run: {seeds: [4, 5], threads: 2}
)";
    const auto c = cli::parse_config(text, "full.yaml");
    EXPECT_EQ(c.system.name, "linear");
    EXPECT_DOUBLE_EQ(c.system.ball.center.x1, 0.1);
    EXPECT_DOUBLE_EQ(c.system.ball.radius, 0.4);
    EXPECT_DOUBLE_EQ(c.system.phases[2].value({0.3, 0.2}), 0.5);
    EXPECT_DOUBLE_EQ(c.ladder.gamma, 0.7);
    EXPECT_DOUBLE_EQ(*c.ladder.delta2, 0.9);
    EXPECT_EQ(c.hypotheses.grid_resolution, 21);
    EXPECT_EQ(c.hypotheses.tau_grid.size(), 2u);
    EXPECT_EQ(c.decay.family, InputFamily::Resonant);
    EXPECT_EQ(c.decompose.band, Band::Annulus);
    EXPECT_EQ(c.sublevel.expr, SublevelExpr::QuadSum);
    EXPECT_EQ(c.stationary.resolution, 6);
    EXPECT_EQ(c.trilinear.family, "chirp_pair");
    EXPECT_DOUBLE_EQ(c.feq.step, 0.001);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
    EXPECT_EQ(c.threads, 2u);
}

TEST(Config, ExplicitPhasePolynomials) {
    const std::string text = R"(system:
  phases:
    - [[0, 1, 1.0], [2, 0, 0.5]]
    - [[1, 0, 1.0], [0, 1, 1.0]]
    - [[1, 0, 1.0], [0, 1, -1.0]]
    - [[1, 0, 1.0]]
)";
    const auto c = cli::parse_config(text);
    EXPECT_DOUBLE_EQ(c.system.phases[0].value({0.2, 0.3}), 0.3 + 0.5 * 0.04);
    EXPECT_DOUBLE_EQ(c.system.phases[3].value({0.2, 0.3}), 0.2);
}

TEST(Config, ErrorsNameTheKeyAndLine) {
    EXPECT_EQ(config_error("ladder:\n  gamma: 0.75\n  gama: 0.7\n"), "cfg.yaml:3: unknown key 'ladder.gama'");
    EXPECT_EQ(config_error("run:\n  seeds: [1, x]\n"), "cfg.yaml:2: 'run.seeds' has an invalid value 'x'");
    EXPECT_EQ(config_error("sytem:\n  preset: linear\n"), "cfg.yaml:1: unknown section 'sytem'");
    EXPECT_EQ(config_error("system:\n  preset: wobbly\n"), "cfg.yaml:2: unknown system preset 'wobbly'");
    EXPECT_EQ(config_error("decay:\n  family: noise\n"), "cfg.yaml:2: 'decay.family' must be bandlimited_random, resonant or chirp");
    EXPECT_NE(config_error("system:\n  phases:\n    - [[0, 1, 1.0]]\n").find("cfg.yaml:3: 'system.phases' needs 4 entries"), std::string::npos);
    EXPECT_NE(config_error("run: {seeds: [1, 2\n").find("cfg.yaml:"), std::string::npos);
    EXPECT_EQ(config_error("ladder:\n  tau0: 0.3\n"), "cfg.yaml:2: ladder violates gamma + tau0 < 1 (1.05 vs 1)");
    EXPECT_NE(config_error("system:\n  ball: {radius: 0.5, outer_radius: 0.4}\n").find("outer_radius > radius"), std::string::npos);
}

TEST(Config, ShippedConfigsLoad) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(CONFIG_DIR)) {
        if (e.path().extension() != ".yaml") continue;
        EXPECT_NO_THROW(cli::load_config(e.path())) << e.path();
        ++n;
    }
    EXPECT_GE(n, 3);
    const auto custom = cli::load_config(fs::path(CONFIG_DIR) / "custom_system.yaml");
    const auto curved = curved_system();
    for (const Point2 x : {Point2{0.1, -0.2}, Point2{0.3, 0.05}})
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(custom.system.phases[j].value(x), curved.phases[j].value(x), 1e-15);
}

TEST(Config, SeedListsAndNumbers) {
    EXPECT_EQ(cli::parse_seed_list("1,2,5-8"), (std::vector<std::uint64_t>{1, 2, 5, 6, 7, 8}));
    EXPECT_EQ(cli::parse_seed_list("9"), (std::vector<std::uint64_t>{9}));
    EXPECT_THROW(cli::parse_seed_list("3-1"), ConfigError);
    EXPECT_THROW(cli::parse_seed_list("a"), ConfigError);
    EXPECT_THROW(cli::parse_seed_list(""), ConfigError);
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(cli::format_double(v)), v);
}

TEST(Config, Sha256KnownVectors) {
    EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(cli::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Config, OutputRootVariable) {
    ::setenv(cli::kOutRootVariable, "/tmp/labroot", 1);
    EXPECT_EQ(cli::default_out("feq"), fs::path("/tmp/labroot/feq"));
    ::unsetenv(cli::kOutRootVariable);
    EXPECT_EQ(cli::default_out("feq"), fs::path("runs/feq"));
}

TEST(Commands, LinearSystemIsReportedResonant) {
    const auto out = scratch("hyp_linear");
    run("check-hypotheses", "system: {preset: linear}\nhypotheses: {grid_resolution: 21}\n", out);
    const auto s = read_json(out / "summary.json");
    EXPECT_TRUE(s["resonant"].get<bool>());
    EXPECT_LE(s["resonance_sigma_min"][0].get<double>(), 1e-6);
}

TEST(Commands, CurvedSystemHasPositiveMargins) {
    const auto out = scratch("hyp_curved");
    run("check-hypotheses", "", out);
    const auto s = read_json(out / "summary.json");
    EXPECT_TRUE(s["all_margins_positive"].get<bool>());
    EXPECT_FALSE(s["resonant"].get<bool>());
}

TEST(Commands, FeqOnLinearSystemHasNoHolonomy) {
    const auto out = scratch("feq_linear");
    run("feq", "system: {preset: linear}\n", out);
    const auto s = read_json(out / "summary.json");
    EXPECT_LE(s["max_holonomy"].get<double>(), 1e-6);
    EXPECT_TRUE(s["existence_regime"].get<bool>());
}

TEST(Commands, TrilinearWitnessTable) {
    const auto out = scratch("tri_witness");
    run("trilinear", "trilinear: {sigmas: [0], r: [100, 1000, 10000, 100000]}\n", out);
    const auto csv = read_file(out / "trilinear.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "sigma,r,seed,value");
    int rows = 0;
    while (std::getline(in, line)) {
        const double v = std::stod(line.substr(line.rfind(',') + 1));
        EXPECT_NEAR(v, 0.405, 0.01 * 0.405);
        ++rows;
    }
    EXPECT_EQ(rows, 4);
    EXPECT_NEAR(read_json(out / "summary.json")["sweeps"][0]["delta2"].get<double>(), 0.0, 0.02);
}

TEST(Commands, DecayDemos) {
    const auto lin = scratch("decay_linear"), cur = scratch("decay_curved");
    EXPECT_EQ(run("decay-sweep", "system: {preset: linear}\ndecay: {family: resonant, lambdas: [16, 32, 64, 128]}\n", lin).exit_code, 0);
    EXPECT_NEAR(read_json(lin / "summary.json")["exponent"].get<double>(), 0.0, 0.05);
    EXPECT_EQ(run("decay-sweep", "decay: {lambdas: [16, 32, 64, 128]}\nrun: {seeds: [1, 2]}\n", cur).exit_code, 0);
    EXPECT_GT(read_json(cur / "summary.json")["exponent"].get<double>(), 0.0);
    const auto head = read_file(cur / "decay.csv").substr(0, 80);
    EXPECT_EQ(head.substr(0, head.find('\n')), "lambda,seed,re_T,im_T,abs_T,grid_n,refinement_delta");
}

TEST(Commands, CsvHeadersAndManifest) {
    const auto out = scratch("census");
    const auto res = run("stationary", "stationary: {lambdas: [16, 32]}\n", out);
    EXPECT_EQ(res.exit_code, 0);
    const auto csv = read_file(out / "census.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,gamma,tau0,rho,n_interacting,n_stationary,bigM,trivial_bound,ratio");
    const auto m = read_json(out / "manifest.json");
    EXPECT_EQ(m["command"], "stationary");
    EXPECT_EQ(m["config_digest"], cli::sha256_hex(m["config"].get<std::string>()));
    EXPECT_EQ(m["outputs"]["csv"], "census.csv");
}

TEST(Commands, ManifestReplayIsByteIdenticalAcrossThreadCounts) {
    const std::vector<std::pair<std::string, std::string>> runs{
        {"trilinear", "trilinear: {sigmas: [0.5, 2], r: [10, 100, 1000]}\nrun: {seeds: [1, 2, 3]}\n"},
        {"stationary", "stationary: {lambdas: [16, 32]}\n"},
        {"sublevel", "sublevel: {grid: 128}\nrun: {seeds: [3, 4]}\n"},
    };
    for (const auto& [cmd, cfg] : runs) {
        const auto a = scratch(cmd + "_a"), b = scratch(cmd + "_b");
        const auto first = run(cmd, cfg, a, 1);
        auto req = cli::request_from_manifest(a / "manifest.json", b);
        req.config.threads = 4;
        const auto second = cli::run_command(req);
        EXPECT_EQ(first.exit_code, second.exit_code);
        const auto csv = read_json(a / "manifest.json")["outputs"]["csv"].get<std::string>();
        EXPECT_EQ(read_file(a / csv), read_file(b / csv)) << cmd;
        EXPECT_EQ(read_file(a / "summary.json"), read_file(b / "summary.json")) << cmd;
    }
}

TEST(Commands, TamperedManifestIsRejected) {
    const auto a = scratch("tamper");
    run("feq", "", a);
    auto m = read_json(a / "manifest.json");
    m["config"] = "system: {preset: linear}\n";
    std::ofstream(a / "manifest.json") << m.dump();
    EXPECT_THROW(cli::request_from_manifest(a / "manifest.json", a / "replay"), ConfigError);
}

TEST(Commands, ReportCollectsSummaries) {
    const auto root = scratch("report");
    run("feq", "", root / "feq");
    run("trilinear", "trilinear: {sigmas: [1], r: [10, 100]}\n", root / "trilinear");
    run("report", "", root);
    const auto rep = read_json(root / "summary.json");
    EXPECT_TRUE(rep["experiments"].contains("feq"));
    EXPECT_TRUE(rep["experiments"].contains("trilinear"));
    const auto csv = read_file(root / "report.csv");
    EXPECT_NE(csv.find("feq,max_holonomy,"), std::string::npos);
}

TEST(Commands, UnknownCommandIsAConfigError) {
    EXPECT_THROW(run("frobnicate", "", scratch("unknown")), ConfigError);
}

TEST(Binary, ExitCodes) {
    const auto dir = scratch("binary");
    EXPECT_EQ(run_binary("--out " + (dir / "h").string() + " feq"), 0);
    EXPECT_NE(run_binary("frobnicate"), 0);
    EXPECT_NE(run_binary(""), 0);
    std::ofstream(dir / "bad.yaml") << "ladder:\n  gama: 1\n";
    EXPECT_EQ(run_binary("feq --config " + (dir / "bad.yaml").string() + " --out " + (dir / "x").string()), 1);
    std::ofstream(dir / "guard.yaml") << "trilinear: {sigmas: [0.5], r: [5, 50]}\n";
    EXPECT_EQ(run_binary("trilinear --config " + (dir / "guard.yaml").string() + " --out " + (dir / "y").string()), 2);
    std::ofstream(dir / "refuse.yaml") << "sublevel: {expr: vector_sum, k_lo: 2, k_hi: 14}\n";
    EXPECT_EQ(run_binary("sublevel --config " + (dir / "refuse.yaml").string() + " --out " + (dir / "z").string()), 3);
    EXPECT_TRUE(fs::exists(dir / "z" / "summary.json"));
}
