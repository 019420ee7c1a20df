// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osclab/functional_eq.hpp"
#include "osclab/ladder.hpp"
#include "osclab/phase_geometry.hpp"
#include "osclab/quadrature.hpp"
#include "osclab/signals.hpp"
#include "osclab/sublevel.hpp"
#include "osclab/trilinear.hpp"

namespace osclab::cli {

inline constexpr const char* kArtifactVersion = "0.9.0";
inline constexpr const char* kOutRootVariable = "OSCLAB_OUT_ROOT";

struct DecaySection {
    InputFamily family = InputFamily::BandlimitedRandom;
    std::vector<double> lambdas{16.0, 32.0, 64.0, 128.0};
    double oversampling = 8.0;
    bool refine = true;
};

struct DecomposeSection {
    double lambda = 64.0;
    double R = 16.0;
    double delta = 0.5;
    Band band = Band::Lowpass;
    Interval support{-1.0, 1.0};
};

struct SublevelSection {
    SublevelExpr expr = SublevelExpr::CoeffSum;
    int k_lo = 1;
    int k_hi = 10;
    int grid = 512;
    double bandwidth = 6.0;
};

struct StationarySection {
    std::vector<double> lambdas{16.0, 32.0, 64.0};
    int resolution = 4;
};

struct TrilinearSection {
    std::vector<double> sigmas{0.0, 0.5, 2.0};
    std::vector<double> r{1e2, 1e3, 1e4};
    std::string family = "auto";  // auto: witnesses at sigma 0 and 1, worst_random elsewhere
};

struct FeqSection {
    std::vector<Point3> points{{0.1, 0.1, 0.5}, {-0.1, 0.05, 0.8}};
    double loop_scale = 0.05;
    double step = 0.005;
    double tolerance = 1e-6;
};

struct LabConfig {
    std::string text;
    std::string origin;
    PhaseSystem system;
    ParameterLadder ladder;
    HypothesisOptions hypotheses;
    DecaySection decay;
    DecomposeSection decompose;
    SublevelSection sublevel;
    StationarySection stationary;
    TrilinearSection trilinear;
    FeqSection feq;
    std::vector<std::uint64_t> seeds{1};
    unsigned threads = 1;
};

// Throws ConfigError "<origin>:<line>: ..." naming the offending key.
LabConfig parse_config(const std::string& text, const std::string& origin = "<config>");
LabConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

// "1,2,5-8" -> {1, 2, 5, 6, 7, 8}
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

// %.17g, so that rereading gives the same double
std::string format_double(double v);

struct RunRequest {
    std::string command;
    LabConfig config;
    std::filesystem::path out;
};

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> files;  // relative to the output directory
    std::string message;
};

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"check-hypotheses", "decay-sweep", "decompose", "sublevel", "stationary", "trilinear", "feq", "report"};
    return names;
}

// Runs one experiment and writes <csv>, summary.json and manifest.json into req.out.
// Errors propagate as osclab::Error; fit refusals inside a sweep are recorded and give exit code 3.
RunResult run_command(const RunRequest& req);

// Reads manifest.json and rebuilds the request it describes, writing to `out`.
RunRequest request_from_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out);

// Default output directory for a command: $OSCLAB_OUT_ROOT/<command> or runs/<command>.
std::filesystem::path default_out(const std::string& command);

}  // namespace osclab::cli
