// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <iostream>

#include "osclab/cli_core.hpp"

namespace cli = osclab::cli;

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for implicitly oscillatory multilinear forms"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds, manifest;
    unsigned threads = 0;
    app.add_option("--config", config_path, "YAML config file (defaults apply when omitted)");
    app.add_option("--out", out_dir, "output directory; report scans it for experiment folders");
    app.add_option("--seeds", seeds, "seed list, e.g. 1,2,5-8 (overrides run.seeds)");
    app.add_option("--threads", threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    app.add_option("--manifest", manifest, "re-execute the run described by a manifest.json");
    app.fallthrough();

    for (const auto& name : cli::command_names()) app.add_subcommand(name, "run the " + name + " experiment")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) std::cerr << app.help();
        return code == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        cli::RunRequest req;
        const auto out = out_dir.empty() ? cli::default_out(command) : std::filesystem::path(out_dir);
        if (!manifest.empty()) {
            req = cli::request_from_manifest(manifest, out);
            if (req.command != command)
                throw osclab::ConfigError("manifest describes '" + req.command + "', not '" + command + "'");
        } else {
            req.command = command;
            req.config = config_path.empty() ? cli::parse_config("", "<defaults>") : cli::load_config(config_path);
            req.out = out;
        }
        if (!seeds.empty()) req.config.seeds = cli::parse_seed_list(seeds);
        if (threads > 0) req.config.threads = threads;
        const auto res = cli::run_command(req);
        for (const auto& f : res.files) std::cout << (req.out / f).string() << '\n';
        if (!res.message.empty()) std::cerr << res.message << '\n';
        return res.exit_code;
    } catch (const osclab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
