#include "weakinfo/commands.hpp"
#include "weakinfo/config.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <utility>

namespace fs = std::filesystem;

namespace {

int write_outputs(const weakinfo::CommandResult& res, const std::string& dir) {
    if (dir.empty()) return 0;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory '" << dir << "': " << ec.message() << "\n";
        return weakinfo::exit_code::other;
    }
    for (const auto& [name, body] : res.files) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        out << body;
        if (!out) {
            std::cerr << "error: cannot write " << (fs::path(dir) / name).string() << "\n";
            return weakinfo::exit_code::other;
        }
    }
    std::ofstream(fs::path(dir) / "timings.json") << res.timings.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Value of weak information in discrete-time markets"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    weakinfo::CommandOptions opts;
    double tolerance = 0.0;

    const std::pair<const char*, const char*> commands[] = {
        {"measure", "risk-neutral and minimal measure trees"},
        {"value", "multiplier, value of information, wealth and hedge trees"},
        {"sweep", "value curves over a grid of initial wealth"},
        {"trinomial", "multiplier system and hedge on the trinomial lattice"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--out", out_dir, "output directory (defaults to run.output)");
        sub->add_option("-p,--precision", opts.precision, "significant digits in outputs (17 for full precision)")
            ->check(CLI::Range(1, 17));
        sub->add_option("--tolerance", tolerance, "solver tolerance override")->check(CLI::PositiveNumber);
        sub->add_option("-j,--threads", opts.threads, "worker threads for sweeps")->check(CLI::Range(1, 256));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : weakinfo::exit_code::config;
    }

    opts.command = app.get_subcommands().front()->get_name();
    if (tolerance > 0) opts.tolerance = tolerance;

    weakinfo::RunConfig cfg;
    try {
        cfg = weakinfo::load_config(config_path);
    } catch (const weakinfo::ConfigError& e) {
        std::cerr << config_path << ": " << e.what() << "\n";
        return weakinfo::exit_code::config;
    }

    weakinfo::CommandResult res = weakinfo::run_command(cfg, opts);
    std::cout << res.report.dump(2) << "\n";
    if (int rc = write_outputs(res, out_dir.empty() ? cfg.run.output : out_dir)) return rc;
    if (res.exit_code != 0) std::cerr << "error: " << res.message << "\n";
    return res.exit_code;
}
