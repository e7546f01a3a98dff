#pragma once

#include "weakinfo/config.hpp"

#include <exception>
#include <map>
#include <optional>
#include <string>

namespace weakinfo {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int other = 1;
inline constexpr int config = 2;
inline constexpr int solver = 3;
inline constexpr int admissibility = 4;
}  // namespace exit_code

struct CommandOptions {
    std::string command;          ///< overrides run.command when set
    int precision = 7;            ///< significant digits in outputs; 17 or more keeps full precision
    std::optional<double> tolerance;
    int threads = 1;
};

/// Everything a command produces. `files` maps output file names to their contents; the
/// report is printed and also written as report.json. Timings are kept apart so the report
/// and files are byte-reproducible.
struct CommandResult {
    int exit_code = exit_code::ok;
    std::string message;  ///< diagnostic for a nonzero exit
    nlohmann::ordered_json report;
    std::map<std::string, std::string> files;
    nlohmann::ordered_json timings;
};

/// Runs the command selected by `opts.command` (or the config's run.command). Library errors
/// are caught and mapped to exit codes.
CommandResult run_command(const RunConfig& cfg, const CommandOptions& opts);

int exit_code_for(const std::exception& e);

/// x rounded to `digits` significant digits (unchanged when digits >= 17).
double round_significant(double x, int digits);

}  // namespace weakinfo
