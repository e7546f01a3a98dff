#pragma once

#include "weakinfo/errors.hpp"
#include "weakinfo/market.hpp"
#include "weakinfo/rational.hpp"
#include "weakinfo/utility.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace weakinfo {

inline constexpr const char* kSchemaVersion = "weakinfo/1";

/// A config number: JSON numbers and strings such as "1/4" or "0.032" are both accepted.
/// `exact` is the rational the text denotes; `text` remembers whether it came in as a string.
struct Number {
    Rational exact;
    double value = 0.0;
    bool text = false;
    std::string literal;  ///< original string form, echoed back verbatim

    static Number of(double x);
    bool operator==(const Number& o) const { return exact == o.exact && value == o.value; }
};

enum class ModelKind { binomial, trinomial, complete_matrix };

struct ModelConfig {
    ModelKind kind = ModelKind::binomial;
    // binomial: s h k r; trinomial: s a b c r; both use periods and wealth
    Number s, h, k, a, b, c, r, wealth;
    int periods = 1;
    // complete-matrix
    int states = 0;
    std::vector<Number> initial_prices;
    std::vector<std::vector<std::vector<Number>>> gross_returns;  ///< [period][state][asset]

    bool operator==(const ModelConfig&) const = default;
};

struct UtilityConfig {
    UtilityKind kind = UtilityKind::log;
    std::optional<Number> gamma;
    std::optional<Number> alpha;

    Utility build() const;
    bool operator==(const UtilityConfig&) const = default;
};

struct AnticipationConfig {
    std::string name;
    std::string preset;              ///< empty when explicit weights are given
    std::vector<Number> weights;
    bool pruning = false;
    std::string level = "terminal";  ///< trinomial only: "terminal" or "path"

    bool operator==(const AnticipationConfig&) const = default;
};

struct RunSection {
    std::string command;
    std::vector<double> v_grid;
    std::string output;
    std::optional<double> tolerance;
    std::vector<double> t;           ///< trinomial interior measure weights per period
    std::string method = "auto";     ///< auto | closed-form | numeric

    bool operator==(const RunSection&) const = default;
};

struct RunConfig {
    std::string schema = kSchemaVersion;
    ModelConfig model;
    UtilityConfig utility;
    std::vector<AnticipationConfig> anticipations;
    bool anticipation_list = false;  ///< the section was written as an array
    RunSection run;

    BinomialParams binomial() const;
    TrinomialParams trinomial() const;
    CompleteMarketSpec complete() const;

    /// Normalized form; parse_config(to_json().dump()) == *this.
    nlohmann::ordered_json to_json() const;
    bool operator==(const RunConfig&) const = default;
};

/// Parses and schema-checks a config. Throws ConfigError carrying the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Line of the value at a JSON pointer ("/model/h"), 0 if absent. Exposed for tests.
int json_pointer_line(const std::string& text, const std::string& pointer);

}  // namespace weakinfo
