#pragma once

#include <stdexcept>
#include <string>

namespace weakinfo {

/// Bad model parameters (no-arbitrage violations, caps exceeded, malformed inputs).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a utility function or its derived maps.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A numerical solver failed to converge or to bracket a root.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration file problems. `line` is 0 when no location is known.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace weakinfo
