#pragma once

#include <stdexcept>
#include <string>

namespace dif {

// Numeric faults: divergence, non-finite outputs, failed projections.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProjectionError : NumericError {
    ProjectionError(const std::string& what, double residual)
        : NumericError(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0;
};

// Malformed input files; carries a location when known.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what, long line = -1)
        : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_ = -1;
};

// Invalid configuration; message names the offending key path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dif
