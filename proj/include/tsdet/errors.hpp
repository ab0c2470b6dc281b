#ifndef TSDET_ERRORS_HPP
#define TSDET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tsd {

// Bad configuration (CLI maps this to exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or malformed input data (exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure, e.g. an eigensolver not converging (exit code 4).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated operation precondition.
struct InvalidInput : std::invalid_argument {
    explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace tsd

#endif
