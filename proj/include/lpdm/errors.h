#ifndef LPDM_ERRORS_H
#define LPDM_ERRORS_H

#include <stdexcept>
#include <string>

namespace lpdm {

// Error categories map to CLI exit codes: config -> 1, data -> 2, numeric -> 3.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lpdm

#endif
