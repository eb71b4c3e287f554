#pragma once

#include <stdexcept>
#include <string>

namespace cnmm {

// Domain/validation problems: bad shapes, invalid sequences, broken gates.
// The CLI maps these to exit status 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration problems: unknown keys, unparsable values. Exit status 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization problems. Exit status 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cnmm
