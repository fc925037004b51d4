#pragma once

#include <stdexcept>
#include <string>

namespace svc {

// Exit-code contract used by the CLI: 2 = I/O, 3 = validation/format, 4 = numerical.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : ValidationError {
    explicit FormatError(const std::string& msg) : ValidationError(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace svc
