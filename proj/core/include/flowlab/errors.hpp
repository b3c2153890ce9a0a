#pragma once

#include <stdexcept>
#include <string>

namespace flowlab {

// Exit-code-bearing error categories for the CLI: usage -> 1, divergence -> 2,
// I/O -> 3.  Library code throws these; the entry point maps them.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace flowlab
