#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace twoscale {

/// Malformed input data; line is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// (I - Ebar) is singular or numerically so: the model is not identified.
class IdentificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Backfitting iterates blew up (spectral radius of Ebar >= 1).
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace twoscale
