#pragma once

#include <stdexcept>
#include <string>

namespace hitlq {

// Raised for malformed or inconsistent configuration input. CLI maps this
// to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a numerical procedure fails (non-finite intermediate,
// non-convergence). CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hitlq
