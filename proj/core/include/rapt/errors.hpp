#pragma once

#include <stdexcept>
#include <string>

namespace rapt {

/// Invalid or inconsistent configuration. Messages carry the offending
/// field path, e.g. "train_domains[0].rho: must be within [-1, 1]".
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (annotation / detection / feature dump schema).
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite loss or gradient, diverged optimization, broken constraint.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rapt
