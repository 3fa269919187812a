#pragma once

#include <stdexcept>
#include <string>

namespace mirage {

/// Raised for malformed geometry, keys or configuration files.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an operation's preconditions on its arguments are violated.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace mirage
