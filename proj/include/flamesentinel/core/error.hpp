#pragma once

#include <stdexcept>
#include <string>

namespace flamesentinel {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the operation's domain (bad roi, T < N, invalid schedule).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tensor extents that do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace flamesentinel
