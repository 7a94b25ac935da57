#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfal {

/// Base of every error raised by the library. `code()` is a stable
/// machine-readable tag; `what()` is the human text.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message) : Error("invalid_input", message) {}
};

class UnsupportedArchitecture : public Error {
 public:
  explicit UnsupportedArchitecture(const std::string& message)
      : Error("unsupported_architecture", message) {}
};

class UnsupportedInput : public Error {
 public:
  explicit UnsupportedInput(const std::string& message) : Error("unsupported_input", message) {}
};

/// Malformed dataset file. `position()` is a byte offset for binary formats
/// and a 1-based row number for text formats.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t position)
      : Error("format_error", message), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

/// A broken internal invariant. Indicates a bug, not bad input.
class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& message)
      : Error("invariant_violation", message) {}
};

}  // namespace dfal
