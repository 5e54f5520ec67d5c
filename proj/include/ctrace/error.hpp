#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctrace {

// Bad or unreadable input data. The CLI maps these to exit status 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single malformed row. Readers collect these as diagnostics rather than
// aborting the stream.
class ParseError : public InputError {
 public:
  ParseError(std::uint64_t line, const std::string& message)
      : InputError("line " + std::to_string(line) + ": " + message),
        line_(line), reason_(message) {}

  std::uint64_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::uint64_t line_;
  std::string reason_;
};

// Fewer observations than an operation needs (e.g. a change distribution
// over a single period).
class InsufficientDataError : public InputError {
 public:
  using InputError::InputError;
};

// Reservation basis undefined, e.g. a task without a resource request.
class PolicyError : public InputError {
 public:
  using InputError::InputError;
};

// CDF weights are undefined when there are no new submissions.
class UndefinedWeightError : public InputError {
 public:
  using InputError::InputError;
};

// Invalid parameters or configuration. The CLI maps these to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sampling period finer than the data actually carries.
class ResolutionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace ctrace
