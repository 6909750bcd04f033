#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracemill {

/// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad recipe, unknown tokenizer, invalid policy, and similar caller mistakes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A record failed schema or invariant validation.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Cross-stage reference that does not resolve (e.g. a trace for an unknown question).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Endpoint unreachable or returned a retriable failure until attempts ran out.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::vector<std::string> attempts)
      : Error(what), attempts_(std::move(attempts)) {}
  const std::vector<std::string>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<std::string> attempts_;
};

/// Endpoint answered, but the body was not a valid completion response.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace tracemill
