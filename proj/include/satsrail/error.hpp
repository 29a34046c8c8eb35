#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace satsrail {

// Base for every error raised by the library. The CLI maps these to exit code 1
// unless a more specific subclass says otherwise.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition or type invariant was violated by the caller's inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A row of an input file could not be accepted. Row numbers are 1-based and
// count the header as row 1.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Scenario configuration problem, tagged with the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class UnknownNodeError : public ValidationError {
 public:
  explicit UnknownNodeError(const std::string& node)
      : ValidationError("unknown node '" + node + "'"), node_(node) {}

  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

// Route refers to a channel that is closed or no longer exists.
class StaleRouteError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

}  // namespace satsrail
