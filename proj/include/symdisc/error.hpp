#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace symdisc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live in spaces of different dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A polynomial operation produced a monomial above the configured degree cap.
class DegreeCapError : public Error {
 public:
  using Error::Error;
};

/// Malformed input: text formats, CSV rows, invalid domains.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Bad or unknown configuration value. `path` is the dotted key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A numeric procedure produced non-finite values or could not proceed.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  /// Loss values recorded before the failure.
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace symdisc
