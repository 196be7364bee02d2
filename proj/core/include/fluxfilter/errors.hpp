#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fluxfilter {

/// Invalid configuration or input data. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : ConfigError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Solver breakdown, loss of conditioning, or a non-finite result. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fluxfilter
