#pragma once

#include <stdexcept>
#include <string>

namespace smc {

/// Syntax error in a model, property or data file. Carries the 1-based
/// source position when known (0 means "not applicable").
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line = 0, int col = 0)
      : std::runtime_error(format(msg, line, col)), line(line), col(col) {}
  int line;
  int col;

 private:
  static std::string format(const std::string& msg, int line, int col) {
    if (line <= 0) return msg;
    return "line " + std::to_string(line) + ", col " + std::to_string(col) +
           ": " + msg;
  }
};

/// Invalid configuration: bad flag values, missing files, out-of-range
/// settings. Distinct from ParseError so the CLI can map exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runtime failure producing no usable result (empty retained set,
/// non-finite objective, ...).
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace smc
