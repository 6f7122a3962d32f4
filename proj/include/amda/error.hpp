#pragma once

#include <stdexcept>
#include <string>

namespace amda {

/// Exit codes returned by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  usage = 2,
  config = 3,
  data = 4,
  numeric = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Invalid configuration values or unsupported options.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

/// Malformed, inconsistent or degenerate input data.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

/// Numerical failure: non-convergence, NaN losses, undefined statistics.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

}  // namespace amda
