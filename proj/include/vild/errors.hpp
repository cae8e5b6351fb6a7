#pragma once

#include <stdexcept>
#include <string>

namespace vild {

// Exit codes surfaced by the CLI.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  config = 2,
  data_format = 3,
  numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration, CLI arguments, or out-of-range hyperparameters.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

// Malformed files, dimension mismatches, inconsistent ids.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ExitCode::data_format, what) {}
};

// Zero norms, non-finite values, divergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

}  // namespace vild
