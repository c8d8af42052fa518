#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blockhawkes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, invariant violations.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Kernel family not supported by the requested evaluator.
class UnsupportedKernel : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure failed to reach its tolerance.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string diagnostics)
      : Error(what + " [" + diagnostics + "]"), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Intensity at an event is zero, negative, or below the numerical floor.
class LikelihoodUndefined : public Error {
 public:
  LikelihoodUndefined(std::size_t event_index, double intensity)
      : Error("log-likelihood undefined: intensity " + std::to_string(intensity) +
              " at event " + std::to_string(event_index)),
        event_index_(event_index) {}

  std::size_t event_index() const noexcept { return event_index_; }

 private:
  std::size_t event_index_;
};

/// Simulation refused: kernel-norm spectral radius at or above one.
class StabilityError : public Error {
 public:
  using Error::Error;
};

class FittingError : public Error {
 public:
  using Error::Error;
};

struct LineError {
  std::size_t line;  // 1-based, header is line 1
  std::string message;
};

/// Input file could not be parsed. Carries every offending line.
class ParseError : public Error {
 public:
  explicit ParseError(std::vector<LineError> lines)
      : Error(summarize(lines)), lines_(std::move(lines)) {}

  ParseError(std::size_t line, const std::string& message)
      : ParseError(std::vector<LineError>{{line, message}}) {}

  const std::vector<LineError>& lines() const noexcept { return lines_; }

 private:
  static std::string summarize(const std::vector<LineError>& lines) {
    if (lines.empty()) return "parse error";
    std::string out = "parse error at line " + std::to_string(lines.front().line) + ": " +
                      lines.front().message;
    if (lines.size() > 1) out += " (+" + std::to_string(lines.size() - 1) + " more)";
    return out;
  }

  std::vector<LineError> lines_;
};

}  // namespace blockhawkes
